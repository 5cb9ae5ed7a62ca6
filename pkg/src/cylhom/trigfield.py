"""Trigonometric-polynomial fields on the fundamental domain.

A field stores centred Fourier coefficients in an array of shape
``component_shape + (2*b_0+1, ..., 2*b_{d-1}+1)``; entry ``[..., b + p]`` is the
coefficient of ``exp(i * sum_a 2*pi*p_a*x_a / length_a)``.  Products are computed by
direct convolution over the nonzero modes of the sparser factor, so products of
trigonometric polynomials are exact (no aliasing, no FFT round-off on zero modes).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .geometry import DomainGeometry

# above this many multiply-adds a product falls back to FFT convolution
_DIRECT_LIMIT = 4e7


@dataclass(frozen=True, eq=False)
class TrigField:
    geometry: DomainGeometry
    coef: np.ndarray
    real: bool = False

    def __post_init__(self) -> None:
        coef = np.asarray(self.coef, dtype=complex)
        d = self.geometry.d
        if coef.ndim < d:
            raise ValueError("coefficient array has fewer axes than the geometry")
        if any(s % 2 == 0 for s in coef.shape[coef.ndim - d:]):
            raise ValueError("mode axes must have odd length")
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, geometry: DomainGeometry, shape: tuple[int, ...] = (),
              bandwidth: tuple[int, ...] | None = None) -> TrigField:
        bw = bandwidth if bandwidth is not None else (0,) * geometry.d
        return cls(geometry, np.zeros(tuple(shape) + tuple(2 * b + 1 for b in bw), complex))

    @classmethod
    def constant(cls, geometry: DomainGeometry, value) -> TrigField:
        value = np.asarray(value, dtype=complex)
        return cls(geometry, value.reshape(value.shape + (1,) * geometry.d))

    @classmethod
    def identity(cls, geometry: DomainGeometry) -> TrigField:
        return cls.constant(geometry, np.eye(geometry.d))

    @classmethod
    def from_modes(cls, geometry: DomainGeometry, modes: dict, shape: tuple[int, ...] = (),
                   bandwidth: tuple[int, ...] | None = None) -> TrigField:
        """Build from ``{mode_tuple: value}`` where value has the component shape."""
        need = np.zeros(geometry.d, dtype=int)
        for p in modes:
            need = np.maximum(need, np.abs(np.asarray(p, dtype=int)))
        bw = tuple(int(b) for b in need) if bandwidth is None else tuple(bandwidth)
        coef = np.zeros(tuple(shape) + tuple(2 * b + 1 for b in bw), complex)
        for p, value in modes.items():
            idx = tuple(int(pa) + b for pa, b in zip(p, bw))
            coef[(...,) + idx] += np.asarray(value, dtype=complex)
        return cls(geometry, coef)

    @classmethod
    def stack(cls, entries) -> TrigField:
        """Assemble a vector or matrix field from nested lists of scalar fields."""
        flat = list(_flatten(entries))
        geometry = flat[0].geometry
        bw = tuple(np.max([f.bandwidth for f in flat], axis=0))
        arrays = np.array(entries, dtype=object)
        out = np.zeros(arrays.shape + tuple(2 * b + 1 for b in bw), complex)
        for idx in np.ndindex(arrays.shape):
            out[idx] = arrays[idx].resized(bw).coef
        return cls(geometry, out)

    # shape information ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[: self.coef.ndim - self.geometry.d]

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return self.coef.shape[self.coef.ndim - self.geometry.d:]

    @property
    def bandwidth(self) -> tuple[int, ...]:
        return tuple((s - 1) // 2 for s in self.grid_shape)

    def support_bandwidth(self) -> tuple[int, ...]:
        """Smallest bandwidth containing every nonzero coefficient."""
        mask = self._mode_mask()
        if not mask.any():
            return (0,) * self.geometry.d
        idx = np.argwhere(mask)
        return tuple(int(v) for v in np.max(np.abs(idx - np.asarray(self.bandwidth)), axis=0))

    def _mode_mask(self) -> np.ndarray:
        ncomp = len(self.shape)
        return np.any(self.coef != 0, axis=tuple(range(ncomp))) if ncomp else self.coef != 0

    def nonzero_modes(self) -> list[tuple[int, ...]]:
        bw = np.asarray(self.bandwidth)
        return [tuple(int(v) for v in row - bw) for row in np.argwhere(self._mode_mask())]

    def component(self, *index) -> TrigField:
        return TrigField(self.geometry, self.coef[index])

    def __getitem__(self, index) -> TrigField:
        if not isinstance(index, tuple):
            index = (index,)
        return self.component(*index)

    # resizing ---------------------------------------------------------------

    def resized(self, bandwidth: tuple[int, ...]) -> TrigField:
        """Zero-pad or truncate to the given bandwidth (truncation drops modes)."""
        bandwidth = tuple(int(b) for b in bandwidth)
        if bandwidth == self.bandwidth:
            return self
        out = np.zeros(self.shape + tuple(2 * b + 1 for b in bandwidth), complex)
        src, dst = [], []
        for old, new in zip(self.bandwidth, bandwidth):
            w = min(old, new)
            src.append(slice(old - w, old + w + 1))
            dst.append(slice(new - w, new + w + 1))
        out[(...,) + tuple(dst)] = self.coef[(...,) + tuple(src)]
        return TrigField(self.geometry, out, self.real)

    def trimmed(self) -> TrigField:
        return self.resized(self.support_bandwidth())

    def coefficient(self, mode) -> np.ndarray:
        """Coefficient of a single mode (zero outside the stored bandwidth)."""
        if any(abs(p) > b for p, b in zip(mode, self.bandwidth)):
            return np.zeros(self.shape, complex)
        idx = tuple(int(p) + b for p, b in zip(mode, self.bandwidth))
        return self.coef[(...,) + idx]

    # arithmetic ---------------------------------------------------------------

    def _aligned(self, other: TrigField) -> tuple[np.ndarray, np.ndarray]:
        bw = tuple(max(a, b) for a, b in zip(self.bandwidth, other.bandwidth))
        return self.resized(bw).coef, other.resized(bw).coef

    def __add__(self, other):
        if not isinstance(other, TrigField):
            other = TrigField.constant(self.geometry, np.broadcast_to(other, self.shape))
        a, b = self._aligned(other)
        return TrigField(self.geometry, a + b)

    __radd__ = __add__

    def __neg__(self) -> TrigField:
        return TrigField(self.geometry, -self.coef, self.real)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar) -> TrigField:
        if isinstance(scalar, TrigField):
            return multiply(self, scalar)
        return TrigField(self.geometry, self.coef * scalar)

    __rmul__ = __mul__

    def conj(self) -> TrigField:
        """Pointwise complex conjugate: coefficient of p becomes conj of coefficient of -p."""
        d = self.geometry.d
        flipped = np.flip(self.coef, axis=tuple(range(self.coef.ndim - d, self.coef.ndim)))
        return TrigField(self.geometry, np.conj(flipped), self.real)

    @property
    def H(self) -> TrigField:
        """Pointwise conjugate transpose of a matrix field."""
        c = self.conj().coef
        return TrigField(self.geometry, np.swapaxes(c, 0, 1))

    @property
    def T(self) -> TrigField:
        return TrigField(self.geometry, np.swapaxes(self.coef, 0, 1))

    def real_part(self) -> TrigField:
        """Pointwise Hermitian part for matrices, real part otherwise."""
        if len(self.shape) == 2:
            return 0.5 * (self + self.H)
        return 0.5 * (self + self.conj())

    # calculus -------------------------------------------------------------------

    def _wavenumber_grid(self, axis: int) -> np.ndarray:
        b = self.bandwidth[axis]
        k = self.geometry.wavenumbers(axis, np.arange(-b, b + 1))
        shape = [1] * self.coef.ndim
        shape[self.coef.ndim - self.geometry.d + axis] = 2 * b + 1
        return k.reshape(shape)

    def deriv(self, axis: int) -> TrigField:
        """Apply -i d/dx along ``axis`` (periodic axes first, then torus axes)."""
        return TrigField(self.geometry, self.coef * self._wavenumber_grid(axis))

    def periodic_mean(self) -> TrigField:
        """Mean over the periodic variables; the result keeps zero periodic bandwidth."""
        d1 = self.geometry.d1
        nc = len(self.shape)
        idx = tuple(slice(b, b + 1) for b in self.bandwidth[:d1])
        return TrigField(self.geometry, self.coef[(slice(None),) * nc + idx])

    def without_periodic_mean(self) -> TrigField:
        return self - self.periodic_mean()

    def translate(self, shift) -> TrigField:
        """Return x -> f(x + shift)."""
        phase = np.ones(self.grid_shape, complex)
        for axis, s in enumerate(shift):
            b = self.bandwidth[axis]
            k = self.geometry.wavenumbers(axis, np.arange(-b, b + 1))
            shape = [1] * self.geometry.d
            shape[axis] = 2 * b + 1
            phase = phase * np.exp(1j * k * s).reshape(shape)
        return TrigField(self.geometry, self.coef * phase, self.real)

    # evaluation ---------------------------------------------------------------------

    def evaluate(self, points) -> np.ndarray:
        """Values at points of shape (npts, d); result has shape component_shape + (npts,)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        bw = np.asarray(self.bandwidth)
        modes = np.argwhere(np.ones(self.grid_shape, bool)) - bw
        k = np.stack([self.geometry.wavenumbers(a, modes[:, a]) for a in range(self.geometry.d)], 1)
        phases = np.exp(1j * points @ k.T)
        flat = self.coef.reshape(self.shape + (-1,))
        return flat @ phases.T

    def on_grid(self, sizes) -> np.ndarray:
        """Values on the uniform grid x_j = j * length / size; shape component_shape + sizes."""
        sizes = tuple(int(s) for s in sizes)
        if any(s < 2 * b + 1 for s, b in zip(sizes, self.bandwidth)):
            raise ValueError("grid too coarse for the field bandwidth")
        d = self.geometry.d
        nc = len(self.shape)
        spec = np.zeros(self.shape + sizes, complex)
        # place centred coefficients into FFT (wrap-around) ordering
        src = self.coef
        for axis in range(d):
            src = np.fft.ifftshift(src, axes=nc + axis)
        index = tuple(_wrap_index(b, s) for b, s in zip(self.bandwidth, sizes))
        spec[np.ix_(*([np.arange(n) for n in self.shape] + list(index)))] = src
        axes = tuple(range(nc, nc + d))
        return np.fft.ifftn(spec, axes=axes) * float(np.prod(sizes))

    def grid_points(self, sizes) -> list[np.ndarray]:
        return [np.arange(s) * length / s for s, length in zip(sizes, self.geometry.axis_lengths)]

    # predicates --------------------------------------------------------------------

    def is_hermitian_symmetric(self, rtol: float = 1e-13) -> bool:
        scale = max(float(np.max(np.abs(self.coef), initial=0.0)), 1e-300)
        return float(np.max(np.abs(self.coef - self.conj().coef), initial=0.0)) <= rtol * scale

    def allclose(self, other: TrigField, atol: float = 1e-12) -> bool:
        a, b = self._aligned(other)
        return a.shape == b.shape and bool(np.all(np.abs(a - b) <= atol))

    def max_abs_difference(self, other: TrigField) -> float:
        a, b = self._aligned(other)
        return float(np.max(np.abs(a - b), initial=0.0))

    def is_zero(self) -> bool:
        return not np.any(self.coef)


def _flatten(entries):
    if isinstance(entries, TrigField):
        yield entries
    else:
        for e in entries:
            yield from _flatten(e)


def _wrap_index(b: int, size: int) -> np.ndarray:
    # ifftshift of length 2b+1 puts mode 0 first, then 1..b, then -b..-1
    return np.concatenate([np.arange(0, b + 1), np.arange(size - b, size)])


# products ------------------------------------------------------------------------------


def convolve(a: np.ndarray, b: np.ndarray, comps: tuple[str, str, str], d: int) -> np.ndarray:
    """Coefficient array of the pointwise product of two fields.

    ``comps`` names the component indices of ``a``, ``b`` and the result in einsum
    notation, e.g. ``("ij", "jk", "ik")`` for a matrix product.  The last ``d`` axes of
    each array are mode axes.
    """
    ga = a.shape[a.ndim - d:]
    gb = b.shape[b.ndim - d:]
    out_grid = tuple(x + y - 1 for x, y in zip(ga, gb))
    ca, cb, co = comps
    nza = _count_nonzero_modes(a, d)
    nzb = _count_nonzero_modes(b, d)
    cost = min(nza * int(np.prod(gb)), nzb * int(np.prod(ga)))
    if cost > _DIRECT_LIMIT:
        return _fft_product(a, b, comps, d, out_grid)
    if nza < nzb:
        # iterate over modes of a, shifting copies of b
        big, small, big_c, small_c, swap = b, a, cb, ca, True
    else:
        big, small, big_c, small_c, swap = a, b, ca, cb, False
    gbig = big.shape[big.ndim - d:]
    spec = f"{small_c},{big_c}...->{co}..." if swap else f"{big_c}...,{small_c}->{co}..."
    comp_out = _output_shape(a, b, comps, d)
    out = np.zeros(comp_out + out_grid, complex)
    nsmall = small.ndim - d
    mask = np.any(small != 0, axis=tuple(range(nsmall))) if nsmall else small != 0
    for pos in np.argwhere(mask):
        vals = small[(...,) + tuple(pos)]
        block = np.einsum(spec, vals, big) if swap else np.einsum(spec, big, vals)
        sl = tuple(slice(int(p), int(p) + g) for p, g in zip(pos, gbig))
        out[(...,) + sl] += block
    return out


def _count_nonzero_modes(a: np.ndarray, d: int) -> int:
    nc = a.ndim - d
    mask = np.any(a != 0, axis=tuple(range(nc))) if nc else a != 0
    return int(np.count_nonzero(mask))


def _output_shape(a, b, comps, d) -> tuple[int, ...]:
    ca, cb, co = comps
    sizes = {}
    for letters, arr in ((ca, a), (cb, b)):
        for letter, n in zip(letters, arr.shape[: arr.ndim - d]):
            sizes[letter] = n
    return tuple(sizes[c] for c in co)


def _fft_product(a, b, comps, d, out_grid) -> np.ndarray:
    ca, cb, co = comps
    sizes = {}
    for letters, arr in ((ca, a), (cb, b)):
        for letter, n in zip(letters, arr.shape[: arr.ndim - d]):
            sizes[letter] = n
    names = sorted(sizes)
    out = np.zeros(_output_shape(a, b, comps, d) + out_grid, complex)
    for assign in itertools.product(*[range(sizes[c]) for c in names]):
        env = dict(zip(names, assign))
        ia = tuple(env[c] for c in ca)
        ib = tuple(env[c] for c in cb)
        io = tuple(env[c] for c in co)
        out[io] += fftconvolve(a[ia], b[ib], mode="full")
    return out


def multiply(f: TrigField, g: TrigField) -> TrigField:
    """Pointwise product where at least one factor is scalar, or elementwise for equal shapes."""
    d = f.geometry.d
    if not f.shape:
        letters = "abcd"[: len(g.shape)]
        return TrigField(f.geometry, convolve(f.coef, g.coef, ("", letters, letters), d))
    if not g.shape:
        letters = "abcd"[: len(f.shape)]
        return TrigField(f.geometry, convolve(f.coef, g.coef, (letters, "", letters), d))
    if f.shape != g.shape:
        raise ValueError("elementwise product needs equal component shapes")
    letters = "abcd"[: len(f.shape)]
    return TrigField(f.geometry, convolve(f.coef, g.coef, (letters, letters, letters), d))


def matmul(f: TrigField, g: TrigField) -> TrigField:
    """Pointwise matrix/vector product: matrix@matrix, matrix@vector, vector@matrix, vector@vector."""
    d = f.geometry.d
    nf, ng = len(f.shape), len(g.shape)
    comps = {(2, 2): ("ij", "jk", "ik"), (2, 1): ("ij", "j", "i"),
             (1, 2): ("j", "jk", "k"), (1, 1): ("j", "j", "")}[(nf, ng)]
    return TrigField(f.geometry, convolve(f.coef, g.coef, comps, d))
