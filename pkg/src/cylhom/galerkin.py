"""Truncated Fourier mode sets and Galerkin multiplication operators on them."""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve

from .geometry import DomainGeometry
from .trigfield import TrigField

# fields with more nonzero modes than this are applied by FFT convolution
_SHIFT_LIMIT = 64


class ModeSet:
    """All modes p with |p_a| <= half_widths[a], flattened in C order.

    Periodic axes come first, so the flat index runs slowest over the periodic modes
    and each block of consecutive entries shares one periodic mode.
    """

    def __init__(self, geometry: DomainGeometry, half_widths: tuple[int, ...]):
        if len(half_widths) != geometry.d:
            raise ValueError("one half-width per axis required")
        self.geometry = geometry
        self.half_widths = tuple(int(h) for h in half_widths)
        self.grid_shape = tuple(2 * h + 1 for h in self.half_widths)
        grids = np.meshgrid(*[np.arange(-h, h + 1) for h in self.half_widths], indexing="ij")
        self.modes = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
        self.dim = self.modes.shape[0]

    def wavenumbers(self, axis: int) -> np.ndarray:
        return self.geometry.wavenumbers(axis, self.modes[:, axis])

    @cached_property
    def periodic_zero(self) -> np.ndarray:
        """Boolean mask of modes with vanishing periodic part (the y1-constant functions)."""
        return np.all(self.modes[:, : self.geometry.d1] == 0, axis=1)

    @cached_property
    def block_size(self) -> int:
        """Number of torus modes per periodic mode."""
        return int(np.prod(self.grid_shape[self.geometry.d1:], dtype=np.int64))

    @cached_property
    def zero_block(self) -> slice:
        idx = np.flatnonzero(self.periodic_zero)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    def index_of(self, mode) -> int:
        mode = np.asarray(mode)
        if np.any(np.abs(mode) > np.asarray(self.half_widths)):
            raise KeyError(f"mode {tuple(mode)} outside the mode set")
        return int(np.ravel_multi_index(tuple(mode + np.asarray(self.half_widths)), self.grid_shape))

    @cached_property
    def _difference_code(self) -> np.ndarray:
        # flat index of p_i - p_j into an array of half-width 2*h per axis
        wide = tuple(4 * h + 1 for h in self.half_widths)
        strides = np.cumprod((1,) + wide[::-1])[:-1][::-1]
        code = np.zeros((self.dim, self.dim), dtype=np.int64)
        for a, h in enumerate(self.half_widths):
            diff = self.modes[:, a][:, None] - self.modes[:, a][None, :] + 2 * h
            code += diff * int(strides[a])
        return code

    def widened(self, coef: np.ndarray) -> np.ndarray:
        """Embed a scalar coefficient grid into half-width 2*h per axis (truncating excess)."""
        d = self.geometry.d
        bw = tuple((s - 1) // 2 for s in coef.shape[-d:])
        out = np.zeros(tuple(4 * h + 1 for h in self.half_widths), complex)
        src, dst = [], []
        for b, h in zip(bw, self.half_widths):
            w = min(b, 2 * h)
            src.append(slice(b - w, b + w + 1))
            dst.append(slice(2 * h - w, 2 * h + w + 1))
        out[tuple(dst)] = coef[tuple(src)]
        return out

    def multiplication_matrix(self, f: TrigField) -> np.ndarray:
        """Galerkin matrix of multiplication by a scalar field: entry (i, j) = f_hat(p_i - p_j)."""
        if f.shape:
            raise ValueError("multiplication_matrix needs a scalar field")
        return self.widened(f.coef).ravel()[self._difference_code]

    def to_grid(self, vectors: np.ndarray) -> np.ndarray:
        """Reshape (dim, r) coefficient columns to grid_shape + (r,)."""
        return vectors.reshape(self.grid_shape + vectors.shape[1:])

    def apply_multiplication(self, f: TrigField, vectors: np.ndarray) -> np.ndarray:
        """Multiply columns of coefficient vectors by a scalar field, projected back onto the set.

        Equivalent to ``multiplication_matrix(f) @ vectors`` without forming the matrix.
        """
        d = self.geometry.d
        vec = np.asarray(vectors)
        squeeze = vec.ndim == 1
        if squeeze:
            vec = vec[:, None]
        grid = self.to_grid(vec)
        coef = f.coef
        bw = f.bandwidth
        if np.count_nonzero(coef) > _SHIFT_LIMIT:
            full = fftconvolve(grid, coef[..., None], mode="full", axes=tuple(range(d)))
            crop = tuple(slice(b, b + n) for b, n in zip(bw, self.grid_shape))
            out = full[crop].reshape(vec.shape)
            return out[:, 0] if squeeze else out
        out = np.zeros_like(grid, dtype=complex)
        for pos in np.argwhere(coef != 0):
            shift = pos - np.asarray(bw)
            if np.any(np.abs(shift) > 2 * np.asarray(self.half_widths)):
                continue
            dst, src = [], []
            for s, n in zip(shift, self.grid_shape):
                if s >= 0:
                    dst.append(slice(s, n))
                    src.append(slice(0, n - s))
                else:
                    dst.append(slice(0, n + s))
                    src.append(slice(-s, n))
            out[tuple(dst)] += coef[tuple(pos)] * grid[tuple(src)]
        out = out.reshape(vec.shape)
        return out[:, 0] if squeeze else out

    def field_from_vector(self, vector: np.ndarray) -> TrigField:
        return TrigField(self.geometry, np.asarray(vector).reshape(self.grid_shape))

    def vector_from_field(self, f: TrigField) -> np.ndarray:
        if f.shape:
            raise ValueError("scalar field required")
        return f.resized(self.half_widths).coef.ravel().copy()
