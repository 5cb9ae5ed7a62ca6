"""Band-limited functions on the cylinder and the direct-integral action of global operators.

A :class:`CylinderFunction` is a finite combination of normalised plane waves
``exp(i <x1, xi>) * exp(2 pi i <m, x2/L>)`` with complex weights; its L2 norm is, by
definition, the Euclidean norm of the weights (Plancherel on the spectral side).

After rescaling x1 by eps and applying the Gelfand transform, a plane wave with
frequency xi sits in the fiber at quasimomentum k = eps*xi reduced to the Brillouin
zone, on the fundamental-domain mode (n, m) with eps*xi = k + 2*pi*n/period.  Every
global operator of the theory acts fiber-wise there, so applying it to a
CylinderFunction is an exact finite computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fiber import FiberEngine, FiberSet, Quasimomentum
from .geometry import DomainGeometry

GLOBAL_TAGS = ("resolvent", "eff_resolvent", "K", "C", "L")
_KEY_DIGITS = 9


class WindowError(ValueError):
    """A component falls outside the representable fiber window."""


def _key(k: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in np.round(k, _KEY_DIGITS))


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    geometry: DomainGeometry
    frequencies: np.ndarray   # (ncomp, d1) real x1-frequencies
    modes: np.ndarray         # (ncomp, d2) integer x2-modes
    weights: np.ndarray       # (ncomp,) complex

    def __post_init__(self) -> None:
        g = self.geometry
        freq = np.asarray(self.frequencies, float).reshape(-1, g.d1)
        modes = np.asarray(self.modes, np.int64).reshape(-1, g.d2)
        w = np.asarray(self.weights, complex).ravel()
        if not freq.shape[0] == modes.shape[0] == w.shape[0]:
            raise ValueError("frequencies, modes and weights must have one entry per component")
        object.__setattr__(self, "frequencies", freq)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls, geometry: DomainGeometry) -> CylinderFunction:
        return cls(geometry, np.zeros((0, geometry.d1)), np.zeros((0, geometry.d2)), np.zeros(0))

    @classmethod
    def random(cls, geometry: DomainGeometry, ncomp: int, seed: int = 0,
               freq_radius: float = 4.0, max_mode: int = 2) -> CylinderFunction:
        rng = np.random.default_rng(seed)
        freq = rng.uniform(-freq_radius, freq_radius, (ncomp, geometry.d1))
        modes = rng.integers(-max_mode, max_mode + 1, (ncomp, geometry.d2))
        w = rng.standard_normal(ncomp) + 1j * rng.standard_normal(ncomp)
        return cls(geometry, freq, modes, w).combined()

    @property
    def ncomp(self) -> int:
        return self.weights.shape[0]

    def combined(self) -> CylinderFunction:
        """Merge components sharing (frequency, mode); drop exact zeros."""
        acc: dict[tuple, complex] = {}
        first: dict[tuple, int] = {}
        for j, (xi, m, w) in enumerate(zip(self.frequencies, self.modes, self.weights)):
            key = _key(xi) + tuple(int(v) for v in m)
            if key not in acc:
                acc[key] = 0j
                first[key] = j
            acc[key] += w
        keep = [key for key in first if acc[key] != 0]
        idx = np.array([first[key] for key in keep], np.int64)
        freq = self.frequencies[idx] if len(idx) else np.zeros((0, self.geometry.d1))
        modes = self.modes[idx] if len(idx) else np.zeros((0, self.geometry.d2), np.int64)
        return CylinderFunction(self.geometry, freq, modes, np.array([acc[k] for k in keep]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.combined().weights))

    def h1_norm(self) -> float:
        """Discrete H1 norm: weights scaled by sqrt(1 + |xi|^2 + |2 pi m / L|^2)."""
        g = self.geometry
        u = self.combined()
        torus = 2 * np.pi * u.modes / np.asarray(g.torus_length) if g.d2 else np.zeros((u.ncomp, 0))
        symbol = 1 + np.sum(u.frequencies**2, axis=1) + np.sum(torus**2, axis=1)
        return float(np.sqrt(np.sum(symbol * np.abs(u.weights) ** 2)))

    def __add__(self, other: CylinderFunction) -> CylinderFunction:
        return CylinderFunction(self.geometry, np.vstack([self.frequencies, other.frequencies]),
                                np.vstack([self.modes, other.modes]),
                                np.concatenate([self.weights, other.weights])).combined()

    def __sub__(self, other: CylinderFunction) -> CylinderFunction:
        return self + other * -1.0

    def __mul__(self, scalar: complex) -> CylinderFunction:
        return CylinderFunction(self.geometry, self.frequencies, self.modes, self.weights * scalar)

    __rmul__ = __mul__

    def allclose(self, other: CylinderFunction, tol: float = 1e-12) -> bool:
        diff = (self - other).norm()
        return diff <= tol * max(self.norm(), other.norm(), 1e-300)


def scale(u: CylinderFunction, delta: float) -> CylinderFunction:
    """The scaling v(y1) = delta^{d1/2} u(delta y1) in the x1 variables: xi -> delta xi."""
    if delta <= 0:
        raise ValueError("scaling factor must be positive")
    return CylinderFunction(u.geometry, u.frequencies * delta, u.modes, u.weights)


# Gelfand transform ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiberSample:
    """Fiber of a transformed function: quasimomentum k and weights on modes (n, m)."""

    k: tuple[float, ...]
    entries: dict[tuple[int, ...], complex] = field(default_factory=dict)

    def vector(self, basis) -> np.ndarray:
        v = np.zeros(basis.dim, complex)
        for mode, w in self.entries.items():
            try:
                v[basis.index_of(mode)] += w
            except KeyError as exc:
                raise WindowError(f"mode {mode} at k={self.k} outside the fiber basis") from exc
        return v


def gelfand_forward(u: CylinderFunction, eps: float) -> dict[tuple[float, ...], FiberSample]:
    """Scale x1 by eps and split into fibers over the Brillouin zone."""
    g = u.geometry
    lattice = g.lattice()
    out: dict[tuple[float, ...], FiberSample] = {}
    for xi, m, w in zip(u.frequencies, u.modes, u.weights):
        k, n = lattice.reduce(eps * xi)
        sample = out.setdefault(_key(k), FiberSample(tuple(float(v) for v in k), {}))
        mode = tuple(int(v) for v in n) + tuple(int(v) for v in m)
        sample.entries[mode] = sample.entries.get(mode, 0j) + w
    return out


def gelfand_inverse(fibers: dict[tuple[float, ...], FiberSample], geometry: DomainGeometry,
                    eps: float) -> CylinderFunction:
    d1 = geometry.d1
    dual = 2 * np.pi / np.asarray(geometry.period)
    freq, modes, weights = [], [], []
    for sample in fibers.values():
        k = np.asarray(sample.k)
        for mode, w in sample.entries.items():
            n = np.asarray(mode[:d1])
            freq.append((k + dual * n) / eps)
            modes.append(mode[d1:])
            weights.append(w)
    if not weights:
        return CylinderFunction.empty(geometry)
    return CylinderFunction(geometry, np.array(freq), np.array(modes).reshape(len(weights), -1),
                            np.array(weights)).combined()


def apply_P_eps(u: CylinderFunction, eps: float) -> CylinderFunction:
    """Keep the components whose x1-frequency lies in the scaled Brillouin zone."""
    lattice = u.geometry.lattice()
    keep = np.array([lattice.in_open_zone(eps * xi) for xi in u.frequencies], bool)
    return CylinderFunction(u.geometry, u.frequencies[keep], u.modes[keep], u.weights[keep])


# global operators ----------------------------------------------------------------------------


def _vector_to_sample(basis, k, vec: np.ndarray) -> FiberSample:
    nz = np.flatnonzero(vec)
    return FiberSample(k, {tuple(int(v) for v in basis.modes[i]): complex(vec[i]) for i in nz})


def _symbol_apply(engine: FiberEngine, u: CylinderFunction, adjoint_form: bool) -> CylinderFunction:
    """Apply L (or (L+)^*) through its symbol at each component's own frequency."""
    g = u.geometry
    basis = engine.basis
    P1 = basis.P1
    zero = (0,) * g.d1
    freq, modes, weights = [], [], []
    groups: dict[tuple, list[int]] = {}
    for j, xi in enumerate(u.frequencies):
        groups.setdefault(_key(xi), []).append(j)
    for idx in groups.values():
        xi = u.frequencies[idx[0]]
        fs = FiberSet(engine, Quasimomentum(tuple(xi), 1.0))
        block = np.conj(fs.L_plus_block).T if adjoint_form else fs.L_block
        x = np.zeros(basis.block_size, complex)
        for j in idx:
            try:
                x[basis.index_of(zero + tuple(u.modes[j])) - P1.start] += u.weights[j]
            except KeyError as exc:
                raise WindowError(f"x2-mode {tuple(u.modes[j])} outside the fiber basis") from exc
        y = block @ x
        for i in np.flatnonzero(y):
            freq.append(xi)
            modes.append(basis.modes[P1.start + i][g.d1:])
            weights.append(y[i])
    if not weights:
        return CylinderFunction.empty(g)
    return CylinderFunction(g, np.array(freq), np.array(modes).reshape(len(weights), -1),
                            np.array(weights)).combined()


def _fiber_apply(engine: FiberEngine, u: CylinderFunction, eps: float, tag: str) -> CylinderFunction:
    fibers = gelfand_forward(u, eps)
    out = {}
    for key, sample in fibers.items():
        fs = FiberSet(engine, Quasimomentum(sample.k, eps))
        x = sample.vector(engine.basis)
        if tag == "resolvent":
            y = eps**2 * fs.resolvent(x)
        elif tag == "eff_resolvent":
            y = eps**2 * fs.resolvent(x, effective=True)
        elif tag == "K":
            y = eps * (fs.K_cols @ x[engine.basis.P1])
        elif tag == "K+*":
            y = np.zeros_like(x)
            y[engine.basis.P1] = eps * (np.conj(fs.K_plus_cols).T @ x)
        else:
            raise KeyError(tag)
        out[key] = _vector_to_sample(engine.basis, sample.k, y)
    return gelfand_inverse(out, u.geometry, eps)


def global_apply(tag: str, u: CylinderFunction, eps: float, engine: FiberEngine) -> CylinderFunction:
    """Apply a global operator at scale eps to a band-limited function.

    Tags: ``resolvent`` (A_mu^eps)^{-1}, ``eff_resolvent`` (A_mu^0)^{-1}, ``K`` the first
    corrector (smoothing included), ``L`` the symbol operator, and ``C`` the combined
    second corrector (K - L) + (K+ - L+)^*.
    """
    if tag not in GLOBAL_TAGS:
        raise KeyError(f"unknown global operator {tag!r}")
    if tag == "L":
        return _symbol_apply(engine, u, adjoint_form=False)
    if tag == "C":
        return (_fiber_apply(engine, u, eps, "K") - _symbol_apply(engine, u, False)
                + _fiber_apply(engine, u, eps, "K+*") - _symbol_apply(engine, u, True))
    return _fiber_apply(engine, u, eps, tag)


# direct-integral plan ------------------------------------------------------------------------


class DirectIntegralPlan:
    """Midpoint quadrature over the Brillouin zone with lazily built fiber sets."""

    def __init__(self, engine: FiberEngine, eps: float, nodes_per_axis: int = 8):
        self.engine = engine
        self.eps = float(eps)
        g = engine.coeffs.geometry
        half = np.pi / np.asarray(g.period)
        axes = [(-h + (np.arange(nodes_per_axis) + 0.5) * 2 * h / nodes_per_axis) for h in half]
        grid = np.meshgrid(*axes, indexing="ij")
        self.nodes = np.stack([a.ravel() for a in grid], axis=1)
        self.zone_volume = float(np.prod(2 * half))
        self.weights = np.full(len(self.nodes), self.zone_volume / len(self.nodes))

    @cached_property
    def fibers(self) -> list[FiberSet]:
        return [FiberSet(self.engine, Quasimomentum(tuple(k), self.eps)) for k in self.nodes]

    def sup_norm(self, fiber_norm) -> float:
        """Direct-integral operator norm estimate: max over the nodes of a fiber norm."""
        return max(float(fiber_norm(fs)) for fs in self.fibers)
