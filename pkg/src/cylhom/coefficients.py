"""Coefficient model, surrogate multiplier norms and coercivity/sector data."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.optimize import minimize

from .geometry import DomainGeometry
from .trigfield import TrigField


class CoercivityError(ValueError):
    """Raised when the coefficients violate ellipticity or the strict coercivity hypothesis."""


def validation_sizes(bandwidth) -> tuple[int, ...]:
    """Oversampled grid size per axis: at least 4x the number of retained modes."""
    return tuple(max(16, 4 * (2 * b + 1)) for b in bandwidth)


def pointwise_norm(values: np.ndarray, ncomp: int) -> np.ndarray:
    """Spectral norm (matrix), Euclidean norm (vector) or modulus (scalar) at each point."""
    if ncomp == 0:
        return np.abs(values)
    if ncomp == 1:
        return np.sqrt(np.sum(np.abs(values) ** 2, axis=0))
    mats = np.moveaxis(values.reshape(values.shape[:2] + (-1,)), -1, 0)
    return np.linalg.svd(mats, compute_uv=False)[:, 0].reshape(values.shape[2:])


def min_hermitian_eigenvalue(values: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the Hermitian part of a matrix field sampled pointwise."""
    mats = np.moveaxis(values.reshape(values.shape[:2] + (-1,)), -1, 0)
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, 1, 2)))
    return np.linalg.eigvalsh(herm)[:, 0].reshape(values.shape[2:])


def _pointwise_objective(f: TrigField, kind: str):
    ncomp = len(f.shape)

    def value(x: np.ndarray) -> float:
        v = f.evaluate(x[None, :])
        if kind == "inverse_hermitian_part":
            lam = float(min_hermitian_eigenvalue(v)[0])
            return np.inf if lam <= 0 else 1.0 / lam
        return float(pointwise_norm(v, ncomp)[0])

    return value


def surrogate_norm(f: TrigField, kind: str = "sup") -> float:
    """Sup over the domain of the pointwise norm of ``f``.

    ``kind="sup"`` uses the pointwise spectral/Euclidean/absolute norm of ``f``;
    ``kind="inverse_hermitian_part"`` gives the sup of ||(Re f)^{-1}|| for a matrix field,
    i.e. the reciprocal of the infimum of the smallest eigenvalue of the Hermitian part.

    The sup is taken on an oversampled uniform grid and then polished by local
    maximisation started from the best grid points, so the result is insensitive to
    where the grid happens to fall relative to the maximiser.
    """
    if kind not in ("sup", "inverse_hermitian_part"):
        raise ValueError(f"unknown norm kind {kind!r}")
    if f.is_zero():
        return 0.0 if kind == "sup" else np.inf
    sizes = validation_sizes(f.bandwidth)
    values = f.on_grid(sizes)
    if kind == "sup":
        grid = pointwise_norm(values, len(f.shape))
    else:
        lam = min_hermitian_eigenvalue(values)
        if np.min(lam) <= 0:
            return np.inf
        grid = 1.0 / lam
    best = float(np.max(grid))
    if all(b == 0 for b in f.bandwidth):
        return best
    objective = _pointwise_objective(f, kind)
    axes = f.grid_points(sizes)
    flat = np.argsort(grid, axis=None)[::-1][:4]
    for idx in flat:
        start = np.array([axes[a][i] for a, i in enumerate(np.unravel_index(idx, sizes))])
        res = minimize(lambda x: -objective(x), start, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        best = max(best, float(-res.fun))
    return best


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Coefficients A (d x d), a1, a2 (d-vectors) and q (scalar) on the fundamental domain."""

    geometry: DomainGeometry
    A: TrigField
    a1: TrigField
    a2: TrigField
    q: TrigField

    def __post_init__(self) -> None:
        d = self.geometry.d
        expected = {"A": (d, d), "a1": (d,), "a2": (d,), "q": ()}
        for name, shape in expected.items():
            fld = getattr(self, name)
            if fld.shape != shape:
                raise ValueError(f"field {name} must have component shape {shape}, got {fld.shape}")

    @classmethod
    def from_matrix(cls, geometry: DomainGeometry, A: TrigField, a1: TrigField | None = None,
                    a2: TrigField | None = None, q: TrigField | None = None) -> CoefficientSet:
        d = geometry.d
        zero_vec = TrigField.zeros(geometry, (d,))
        return cls(geometry, A, a1 if a1 is not None else zero_vec,
                   a2 if a2 is not None else zero_vec,
                   q if q is not None else TrigField.zeros(geometry))

    def fields(self) -> dict[str, TrigField]:
        return {"A": self.A, "a1": self.a1, "a2": self.a2, "q": self.q}

    @property
    def bandwidth(self) -> tuple[int, ...]:
        """Joint support bandwidth of all four fields."""
        bws = [f.support_bandwidth() for f in self.fields().values()]
        return tuple(int(b) for b in np.max(bws, axis=0))

    def torus_derivative(self, name: str) -> list[TrigField]:
        """Exact x2-derivatives (one per torus axis) of the named field."""
        f = getattr(self, name)
        return [f.deriv(self.geometry.d1 + j) for j in range(self.geometry.d2)]

    @property
    def D2A(self) -> list[TrigField]:
        return self.torus_derivative("A")

    @property
    def D2a1(self) -> list[TrigField]:
        return self.torus_derivative("a1")

    @property
    def D2a2(self) -> list[TrigField]:
        return self.torus_derivative("a2")

    @property
    def D2q(self) -> list[TrigField]:
        return self.torus_derivative("q")

    def adjoint(self) -> CoefficientSet:
        """Coefficients of the formal adjoint operator: A*, a2 and a1 swapped, conj(q)."""
        return CoefficientSet(self.geometry, self.A.H, self.a2, self.a1, self.q.conj())

    def is_constant_in_y1(self) -> bool:
        return all(f.support_bandwidth()[: self.geometry.d1] == (0,) * self.geometry.d1
                   for f in self.fields().values())

    @cached_property
    def norms(self) -> dict[str, float]:
        return {
            "A": surrogate_norm(self.A),
            "a1": surrogate_norm(self.a1),
            "a2": surrogate_norm(self.a2),
            "q": surrogate_norm(self.q),
            "ReA_inv": surrogate_norm(self.A, "inverse_hermitian_part"),
        }


@dataclass(frozen=True)
class CoercivityData:
    c_star: float
    c_natural: float
    C_flat: float
    C_flat0: float | None = None
    mu: complex = field(default=-1.0 + 0j)

    def sector_constant(self, which: str = "S") -> float:
        if which == "S1":
            return self.C_flat
        if which == "S0":
            if self.C_flat0 is None:
                raise ValueError("effective bound C_flat0 not available")
            return self.C_flat0
        if which == "S":
            return max(self.C_flat, self.C_flat0 or 0.0)
        raise ValueError(f"unknown sector {which!r}")

    def with_effective_bound(self, C_flat0: float) -> CoercivityData:
        return replace(self, C_flat0=float(C_flat0))

    def summary(self) -> dict[str, float]:
        out = {"c_star": self.c_star, "c_natural": self.c_natural, "C_flat": self.C_flat,
               "mu_re": float(np.real(self.mu)), "mu_im": float(np.imag(self.mu))}
        if self.C_flat0 is not None:
            out["C_flat0"] = self.C_flat0
        return out


def default_mu(c_star: float, c_natural: float) -> complex:
    """A real spectral parameter strictly outside every sector and left of -c_natural."""
    return complex(-(c_natural + max(1.0, 2.0 * c_star)))


def coercivity_constants(coeffs: CoefficientSet) -> CoercivityData:
    n = coeffs.norms
    if not np.isfinite(n["ReA_inv"]):
        raise CoercivityError("uniform ellipticity violated: Re A is not positive definite")
    lower = n["a1"] + n["a2"] + n["q"]
    c_star = 1.0 / n["ReA_inv"] - lower
    if c_star <= 0:
        raise CoercivityError(
            "coercivity hypothesis violated: |a1| + |a2| + |q| = "
            f"{lower:.6g} is not below 1/|(Re A)^-1| = {1.0 / n['ReA_inv']:.6g}")
    c_natural = 0.5 * (n["a1"] + n["a2"]) + n["q"]
    C_flat = n["A"] + lower
    return CoercivityData(c_star, c_natural, C_flat, None, default_mu(c_star, c_natural))


def sector_contains(data: CoercivityData, z: complex, which: str = "S") -> bool:
    C = data.sector_constant(which)
    return abs(z.imag) <= C / data.c_star * (z.real + data.c_star + data.c_natural)


def in_left_half_plane(data: CoercivityData, z: complex) -> bool:
    return z.real < -data.c_natural
