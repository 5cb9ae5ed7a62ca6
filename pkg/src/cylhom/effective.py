"""Effective (homogenized) coefficients and their harmonic-mean certificate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import CellSolution, solve_cell
from .coefficients import CoefficientSet, surrogate_norm, validation_sizes
from .trigfield import TrigField, matmul

LOWER_BOUND_TOL = 1e-10


class TruncationMismatch(ValueError):
    pass


class LowerBoundViolation(AssertionError):
    pass


@dataclass(frozen=True, eq=False)
class LowerBoundCertificate:
    x2_points: np.ndarray
    harmonic: np.ndarray      # (npts, d, d) harmonic-mean matrices
    margin: float             # min eigenvalue of Re A0 - harmonic over the grid
    y1_points: int            # periodic grid size used for the y1 averages


@dataclass(frozen=True, eq=False)
class EffectiveCoefficients:
    A0: TrigField
    a1_0: TrigField
    a2_0: TrigField
    q0: TrigField
    certificate: LowerBoundCertificate | None = None

    def as_coefficients(self) -> CoefficientSet:
        return CoefficientSet(self.A0.geometry, self.A0, self.a1_0, self.a2_0, self.q0)

    def bound_constant(self) -> float:
        """Sum of surrogate norms of the four effective fields."""
        return sum(surrogate_norm(f) for f in (self.A0, self.a1_0, self.a2_0, self.q0))


def _check(coeffs: CoefficientSet, cell: CellSolution) -> None:
    if cell.N.geometry != coeffs.geometry:
        raise TruncationMismatch("cell solution and coefficients live on different geometries")
    if cell.N.shape != (coeffs.geometry.d,):
        raise TruncationMismatch("cell solution has the wrong number of columns")
    need = coeffs.bandwidth[: coeffs.geometry.d1]
    if any(t < b for t, b in zip(cell.truncation, need)):
        raise TruncationMismatch(
            f"cell truncation {cell.truncation} below coefficient bandwidth {coeffs.bandwidth}")


def _shifted_gradient(coeffs: CoefficientSet, cell: CellSolution) -> TrigField:
    return cell.D1N + TrigField.identity(coeffs.geometry)


def assemble_A0(coeffs: CoefficientSet, cell: CellSolution) -> TrigField:
    _check(coeffs, cell)
    return matmul(coeffs.A, _shifted_gradient(coeffs, cell)).periodic_mean().trimmed()


def assemble_a10(coeffs: CoefficientSet, cell: CellSolution) -> TrigField:
    _check(coeffs, cell)
    return matmul(_shifted_gradient(coeffs, cell).H, coeffs.a1).periodic_mean().trimmed()


def assemble_a20(coeffs: CoefficientSet, cell: CellSolution) -> TrigField:
    _check(coeffs, cell)
    return (matmul(coeffs.A, cell.D1M) + coeffs.a2).periodic_mean().trimmed()


def assemble_q0(coeffs: CoefficientSet, cell: CellSolution) -> TrigField:
    _check(coeffs, cell)
    cross = matmul(coeffs.a1.conj(), cell.D1M)
    return (coeffs.q.periodic_mean() + cross.periodic_mean()).trimmed()


def _harmonic_mean(coeffs: CoefficientSet, x2_sizes: tuple[int, ...], y1_size: int) -> np.ndarray:
    g = coeffs.geometry
    sizes = (y1_size,) * g.d1 + x2_sizes
    values = coeffs.A.on_grid(sizes)
    mats = np.moveaxis(values, (0, 1), (-2, -1))
    herm = 0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2)))
    inv = np.linalg.inv(herm)
    mean = inv.mean(axis=tuple(range(g.d1)))
    return np.linalg.inv(mean).reshape((-1, g.d, g.d))


def lower_bound_check(eff: EffectiveCoefficients, coeffs: CoefficientSet,
                      enforce: bool = True) -> LowerBoundCertificate:
    """Compare Re A0(x2) with the harmonic mean (mean_y1 (Re A)^{-1})^{-1} on an x2 grid.

    The y1 averages of the non-polynomial integrand (Re A)^{-1} use the trapezoid rule,
    refined by doubling until the harmonic mean is stable to round-off.
    """
    g = coeffs.geometry
    bw = [max(a, b) for a, b in zip(coeffs.A.support_bandwidth(), eff.A0.support_bandwidth())]
    x2_sizes = validation_sizes(bw[g.d1:]) if g.d2 else ()
    y1_size = validation_sizes(bw[: g.d1])[0] if g.d1 else 1
    harmonic = _harmonic_mean(coeffs, x2_sizes, y1_size)
    limit = 4096 if g.d1 == 1 else 128
    while y1_size < limit:
        finer = _harmonic_mean(coeffs, x2_sizes, 2 * y1_size)
        change = np.max(np.abs(finer - harmonic)) / max(np.max(np.abs(finer)), 1e-300)
        harmonic, y1_size = finer, 2 * y1_size
        if change < 1e-14:
            break
    A0_vals = eff.A0.on_grid((1,) * g.d1 + x2_sizes)
    A0_mats = np.moveaxis(A0_vals, (0, 1), (-2, -1)).reshape((-1, g.d, g.d))
    re_A0 = 0.5 * (A0_mats + np.conj(np.swapaxes(A0_mats, -1, -2)))
    diff = re_A0 - harmonic
    diff = 0.5 * (diff + np.conj(np.swapaxes(diff, -1, -2)))
    margin = float(np.min(np.linalg.eigvalsh(diff)))
    axes = [np.arange(s) * L / s for s, L in zip(x2_sizes, g.torus_length)]
    pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], 1) if g.d2 else np.zeros((1, 0))
    cert = LowerBoundCertificate(pts, harmonic, margin, y1_size)
    if enforce and margin < -LOWER_BOUND_TOL:
        raise LowerBoundViolation(f"harmonic-mean lower bound violated: margin {margin:.3e}")
    return cert


def homogenize(coeffs: CoefficientSet, truncation: tuple[int, ...],
               cell: CellSolution | None = None, certify: bool = True
               ) -> tuple[CellSolution, EffectiveCoefficients]:
    """Solve the cell problems and assemble all effective coefficients."""
    if cell is None:
        cell = solve_cell(coeffs, truncation)
    eff = EffectiveCoefficients(assemble_A0(coeffs, cell), assemble_a10(coeffs, cell),
                                assemble_a20(coeffs, cell), assemble_q0(coeffs, cell))
    if certify:
        cert = lower_bound_check(eff, coeffs)
        eff = EffectiveCoefficients(eff.A0, eff.a1_0, eff.a2_0, eff.q0, cert)
    return cell, eff
