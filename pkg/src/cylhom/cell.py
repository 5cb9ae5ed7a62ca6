"""Periodic cell problems in the y1 variables, parameterised by x2.

All problems have the form: find u with zero y1-mean such that
``D1^*(A11 D1 u + f) = 0`` in the weak sense, where ``A11`` is the periodic-periodic block
of the coefficient matrix and ``f`` a d1-vector field.  The Galerkin space consists of
the retained Fourier modes with nonzero periodic part; the periodic-mean modes are
excised, which fixes the zero-mean normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .coefficients import CoefficientSet
from .galerkin import ModeSet
from .geometry import DomainGeometry
from .trigfield import TrigField, matmul

RESIDUAL_TOL = 1e-10


class CellSolveError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CellProblem:
    A11: TrigField
    f: TrigField
    truncation: tuple[int, ...]


class CellOperator:
    """Factorised Galerkin matrix of u -> D1^*(A11 D1 u) on mean-free modes."""

    def __init__(self, A11: TrigField, truncation: tuple[int, ...]):
        geometry = A11.geometry
        d1 = geometry.d1
        if A11.shape != (d1, d1):
            raise ValueError("A11 must be a d1 x d1 matrix field")
        if any(h < 1 for h in truncation[:d1]):
            raise CellSolveError("cell truncation must retain at least one periodic mode")
        self.geometry = geometry
        self.truncation = tuple(int(t) for t in truncation)
        # when A11 does not depend on x2 the system decouples over torus modes
        self.decoupled = all(b == 0 for b in A11.support_bandwidth()[d1:])
        if self.decoupled:
            idx0 = tuple(b for b in A11.bandwidth[d1:])
            A_per = A11.coef[(...,) + tuple(slice(None) for _ in range(d1)) + idx0]
            per_geom = DomainGeometry(d1, 0, geometry.period, ())
            self.modes = ModeSet(per_geom, self.truncation[:d1])
            self.A11 = TrigField(per_geom, A_per)
        else:
            self.modes = ModeSet(geometry, self.truncation)
            self.A11 = A11
        self.keep = ~self.modes.periodic_zero
        self.xi = [self.modes.wavenumbers(c) for c in range(d1)]
        G = np.zeros((self.modes.dim, self.modes.dim), complex)
        for c in range(d1):
            for c2 in range(d1):
                T = self.modes.multiplication_matrix(self.A11.component(c, c2))
                G += self.xi[c][:, None] * T * self.xi[c2][None, :]
        self.matrix = G[np.ix_(self.keep, self.keep)]
        if self.matrix.size == 0:
            raise CellSolveError("empty Galerkin space")
        try:
            with np.errstate(all="raise"):
                self.lu = sla.lu_factor(self.matrix, check_finite=True)
        except (FloatingPointError, ValueError, sla.LinAlgError) as exc:
            raise CellSolveError(f"cell matrix factorisation failed: {exc}") from exc
        if np.min(np.abs(np.diag(self.lu[0]))) <= 1e-14 * np.max(np.abs(self.matrix)):
            raise CellSolveError("singular Galerkin matrix (ellipticity loss)")

    def _rhs(self, f: TrigField) -> np.ndarray:
        """Right-hand side columns -D1^* f tested against retained modes."""
        d1 = self.geometry.d1
        full = ModeSet(self.geometry, self.truncation)
        rhs = np.zeros(full.dim, complex)
        for c in range(d1):
            rhs -= full.wavenumbers(c) * full.vector_from_field(f.component(c))
        if not self.decoupled:
            return rhs[self.keep][:, None]
        # rows: periodic modes, columns: torus modes
        return rhs.reshape(self.modes.dim, -1)[self.keep]

    def solve(self, f: TrigField) -> TrigField:
        rhs = self._rhs(f)
        sol = sla.lu_solve(self.lu, rhs)
        scale = max(np.linalg.norm(rhs), 1e-300)
        resid = np.linalg.norm(self.matrix @ sol - rhs) / scale
        if not np.isfinite(resid) or (np.linalg.norm(rhs) > 0 and resid > RESIDUAL_TOL):
            raise CellSolveError(f"cell solve residual {resid:.3e} exceeds {RESIDUAL_TOL:g}")
        full = np.zeros((self.modes.dim, sol.shape[1]), complex)
        full[self.keep] = sol
        shape = tuple(2 * t + 1 for t in self.truncation)
        return TrigField(self.geometry, full.reshape(shape))


def periodic_block(A: TrigField) -> TrigField:
    d1 = A.geometry.d1
    return TrigField(A.geometry, A.coef[:d1, :d1])


def solve_aux(problem: CellProblem) -> TrigField:
    return CellOperator(problem.A11, problem.truncation).solve(problem.f)


def periodic_gradient(u: TrigField) -> TrigField:
    """The d-vector (D1 u, 0): derivatives along periodic axes, zero torus components."""
    g = u.geometry
    comps = [u.deriv(c) for c in range(g.d1)] + [TrigField.zeros(g)] * g.d2
    return TrigField.stack(comps)


@dataclass(frozen=True, eq=False)
class CellSolution:
    """Solutions N (row of d scalar fields, stored as a d-vector field) and M.

    ``D1N[c, j]`` is the derivative of ``N_j`` along periodic axis c (zero rows for torus
    axes), ``D2N[t, j]`` the derivative along torus axis t.
    """

    N: TrigField
    M: TrigField
    D1N: TrigField
    D1M: TrigField
    truncation: tuple[int, ...]
    D2N: list[TrigField] = field(default_factory=list)
    D2M: list[TrigField] = field(default_factory=list)
    derivative_consistency: float = 0.0

    def mixed_N(self, t: int) -> TrigField:
        """Periodic gradient of the torus derivative D2_t N."""
        return TrigField.stack([[self.D2N[t].component(j).deriv(c) if c < self.N.geometry.d1
                                 else TrigField.zeros(self.N.geometry)
                                 for j in range(self.N.shape[0])] for c in range(self.N.geometry.d)])

    def is_zero(self) -> bool:
        return self.N.is_zero() and self.M.is_zero()


def _columns(coeffs: CoefficientSet) -> list[TrigField]:
    d1 = coeffs.geometry.d1
    return [TrigField(coeffs.geometry, coeffs.A.coef[:d1, j]) for j in range(coeffs.geometry.d)]


def solve_N(coeffs: CoefficientSet, truncation: tuple[int, ...],
            operator: CellOperator | None = None) -> tuple[TrigField, TrigField]:
    """Row field N (as a d-vector) and its periodic gradient matrix D1N."""
    op = operator or CellOperator(periodic_block(coeffs.A), truncation)
    cols = [op.solve(f) for f in _columns(coeffs)]
    N = TrigField.stack(cols)
    D1N = TrigField.stack([[periodic_gradient(u).component(c) for u in cols]
                           for c in range(coeffs.geometry.d)])
    return N, D1N


def solve_M(coeffs: CoefficientSet, truncation: tuple[int, ...],
            operator: CellOperator | None = None) -> tuple[TrigField, TrigField]:
    op = operator or CellOperator(periodic_block(coeffs.A), truncation)
    d1 = coeffs.geometry.d1
    M = op.solve(TrigField(coeffs.geometry, coeffs.a2.coef[:d1]))
    return M, periodic_gradient(M)


def solve_cell(coeffs: CoefficientSet, truncation: tuple[int, ...],
               derivatives: bool = True) -> CellSolution:
    op = CellOperator(periodic_block(coeffs.A), truncation)
    N, D1N = solve_N(coeffs, truncation, op)
    M, D1M = solve_M(coeffs, truncation, op)
    sol = CellSolution(N, M, D1N, D1M, tuple(truncation))
    if derivatives:
        sol = derivative_fields(sol, coeffs, op)
    return sol


def derivative_fields(sol: CellSolution, coeffs: CoefficientSet,
                      operator: CellOperator | None = None) -> CellSolution:
    """Torus derivatives of N and M from the differentiated cell problems.

    Differentiating ``D1^*(A11 D1 u + f) = 0`` along a torus axis gives
    ``D1^*(A11 D1 (D2 u) + (D2 A11) D1 u + D2 f) = 0``.  The solved derivatives are
    compared against term-by-term differentiation of ``u``; the largest relative
    discrepancy is stored in ``derivative_consistency``.
    """
    g = coeffs.geometry
    d1 = g.d1
    op = operator or CellOperator(periodic_block(coeffs.A), sol.truncation)
    A11 = periodic_block(coeffs.A)
    rhs_fields = _columns(coeffs) + [TrigField(g, coeffs.a2.coef[:d1])]
    solutions = [sol.N.component(j) for j in range(g.d)] + [sol.M]
    worst = 0.0
    D2N, D2M = [], []
    for t in range(g.d2):
        axis = d1 + t
        dA = A11.deriv(axis)
        solved = []
        for u, f in zip(solutions, rhs_fields):
            grad = TrigField(g, periodic_gradient(u).coef[:d1])
            f_t = matmul(dA, grad) + f.deriv(axis)
            v = op.solve(f_t)
            spectral = u.deriv(axis)
            scale = max(float(np.max(np.abs(spectral.coef), initial=0.0)),
                        float(np.max(np.abs(u.coef), initial=0.0)), 1e-300)
            worst = max(worst, v.max_abs_difference(spectral) / scale)
            solved.append(v)
        D2N.append(TrigField.stack(solved[:-1]))
        D2M.append(solved[-1])
    return CellSolution(sol.N, sol.M, sol.D1N, sol.D1M, sol.truncation, D2N, D2M, worst)
