"""Fiber operators on the fundamental domain for a quasimomentum tau = (k, eps).

Functions on the fundamental domain are represented by coefficient vectors in the
orthonormal plane-wave basis of a :class:`FiberBasis`.  In that basis

* the periodic derivative D1 acts as multiplication by 2*pi*n/period,
* the shifted derivative D1(tau) by 2*pi*n/period + k,
* the scaled torus derivative D2(tau) by eps*2*pi*m/L,
* multiplication by a coefficient field f by the matrix with entries f_hat(p_i - p_j).

Every operator here is a sum of "terms" ``diag(left) T[f] diag(right)``; dense matrices
are scattered diagonal by diagonal and block products are applied matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .cell import CellSolution, solve_cell
from .coefficients import CoefficientSet, CoercivityData, coercivity_constants, sector_contains
from .effective import EffectiveCoefficients, homogenize
from .galerkin import ModeSet
from .geometry import DomainGeometry
from .trigfield import TrigField

DENSE_NORM_LIMIT = 2000
RESOLVENT_TOL = 1e-10


class FiberError(RuntimeError):
    pass


class SectorError(FiberError):
    """The spectral parameter lies inside the sector where invertibility is not guaranteed."""


@dataclass(frozen=True)
class Quasimomentum:
    k: tuple[float, ...]
    eps: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", tuple(float(v) for v in np.atleast_1d(self.k)))
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")

    @property
    def tau_norm(self) -> float:
        return float(np.sqrt(np.dot(self.k, self.k) + self.eps**2))

    def in_zone(self, geometry: DomainGeometry, tol: float = 1e-12) -> bool:
        half = np.pi / np.asarray(geometry.period)
        return bool(np.all(np.abs(self.k) <= half * (1 + tol)))


class FiberBasis(ModeSet):
    """Modes |n| <= N1 in every periodic axis and |m| <= N2 in every torus axis."""

    def __init__(self, geometry: DomainGeometry, N1: int, N2: int):
        super().__init__(geometry, (N1,) * geometry.d1 + (N2,) * geometry.d2)
        self.N1, self.N2 = int(N1), int(N2)
        self._pairs: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def P1(self) -> slice:
        return self.zero_block

    @property
    def nblocks(self) -> int:
        return self.dim // self.block_size

    def shift_pairs(self, shift: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs (i, j) with p_i - p_j = shift."""
        if shift not in self._pairs:
            target = self.modes + np.asarray(shift)
            ok = np.all(np.abs(target) <= np.asarray(self.half_widths), axis=1)
            cols = np.flatnonzero(ok)
            rows = np.ravel_multi_index(tuple((target[ok] + np.asarray(self.half_widths)).T),
                                        self.grid_shape)
            self._pairs[shift] = (rows.astype(np.int64), cols)
        return self._pairs[shift]

    def projector(self) -> np.ndarray:
        P = np.zeros((self.dim, self.dim))
        idx = np.arange(self.dim)[self.P1]
        P[idx, idx] = 1.0
        return P


@dataclass(frozen=True, eq=False)
class Symbols:
    """Diagonal symbol vectors over the basis for a given tau."""

    plain: list[np.ndarray]      # D1: 2*pi*n/period per periodic axis
    shifted: list[np.ndarray]    # D1(tau) = D1 + k
    torus: list[np.ndarray]      # D2(tau) = eps*2*pi*m/L per torus axis
    constant: list[np.ndarray]   # k as constant vectors per periodic axis

    @property
    def D(self) -> list[np.ndarray]:
        """Components of D(tau) = (D1(tau), D2(tau))."""
        return self.shifted + self.torus

    @property
    def outer(self) -> list[np.ndarray]:
        """Components of k + D2(tau)."""
        return self.constant + self.torus

    @property
    def D1_padded(self) -> list[np.ndarray | None]:
        return list(self.plain) + [None] * len(self.torus)


def symbols(basis: FiberBasis, tau: Quasimomentum) -> Symbols:
    d1 = basis.geometry.d1
    plain = [basis.wavenumbers(c) for c in range(d1)]
    shifted = [plain[c] + tau.k[c] for c in range(d1)]
    torus = [tau.eps * basis.wavenumbers(d1 + t) for t in range(basis.geometry.d2)]
    constant = [np.full(basis.dim, tau.k[c]) for c in range(d1)]
    return Symbols(plain, shifted, torus, constant)


# operator terms -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Term:
    field: TrigField
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    scale: complex = 1.0


def form_terms(coeffs: CoefficientSet, left: list, right: list, eps: float,
               first_left: list | None = None, first_right: list | None = None,
               zeroth: bool = True) -> list[Term]:
    """Terms of sum_cc' left_c A_cc' right_c' + eps a1^* right1 + eps left1 a2 + eps^2 q.

    ``None`` entries in the symbol lists drop the corresponding component; a ``None``
    list drops the whole first-order term.
    """
    d = coeffs.geometry.d
    terms = []
    for c in range(d):
        for c2 in range(d):
            if left[c] is None or right[c2] is None:
                continue
            f = coeffs.A.component(c, c2)
            if not f.is_zero():
                terms.append(Term(f, left[c], right[c2]))
    if first_right is not None:
        a1c = coeffs.a1.conj()
        for c in range(d):
            f = a1c.component(c)
            if first_right[c] is not None and not f.is_zero():
                terms.append(Term(f, None, first_right[c], eps))
    if first_left is not None:
        for c in range(d):
            f = coeffs.a2.component(c)
            if first_left[c] is not None and not f.is_zero():
                terms.append(Term(f, first_left[c], None, eps))
    if zeroth and not coeffs.q.is_zero():
        terms.append(Term(coeffs.q, None, None, eps**2))
    return terms


def assemble(basis: FiberBasis, terms: list[Term], diagonal: complex = 0.0) -> np.ndarray:
    """Dense matrix of a sum of terms plus a multiple of the identity."""
    out = np.zeros((basis.dim, basis.dim), complex)
    if diagonal:
        out[np.diag_indices(basis.dim)] += diagonal
    for term in terms:
        f = term.field
        bw = np.asarray(f.bandwidth)
        for pos in np.argwhere(f.coef != 0):
            shift = tuple(int(v) for v in pos - bw)
            if any(abs(s) > 2 * h for s, h in zip(shift, basis.half_widths)):
                continue
            rows, cols = basis.shift_pairs(shift)
            val = term.scale * f.coef[tuple(pos)] * np.ones(rows.size, complex)
            if term.left is not None:
                val = val * term.left[rows]
            if term.right is not None:
                val = val * term.right[cols]
            out[rows, cols] += val
    return out


def apply_terms(basis: FiberBasis, terms: list[Term], X: np.ndarray,
                diagonal: complex = 0.0) -> np.ndarray:
    """Apply a sum of terms to the columns of ``X`` without forming the matrix."""
    out = diagonal * X if diagonal else np.zeros(X.shape, complex)
    for term in terms:
        Y = X if term.right is None else term.right[:, None] * X
        Z = basis.apply_multiplication(term.field, Y)
        if term.left is not None:
            Z = term.left[:, None] * Z
        out = out + term.scale * Z
    return out


# engine ----------------------------------------------------------------------------------------


class FiberEngine:
    """Everything independent of tau: basis, cell solutions, effective coefficients.

    Cell problems are solved at the basis truncation, so that the cell equations hold
    exactly in the Galerkin space used for the fiber operators.
    """

    def __init__(self, coeffs: CoefficientSet, basis: FiberBasis, mu: complex | None = None,
                 coercivity: CoercivityData | None = None, cell: CellSolution | None = None,
                 effective: EffectiveCoefficients | None = None, check_sector: bool = True):
        self.coeffs = coeffs
        self.basis = basis
        self.coercivity = coercivity or coercivity_constants(coeffs)
        self.mu = complex(self.coercivity.mu if mu is None else mu)
        if cell is None or effective is None:
            cell, effective = homogenize(coeffs, basis.half_widths, certify=False)
        self.cell = cell
        self.effective = effective
        self.eff_coeffs = effective.as_coefficients()
        if check_sector:
            data = self.coercivity
            if data.C_flat0 is None:
                data = data.with_effective_bound(effective.bound_constant())
                self.coercivity = data
            if sector_contains(data, self.mu, "S"):
                raise SectorError(f"spectral parameter {self.mu} lies inside the sector S")
        self._adjoint: FiberEngine | None = None

    @property
    def adjoint(self) -> FiberEngine:
        """Engine for the formal adjoint problem, built from the adjoint coefficients."""
        if self._adjoint is None:
            adj_coeffs = self.coeffs.adjoint()
            cell, eff = homogenize(adj_coeffs, self.basis.half_widths, certify=False)
            adj = FiberEngine(adj_coeffs, self.basis, np.conj(self.mu), self.coercivity, cell, eff,
                              check_sector=False)
            adj._adjoint = self
            self._adjoint = adj
        return self._adjoint

    def fiber(self, tau: Quasimomentum) -> FiberSet:
        return FiberSet(self, tau)

    def symbol_L(self, k) -> np.ndarray:
        """Block of L(tau) on y1-constant functions at tau = (k, 1), for any real k."""
        return FiberSet(self, Quasimomentum(tuple(np.atleast_1d(k)), 1.0)).L_block


@dataclass(frozen=True, eq=False)
class FiberOperator:
    matrix: np.ndarray
    role: str
    tau: Quasimomentum
    mu: complex


class FiberSet:
    """Lazily assembled fiber operators at one tau."""

    def __init__(self, engine: FiberEngine, tau: Quasimomentum):
        self.engine = engine
        self.tau = tau
        self.basis = engine.basis
        self.mu = engine.mu
        self.sym = symbols(self.basis, tau)
        self.eps = tau.eps

    # term lists ----------------------------------------------------------------

    def _A_terms(self, coeffs: CoefficientSet) -> list[Term]:
        D = self.sym.D
        return form_terms(coeffs, D, D, self.eps, D, D)

    @property
    def shift(self) -> complex:
        return -self.eps**2 * self.mu

    def S_terms(self, coeffs: CoefficientSet | None = None) -> list[Term]:
        coeffs = coeffs or self.engine.coeffs
        r = self.sym.outer
        return form_terms(coeffs, r, r, self.eps, r, r)

    def T_terms(self, coeffs: CoefficientSet | None = None) -> list[Term]:
        coeffs = coeffs or self.engine.coeffs
        r = self.sym.outer
        xi = self.sym.D1_padded
        return form_terms(coeffs, r, xi, self.eps, None, xi, zeroth=False)

    def D1AD1_terms(self) -> list[Term]:
        xi = self.sym.D1_padded
        return form_terms(self.engine.coeffs, xi, xi, self.eps, None, None, zeroth=False)

    # dense operators -------------------------------------------------------------

    @cached_property
    def A(self) -> np.ndarray:
        return assemble(self.basis, self._A_terms(self.engine.coeffs), self.shift)

    @cached_property
    def A_plus(self) -> np.ndarray:
        adj = self.engine.adjoint
        return assemble(self.basis, self._A_terms(adj.coeffs), -self.eps**2 * adj.mu)

    @cached_property
    def A0(self) -> np.ndarray:
        return assemble(self.basis, self._A_terms(self.engine.eff_coeffs), self.shift)

    @cached_property
    def A0_plus(self) -> np.ndarray:
        adj = self.engine.adjoint
        return assemble(self.basis, self._A_terms(adj.eff_coeffs), -self.eps**2 * adj.mu)

    @cached_property
    def S(self) -> np.ndarray:
        return assemble(self.basis, self.S_terms())

    @cached_property
    def T(self) -> np.ndarray:
        return assemble(self.basis, self.T_terms())

    @cached_property
    def S_plus(self) -> np.ndarray:
        return assemble(self.basis, self.S_terms(self.engine.adjoint.coeffs))

    @cached_property
    def T_plus(self) -> np.ndarray:
        return assemble(self.basis, self.T_terms(self.engine.adjoint.coeffs))

    @cached_property
    def D1AD1(self) -> np.ndarray:
        return assemble(self.basis, self.D1AD1_terms())

    @cached_property
    def A_lu(self):
        try:
            lu = sla.lu_factor(self.A)
        except (ValueError, sla.LinAlgError) as exc:
            raise FiberError(f"fiber matrix factorisation failed at {self.tau}: {exc}") from exc
        if np.min(np.abs(np.diag(lu[0]))) == 0:
            raise FiberError(f"singular fiber matrix at {self.tau}")
        return lu

    # effective operator: block diagonal in the periodic modes ----------------------

    def _blocks(self, matrix_terms: list[Term], shift: complex) -> np.ndarray:
        dense = assemble(self.basis, matrix_terms, shift)
        nb, bs = self.basis.nblocks, self.basis.block_size
        return np.stack([dense[i * bs:(i + 1) * bs, i * bs:(i + 1) * bs] for i in range(nb)])

    @cached_property
    def A0_blocks(self) -> np.ndarray:
        return self._blocks(self._A_terms(self.engine.eff_coeffs), self.shift)

    @cached_property
    def A0_inv_blocks(self) -> np.ndarray:
        return np.linalg.inv(self.A0_blocks)

    @cached_property
    def A0_plus_inv_blocks(self) -> np.ndarray:
        adj = self.engine.adjoint
        blocks = self._blocks(self._A_terms(adj.eff_coeffs), -self.eps**2 * adj.mu)
        return np.linalg.inv(blocks)

    def _zero_index(self) -> int:
        return self.basis.P1.start // self.basis.block_size

    def A0_solve(self, X: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """(A0)^{-1} X, or (A0)^{-H} X when ``adjoint``."""
        nb, bs = self.basis.nblocks, self.basis.block_size
        Xb = X.reshape(nb, bs, -1)
        inv = self.A0_inv_blocks
        if adjoint:
            inv = np.conj(np.swapaxes(inv, 1, 2))
        return np.einsum("bij,bjr->bir", inv, Xb).reshape(X.shape)

    def A_solve(self, X: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return sla.lu_solve(self.A_lu, X, trans=2 if adjoint else 0)

    @cached_property
    def A_plus_lu(self):
        return sla.lu_factor(self.A_plus)

    def A_plus_solve(self, X: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return sla.lu_solve(self.A_plus_lu, X, trans=2 if adjoint else 0)

    # correctors ------------------------------------------------------------------------

    def _K_columns(self, engine: FiberEngine, inv_block: np.ndarray) -> np.ndarray:
        """Columns of (N D(tau) + eps M)(A0)^{-1} on the y1-constant block."""
        basis = self.basis
        P1 = basis.P1
        W = np.zeros((basis.dim, basis.block_size), complex)
        W[P1] = inv_block
        out = np.zeros_like(W)
        cell = engine.cell
        for j, s in enumerate(self.sym.D):
            Nj = cell.N.component(j)
            if not Nj.is_zero():
                out += basis.apply_multiplication(Nj, s[:, None] * W)
        if not cell.M.is_zero():
            out += self.eps * basis.apply_multiplication(cell.M, W)
        return out

    @cached_property
    def K_cols(self) -> np.ndarray:
        return self._K_columns(self.engine, self.A0_inv_blocks[self._zero_index()])

    @cached_property
    def K_plus_cols(self) -> np.ndarray:
        return self._K_columns(self.engine.adjoint, self.A0_plus_inv_blocks[self._zero_index()])

    def _L_block(self, forward: bool) -> np.ndarray:
        engine = self.engine if forward else self.engine.adjoint
        K = self.K_cols if forward else self.K_plus_cols
        K_other = self.K_plus_cols if forward else self.K_cols
        inv = (self.A0_inv_blocks if forward else self.A0_plus_inv_blocks)[self._zero_index()]
        W = np.zeros_like(K)
        W[self.basis.P1] = inv
        Y = apply_terms(self.basis, self.S_terms(engine.coeffs), W)
        Y = Y + apply_terms(self.basis, self.T_terms(engine.coeffs), K)
        return np.conj(K_other).T @ Y

    @cached_property
    def L_block(self) -> np.ndarray:
        """L(tau) restricted to and compressed onto the y1-constant block."""
        return self._L_block(True)

    @cached_property
    def L_plus_block(self) -> np.ndarray:
        return self._L_block(False)

    def embed_columns(self, cols: np.ndarray) -> np.ndarray:
        out = np.zeros((self.basis.dim, self.basis.dim), complex)
        out[:, self.basis.P1] = cols
        return out

    def embed_block(self, block: np.ndarray) -> np.ndarray:
        out = np.zeros((self.basis.dim, self.basis.dim), complex)
        out[self.basis.P1, self.basis.P1] = block
        return out

    @cached_property
    def K(self) -> np.ndarray:
        return self.embed_columns(self.K_cols)

    @cached_property
    def K_plus(self) -> np.ndarray:
        return self.embed_columns(self.K_plus_cols)

    @cached_property
    def L(self) -> np.ndarray:
        """Full L(tau) = (K+)^*(S (A0)^{-1} + T K); its range lies in the y1-constants."""
        A0inv = np.linalg.inv(self.A0)
        Y = self.S @ A0inv + self.T @ self.K
        out = np.zeros((self.basis.dim, self.basis.dim), complex)
        out[self.basis.P1] = np.conj(self.K_plus_cols).T @ Y
        return out

    @cached_property
    def L_plus(self) -> np.ndarray:
        A0inv = np.linalg.inv(self.A0_plus)
        Y = self.S_plus @ A0inv + self.T_plus @ self.K_plus
        out = np.zeros((self.basis.dim, self.basis.dim), complex)
        out[self.basis.P1] = np.conj(self.K_cols).T @ Y
        return out

    def operator(self, role: str) -> FiberOperator:
        table = {
            "A_mu": lambda: self.A, "A0_mu": lambda: self.A0, "S": lambda: self.S,
            "T": lambda: self.T, "K": lambda: self.K, "L": lambda: self.L,
            "P1": lambda: self.basis.projector().astype(complex),
            "P2": lambda: np.eye(self.basis.dim) - self.basis.projector(),
            "A_mu+": lambda: self.A_plus, "A0_mu+": lambda: self.A0_plus,
            "S+": lambda: self.S_plus, "T+": lambda: self.T_plus,
            "K+": lambda: self.K_plus, "L+": lambda: self.L_plus,
        }
        if role not in table:
            raise KeyError(f"unknown fiber operator role {role!r}")
        return FiberOperator(table[role](), role, self.tau, self.mu)

    # resolvent -----------------------------------------------------------------------------

    def resolvent(self, rhs: np.ndarray, effective: bool = False) -> np.ndarray:
        """Solve A_mu(tau) u = rhs (or the effective operator) with a residual check."""
        rhs = np.asarray(rhs, dtype=complex)
        if effective:
            sol = self.A0_solve(rhs.reshape(self.basis.dim, -1)).reshape(rhs.shape)
            matrix = self.A0
        else:
            sol = self.A_solve(rhs)
            matrix = self.A
        scale = np.linalg.norm(rhs)
        if scale > 0:
            resid = np.linalg.norm(matrix @ sol - rhs) / scale
            if not resid <= RESOLVENT_TOL:
                raise FiberError(f"resolvent residual {resid:.3e} at {self.tau}")
        return sol

    # diagnostics ---------------------------------------------------------------------------

    def decomposition_residual(self) -> float:
        """Relative defect of A = D1^*A D1 + S + T + (T+)^* - eps^2 mu."""
        rebuilt = self.D1AD1 + self.S + self.T + np.conj(self.T_plus).T
        rebuilt[np.diag_indices(self.basis.dim)] += self.shift
        return float(np.linalg.norm(self.A - rebuilt, 2) / np.linalg.norm(self.A, 2))

    def intertwining_residual(self) -> float:
        """Relative defect of A0 P1 = P1 (A + T (N D(tau) + eps M)) P1."""
        P1 = self.basis.P1
        Kprime = self._K_columns(self.engine, np.eye(self.basis.block_size))
        lhs = self.A0_blocks[self._zero_index()]
        rhs = self.A[P1, P1] + apply_terms(self.basis, self.T_terms(), Kprime)[P1]
        return float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(lhs, 2))

    def coercivity_margin(self, vectors: np.ndarray) -> float:
        """min over columns u of Re<A u,u> - (c_* |D(tau)u|^2 - eps^2 c_natural |u|^2)."""
        data = self.engine.coercivity
        Au = self.A @ vectors
        form = np.real(np.sum(np.conj(vectors) * Au, axis=0))
        grad = sum(np.sum(np.abs(s[:, None] * vectors) ** 2, axis=0) for s in self.sym.D)
        mass = np.sum(np.abs(vectors) ** 2, axis=0)
        return float(np.min(form - (data.c_star * grad - self.eps**2 * data.c_natural * mass)))


# resolvent identities ---------------------------------------------------------------------------


def _relative(lhs: np.ndarray, rhs: np.ndarray, reference: float = 0.0) -> float:
    # measured against the resolvent scale so that two vanishing sides do not read as O(1)
    scale = max(np.linalg.norm(lhs, 2), np.linalg.norm(rhs, 2), reference)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(lhs - rhs, 2) / scale)


def _rows_P1(fs: FiberSet, block: np.ndarray) -> np.ndarray:
    out = np.zeros((fs.basis.dim, block.shape[1]), complex)
    out[fs.basis.P1] = block
    return out


def _identity_parts(fs: FiberSet):
    basis = fs.basis
    P1 = basis.P1
    E = np.zeros((basis.dim, basis.block_size), complex)
    E[P1] = np.eye(basis.block_size)
    W0 = _rows_P1(fs, fs.A0_inv_blocks[fs._zero_index()])
    inner = apply_terms(basis, fs.S_terms(), W0) + apply_terms(basis, fs.T_terms(), fs.K_cols)
    inner_perp = inner.copy()
    inner_perp[P1] = 0.0
    adj = fs.engine.adjoint.coeffs
    plus_terms = fs.S_terms(adj) + fs.T_terms(adj)
    resolvent_cols = fs.A_solve(E)
    lhs_U = resolvent_cols - W0 - fs.K_cols
    return np.linalg.norm(resolvent_cols, 2), W0, inner_perp, plus_terms, lhs_U


def identity_residual_U(fs: FiberSet) -> float:
    """Relative operator-norm defect of the U(tau) resolvent identity.

    Both sides vanish on the complement of the y1-constants, so only those columns
    are formed.
    """
    ref, _, inner_perp, plus_terms, lhs = _identity_parts(fs)
    middle_h = apply_terms(fs.basis, adjoint_terms(plus_terms), fs.K_cols,
                           diagonal=-fs.eps**2 * fs.mu)
    rhs = -fs.A_solve(inner_perp) - fs.A_solve(middle_h)
    return _relative(lhs, rhs, ref)


def identity_residual_V(fs: FiberSet) -> float:
    """Relative operator-norm defect of the V(tau) resolvent identity (columns on P1)."""
    basis = fs.basis
    P1 = basis.P1
    ref, _, inner_perp, plus_terms, lhs = _identity_parts(fs)
    lhs = lhs + _rows_P1(fs, fs.L_block) + _rows_P1(fs, np.conj(fs.L_plus_block).T)
    Kp_h = np.conj(fs.K_plus_cols).T
    first = fs.A_plus_solve(inner_perp, adjoint=True) - _rows_P1(fs, Kp_h @ inner_perp)
    Z = apply_terms(basis, adjoint_terms(plus_terms), fs.K_cols)
    inv0_h = np.conj(fs.A0_plus_inv_blocks[fs._zero_index()]).T
    second = (fs.A_plus_solve(Z, adjoint=True) - _rows_P1(fs, inv0_h @ Z[P1])
              - _rows_P1(fs, Kp_h @ Z))
    SpK = apply_terms(basis, adjoint_terms(fs.S_terms(fs.engine.adjoint.coeffs)), fs.K_cols)
    third = _rows_P1(fs, Kp_h @ SpK) - fs.eps**2 * fs.mu * fs.A_plus_solve(fs.K_cols, adjoint=True)
    rhs = -first - second - third
    return _relative(lhs, rhs, ref)


def adjoint_terms(terms: list[Term]) -> list[Term]:
    """Terms of the Hilbert adjoint: diag(l) T[f] diag(r) -> diag(conj r) T[conj f] diag(conj l)."""
    out = []
    for t in terms:
        out.append(Term(t.field.conj(),
                        None if t.right is None else np.conj(t.right),
                        None if t.left is None else np.conj(t.left),
                        np.conj(t.scale)))
    return out


def adjoint_crosscheck(fs: FiberSet) -> dict[str, float]:
    """Relative differences between independently built adjoint operators and matrix adjoints."""
    def rel(a, b):
        scale = max(np.linalg.norm(a), np.linalg.norm(b))
        return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)

    return {
        "A_mu": rel(fs.A_plus, np.conj(fs.A).T),
        "A0_mu": rel(fs.A0_plus, np.conj(fs.A0).T),
        "S": rel(fs.S_plus, np.conj(fs.S).T),
        # T+ is the formal adjoint of the operator D1^*(A (k + D2(tau)) + eps a2)
        "T": rel(np.conj(fs.T_plus).T, assemble(
            fs.basis, form_terms(fs.engine.coeffs, fs.sym.D1_padded, fs.sym.outer, fs.eps,
                                 fs.sym.D1_padded, None, zeroth=False))),
    }


def build_engine(coeffs: CoefficientSet, N1: int, N2: int, mu: complex | None = None) -> FiberEngine:
    return FiberEngine(coeffs, FiberBasis(coeffs.geometry, N1, N2), mu)


__all__ = [
    "CellSolution", "FiberBasis", "FiberEngine", "FiberError", "FiberOperator", "FiberSet",
    "Quasimomentum", "SectorError", "Symbols", "Term", "adjoint_crosscheck", "apply_terms", "assemble",
    "build_engine", "form_terms", "identity_residual_U", "identity_residual_V", "solve_cell",
    "symbols",
]
