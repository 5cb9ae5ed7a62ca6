"""Fiber error operators of the approximation theorems and the uniform fiber bounds."""

from __future__ import annotations

import numpy as np

from .fiber import FiberSet
from .norms import LinearMap, diagonal_stack, operator_norm

THEOREM_TAGS = ("T1_resolvent", "T1_D2", "T2_D1corr", "T3_full")


def resolvent_map(fs: FiberSet) -> LinearMap:
    n = fs.basis.dim
    return LinearMap(n, n, lambda X: fs.A_solve(X), lambda Y: fs.A_solve(Y, adjoint=True))


def effective_resolvent_map(fs: FiberSet) -> LinearMap:
    n = fs.basis.dim
    return LinearMap(n, n, lambda X: fs.A0_solve(X), lambda Y: fs.A0_solve(Y, adjoint=True))


def _column_map(fs: FiberSet, cols: np.ndarray) -> LinearMap:
    """The operator X -> cols @ X[P1], i.e. cols embedded as the y1-constant columns."""
    n = fs.basis.dim
    P1 = fs.basis.P1
    cols_h = np.conj(cols).T

    def fwd(X):
        return cols @ X[P1]

    def adj(Y):
        out = np.zeros((n, Y.shape[1]), complex)
        out[P1] = cols_h @ Y
        return out

    return LinearMap(n, n, fwd, adj)


def corrector_map(fs: FiberSet) -> LinearMap:
    return _column_map(fs, fs.K_cols)


def _rows_P1(fs: FiberSet, block: np.ndarray) -> np.ndarray:
    out = np.zeros((fs.basis.dim, block.shape[1]), complex)
    out[fs.basis.P1] = block
    return out


def error_map(tag: str, fs: FiberSet) -> LinearMap:
    """The fiber operator whose norm is the error for the given theorem tag."""
    diff = resolvent_map(fs) - effective_resolvent_map(fs)
    if tag == "T1_resolvent":
        return diff
    if tag == "T1_D2":
        if not fs.sym.torus:
            raise ValueError("T1_D2 needs at least one torus axis")
        return diagonal_stack(fs.sym.torus) @ diff
    if tag == "T2_D1corr":
        return diagonal_stack(fs.sym.shifted) @ (diff - corrector_map(fs))
    if tag == "T3_full":
        Q = fs.K_cols - _rows_P1(fs, fs.L_block)
        Qp = fs.K_plus_cols - _rows_P1(fs, fs.L_plus_block)
        # (K - L) P1 + P1 (K+ - L+)^*
        second = _column_map(fs, Q) + _column_map(fs, Qp).H
        return diff - second
    raise KeyError(f"unknown theorem tag {tag!r}")


def fiber_error(tag: str, fs: FiberSet, seed: int = 0) -> float:
    return operator_norm(error_map(tag, fs), seed)


def fiber_errors(fs: FiberSet, seed: int = 0, tags=THEOREM_TAGS) -> dict[str, float]:
    return {tag: fiber_error(tag, fs, seed) for tag in tags}


def uniform_bounds(fs: FiberSet, seed: int = 0) -> dict[str, float]:
    """Scaled fiber norms that the resolvent and corrector estimates keep uniformly bounded."""
    tau = fs.tau.tau_norm
    R = resolvent_map(fs)
    D = diagonal_stack(fs.sym.D)
    D1 = diagonal_stack(fs.sym.plain)
    K = corrector_map(fs)
    out = {
        "tau2_resolvent": tau**2 * operator_norm(R, seed),
        "tau_D_resolvent": tau * operator_norm(D @ R, seed),
        "D_resolvent_D": operator_norm(D @ R @ D.H, seed),
        "tau_D1_K": tau * operator_norm(D1 @ K, seed),
    }
    if fs.sym.torus:
        DD2 = diagonal_stack([s * t for s in fs.sym.D for t in fs.sym.torus])
        D1D2 = diagonal_stack([s * t for s in fs.sym.plain for t in fs.sym.torus])
        out["D_D2_resolvent"] = operator_norm(DD2 @ R, seed)
        out["D1_D2_K"] = operator_norm(D1D2 @ K, seed)
    return out
