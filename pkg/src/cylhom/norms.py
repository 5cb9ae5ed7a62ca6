"""Matrix-free linear maps and their spectral norms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

DENSE_NORM_LIMIT = 2000
BLOCK_SIZE = 8
MAX_ITERATIONS = 100
ITERATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear map C^n_in -> C^n_out given by its action on columns and that of its adjoint."""

    n_in: int
    n_out: int
    matmat: Callable[[np.ndarray], np.ndarray]
    rmatmat: Callable[[np.ndarray], np.ndarray]

    @property
    def H(self) -> LinearMap:
        return LinearMap(self.n_out, self.n_in, self.rmatmat, self.matmat)

    def __matmul__(self, other: LinearMap) -> LinearMap:
        if other.n_out != self.n_in:
            raise ValueError("dimension mismatch in composition")
        return LinearMap(other.n_in, self.n_out,
                         lambda X: self.matmat(other.matmat(X)),
                         lambda Y: other.rmatmat(self.rmatmat(Y)))

    def __add__(self, other: LinearMap) -> LinearMap:
        if (self.n_in, self.n_out) != (other.n_in, other.n_out):
            raise ValueError("dimension mismatch in sum")
        return LinearMap(self.n_in, self.n_out,
                         lambda X: self.matmat(X) + other.matmat(X),
                         lambda Y: self.rmatmat(Y) + other.rmatmat(Y))

    def __neg__(self) -> LinearMap:
        return LinearMap(self.n_in, self.n_out, lambda X: -self.matmat(X),
                         lambda Y: -self.rmatmat(Y))

    def __sub__(self, other: LinearMap) -> LinearMap:
        return self + (-other)

    def dense(self) -> np.ndarray:
        return self.matmat(np.eye(self.n_in, dtype=complex))


def from_matrix(M: np.ndarray) -> LinearMap:
    M = np.asarray(M)
    MH = np.conj(M).T
    return LinearMap(M.shape[1], M.shape[0], lambda X: M @ X, lambda Y: MH @ Y)


def diagonal_stack(vectors: list[np.ndarray]) -> LinearMap:
    """u -> (v_1 u, ..., v_r u) stacked vertically, for diagonal multipliers v_i."""
    n = vectors[0].shape[0]
    V = np.stack(vectors)

    def fwd(X):
        return (V[:, :, None] * X[None]).reshape(len(vectors) * n, X.shape[1])

    def adj(Y):
        return np.einsum("rn,rnk->nk", np.conj(V), Y.reshape(len(vectors), n, Y.shape[1]))

    return LinearMap(n, len(vectors) * n, fwd, adj)


def _dense_norm(op: LinearMap) -> float:
    M = op.dense()
    if M.size == 0:
        return 0.0
    return float(sla.svdvals(M)[0])


def _iterative_norm(op: LinearMap, seed: int) -> float:
    """Block Golub-Kahan (Krylov) iteration with full reorthogonalisation.

    The estimate ||K^* op|| over the growing orthonormal Krylov basis K is a monotone
    lower bound for ||op|| and converges much faster than plain subspace iteration
    when the top singular values are clustered.
    """
    rng = np.random.default_rng(seed)
    b = min(BLOCK_SIZE, op.n_in)
    X = rng.standard_normal((op.n_in, b)) + 1j * rng.standard_normal((op.n_in, b))
    Q, _ = np.linalg.qr(op.matmat(X))
    basis = [Q]
    images = []
    estimate = 0.0
    for _ in range(MAX_ITERATIONS):
        images.append(op.rmatmat(basis[-1]))
        new = float(sla.svdvals(np.hstack(images))[0])
        if new == 0.0 or abs(new - estimate) <= ITERATION_TOL * new:
            return new
        estimate = new
        Y = op.matmat(images[-1])
        K = np.hstack(basis)
        for _ in range(2):
            Y = Y - K @ (np.conj(K).T @ Y)
        if K.shape[1] + b > op.n_out or np.linalg.norm(Y) <= 1e-14 * new:
            break
        Q, _ = np.linalg.qr(Y)
        basis.append(Q)
    return estimate


def operator_norm(op: LinearMap, seed: int = 0, dense_limit: int = DENSE_NORM_LIMIT) -> float:
    """Spectral norm: dense SVD below ``dense_limit`` input dimension, else block Krylov iteration."""
    if op.n_in == 0 or op.n_out == 0:
        return 0.0
    if op.n_in < dense_limit:
        return _dense_norm(op)
    return _iterative_norm(op, seed)
