"""Independent reference computations used by the tests.

Nothing here reuses the Toeplitz/scatter assembly of the package: fiber matrices are
built by exact grid quadrature of the sesquilinear form, and the resolvent identities
are evaluated with dense inverses.
"""

from __future__ import annotations

import numpy as np

from cylhom.coefficients import CoefficientSet


def grid(geometry, sizes):
    axes = [np.arange(s) * L / s for s, L in zip(sizes, geometry.axis_lengths)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def plane_waves(geometry, modes, points):
    """Orthonormal plane waves e_p(x) = |Omega|^{-1/2} exp(2 pi i <p, x/L>), rows = modes."""
    L = np.asarray(geometry.axis_lengths)
    phase = 2j * np.pi * (modes / L) @ points.T
    return np.exp(phase) / np.sqrt(geometry.volume)


def quadrature_form_matrix(coeffs: CoefficientSet, modes: np.ndarray, k, eps: float,
                           mu: complex) -> np.ndarray:
    """G[i, j] = a_mu(tau)[e_j, e_i] by exact quadrature on a fine uniform grid."""
    g = coeffs.geometry
    d1 = g.d1
    span = 2 * np.max(np.abs(modes), axis=0)
    bw = np.asarray(coeffs.bandwidth)
    sizes = tuple(int(s + b + 2) for s, b in zip(span, bw))
    pts = grid(g, sizes)
    E = plane_waves(g, modes, pts)                       # (dim, npts)
    L = np.asarray(g.axis_lengths)
    sym = 2 * np.pi * modes / L
    sym[:, :d1] += np.asarray(k)
    sym[:, d1:] *= eps
    DE = sym.T[:, :, None] * E[None]                     # (d, dim, npts)
    A = coeffs.A.evaluate(pts)
    a1 = coeffs.a1.evaluate(pts)
    a2 = coeffs.a2.evaluate(pts)
    q = coeffs.q.evaluate(pts)
    w = g.volume / pts.shape[0]
    G = np.zeros((len(modes), len(modes)), complex)
    d = g.d
    for c in range(d):
        for c2 in range(d):
            G += w * (np.conj(DE[c]) * A[c, c2]) @ DE[c2].T
    for c in range(d):
        G += eps * w * (np.conj(E) * np.conj(a1[c])) @ DE[c].T
        G += eps * w * (np.conj(DE[c]) * a2[c]) @ E.T
    G += eps**2 * w * (np.conj(E) * q) @ E.T
    G -= eps**2 * mu * w * np.conj(E) @ E.T
    return G


def harmonic_cell_gradient(A11_values: np.ndarray) -> np.ndarray:
    """1D closed form: D1 N = h / A11 - 1 with h the harmonic mean of A11."""
    h = 1.0 / np.mean(1.0 / A11_values)
    return h / A11_values - 1.0


def dense_identity_residuals(fs) -> tuple[float, float]:
    """Resolvent identities with every operator formed densely and inverted directly."""
    n = fs.basis.dim
    P1 = fs.basis.P1
    Ainv = np.linalg.inv(fs.A)
    Aplus_inv = np.linalg.inv(fs.A_plus)
    A0inv = np.linalg.inv(fs.A0)
    A0plus_inv = np.linalg.inv(fs.A0_plus)
    Pm = fs.basis.projector()
    Pperp = np.eye(n) - Pm
    K, Kp = fs.K, fs.K_plus
    inner = fs.S @ A0inv @ Pm + fs.T @ K
    mu_bar = np.conj(fs.mu)

    lhs_U = Ainv @ Pm - A0inv @ Pm - K
    middle = fs.S_plus + fs.T_plus - fs.eps**2 * mu_bar * np.eye(n)
    rhs_U = -Ainv @ Pperp @ inner - Ainv @ np.conj(middle).T @ K

    L = np.zeros((n, n), complex)
    L[P1] = (np.conj(Kp).T @ inner)[P1]
    inner_plus = fs.S_plus @ A0plus_inv @ Pm + fs.T_plus @ Kp
    Lp = np.zeros((n, n), complex)
    Lp[P1] = (np.conj(K).T @ inner_plus)[P1]
    lhs_V = lhs_U + L @ Pm + Pm @ np.conj(Lp).T
    first = np.conj(Aplus_inv - Kp).T @ Pperp @ inner
    second = np.conj(Aplus_inv - A0plus_inv @ Pm - Kp).T @ np.conj(fs.S_plus + fs.T_plus).T @ K
    third = np.conj(fs.S_plus @ Kp - fs.eps**2 * mu_bar * Aplus_inv).T @ K
    rhs_V = -first - second - third

    ref = np.linalg.norm(Ainv @ Pm, 2)

    def rel(a, b):
        scale = max(np.linalg.norm(a, 2), np.linalg.norm(b, 2), ref)
        return 0.0 if scale == 0 else float(np.linalg.norm(a - b, 2) / scale)

    return rel(lhs_U, rhs_U), rel(lhs_V, rhs_V)
