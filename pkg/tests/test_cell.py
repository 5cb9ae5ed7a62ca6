from __future__ import annotations

import numpy as np
import pytest

from cylhom.cell import (CellProblem, CellSolveError, periodic_block, solve_aux, solve_cell,
                         solve_M, solve_N)
from cylhom.coefficients import surrogate_norm
from cylhom.geometry import DomainGeometry
from cylhom.trigfield import TrigField

from fields import UNIT, coeffs, const, cos_field, matrix, sin_field, vector
from oracles import harmonic_cell_gradient

LINE = DomainGeometry(1, 0, (1.0,), ())
TRUNC = (24, 4)


def ref1_like(geometry=UNIT):
    zero = const(geometry, 0.0)
    return coeffs(matrix([[2 + cos_field(geometry, 0), zero], [zero, 1 + sin_field(geometry, 1, 0.5)]]))


def fine_points(n=257):
    x = (np.arange(n) + 0.37) / n
    return x, np.stack([x, np.full(n, 0.3)], 1)


def test_unit_matrix_with_cosine_source():
    A11 = TrigField.constant(UNIT, [[1.0]])
    f = TrigField.stack([cos_field(UNIT, 0)])
    u = solve_aux(CellProblem(A11, f, (4, 2)))
    assert u.deriv(0).allclose(cos_field(UNIT, 0, -1.0), atol=1e-13)


def test_zero_source_gives_zero():
    A11 = TrigField.stack([[2 + cos_field(UNIT, 0)]])
    u = solve_aux(CellProblem(A11, TrigField.stack([const(UNIT, 0.0)]), (6, 2)))
    assert np.max(np.abs(u.coef)) == 0.0


def test_harmonic_mean_flux():
    A11 = 2 + cos_field(UNIT, 0)
    u = solve_aux(CellProblem(TrigField.stack([[A11]]), TrigField.stack([A11]), TRUNC))
    x, pts = fine_points()
    flux = A11.evaluate(pts) * (u.deriv(0).evaluate(pts) + 1)
    assert np.allclose(flux, np.sqrt(3), atol=1e-12)


def test_ref1_closed_form():
    c = ref1_like()
    N, D1N = solve_N(c, TRUNC)
    assert N.component(1).is_zero()
    x, pts = fine_points()
    oracle = harmonic_cell_gradient(2 + np.cos(2 * np.pi * x))
    assert np.allclose(D1N.component(0, 0).evaluate(pts), np.sqrt(3) / (2 + np.cos(2 * np.pi * x)) - 1,
                       atol=1e-12)
    assert np.allclose(D1N.component(0, 0).evaluate(pts), oracle, atol=1e-12)


def test_constant_in_y1_gives_zero(constant):
    N, _ = solve_N(constant, (4, 8))
    M, _ = solve_M(constant, (4, 8))
    assert N.is_zero() and M.is_zero()


def test_offdiagonal_column_flux_is_constant():
    A11 = 2 + cos_field(UNIT, 0)
    A12 = cos_field(UNIT, 0, 0.3)
    c = coeffs(matrix([[A11, A12], [A12, const(UNIT, 2.0)]]))
    N, D1N = solve_N(c, TRUNC)
    n = 4096
    y = np.arange(n) / n
    a11 = 2 + np.cos(2 * np.pi * y)
    expected = np.mean(0.3 * np.cos(2 * np.pi * y) / a11) / np.mean(1 / a11)
    x, pts = fine_points()
    flux = A11.evaluate(pts) * D1N.component(0, 1).evaluate(pts) + A12.evaluate(pts)
    assert np.allclose(flux, expected, atol=1e-12)


def test_M_for_identity_with_cosine_drift():
    c = coeffs(TrigField.identity(UNIT), a2=vector([cos_field(UNIT, 0), const(UNIT, 0.0)]))
    M, D1M = solve_M(c, (6, 2))
    assert D1M.component(0).allclose(cos_field(UNIT, 0, -1.0), atol=1e-13)


def test_M_vanishes_without_drift(ref1):
    M, _ = solve_M(ref1, (6, 6))
    assert M.is_zero()
    c = coeffs(TrigField.identity(UNIT), a2=vector([cos_field(UNIT, 1), const(UNIT, 1.0)]))
    assert solve_M(c, (6, 2))[0].is_zero()


def test_x2_independent_coefficients_have_zero_x2_derivatives():
    A11 = 2 + cos_field(UNIT, 0)
    c = coeffs(matrix([[A11, cos_field(UNIT, 0, 0.2)], [const(UNIT, 0.1), const(UNIT, 1.0)]]))
    sol = solve_cell(c, (8, 2))
    assert all(np.max(np.abs(f.coef)) < 1e-14 for f in sol.D2N + sol.D2M)


def test_ref1_x2_derivative_of_N_vanishes(ref1):
    sol = solve_cell(ref1, (12, 4))
    assert all(np.max(np.abs(f.coef)) < 1e-14 for f in sol.D2N)


def test_differentiated_problem_matches_spectral_derivative():
    A11 = 2 + cos_field(UNIT, 0) * sin_field(UNIT, 1)
    c = coeffs(matrix([[A11, const(UNIT, 0.0)], [const(UNIT, 0.0), const(UNIT, 1.0)]]))
    sol = solve_cell(c, (16, 12))
    assert sol.derivative_consistency <= 1e-8
    spectral = sol.N.component(0).deriv(1)
    assert sol.D2N[0].component(0).max_abs_difference(spectral) <= 1e-8


def test_multiplier_bound(coupled, stress):
    for c in (coupled, stress):
        sol = solve_cell(c, (16, 16), derivatives=False)
        bound = surrogate_norm(c.A, "inverse_hermitian_part")
        for j in range(c.geometry.d):
            f = TrigField(c.geometry, c.A.coef[:1, j])
            grad = surrogate_norm(sol.D1N.component(0, j))
            assert grad <= 1.05 * c.geometry.cell_volume**0.5 * bound * surrogate_norm(f)


def test_spectral_convergence(stress):
    sols = [solve_N(stress, (t, 8))[0] for t in (4, 8, 16, 32)]
    changes = [sols[i + 1].max_abs_difference(sols[i]) for i in range(3)]
    for a, b in zip(changes[1:], changes[2:]):
        assert b <= 0.25 * a
    assert changes[1] <= 0.25 * changes[0] or changes[0] < 1e-8


def test_zero_periodic_mean(coupled):
    sol = solve_cell(coupled, (12, 12))
    for f in [sol.N, sol.M] + sol.D2N + sol.D2M:
        assert np.max(np.abs(f.periodic_mean().coef), initial=0.0) <= 1e-13


def test_one_dimensional_geometry():
    A11 = 2 + cos_field(LINE, 0)
    u = solve_aux(CellProblem(TrigField.stack([[A11]]), TrigField.stack([A11]), (24,)))
    x = (np.arange(50) + 0.5) / 50
    flux = A11.evaluate(x[:, None]) * (u.deriv(0).evaluate(x[:, None]) + 1)
    assert np.allclose(flux, np.sqrt(3), atol=1e-12)


def test_truncation_must_keep_a_periodic_mode():
    with pytest.raises(CellSolveError):
        solve_aux(CellProblem(TrigField.stack([[const(UNIT, 1.0)]]),
                              TrigField.stack([cos_field(UNIT, 0)]), (0, 2)))


def test_periodic_block_shape(coupled):
    assert periodic_block(coupled.A).shape == (1, 1)
