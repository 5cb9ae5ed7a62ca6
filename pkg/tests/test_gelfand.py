from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylhom.fiber import Quasimomentum, build_engine
from cylhom.gelfand import (CylinderFunction, DirectIntegralPlan, WindowError, apply_P_eps,
                            gelfand_forward, gelfand_inverse, global_apply, scale)

from fields import UNIT, identity_coeffs


def wave(xi, m=0, w=1.0):
    return CylinderFunction(UNIT, [[xi]], [[m]], [w])


@pytest.fixture(scope="module")
def coupled_engine(coupled):
    return build_engine(coupled, 5, 5)


def test_plane_wave_has_one_fiber():
    eps = 0.1
    fibers = gelfand_forward(wave(37.0, 1, 2.0), eps)
    assert len(fibers) == 1
    sample = next(iter(fibers.values()))
    k, n = UNIT.lattice().reduce(np.array([eps * 37.0]))
    assert sample.k == pytest.approx(tuple(k))
    assert sample.entries == {(int(n[0]), 1): 2.0}


@pytest.mark.parametrize("eps", [0.25, 0.03125])
def test_round_trip(eps):
    u = CylinderFunction.random(UNIT, 10, seed=4, freq_radius=40)
    back = gelfand_inverse(gelfand_forward(u, eps), UNIT, eps)
    assert back.allclose(u, 1e-12)
    assert np.allclose(np.sort(back.frequencies.ravel()), np.sort(u.frequencies.ravel()), rtol=1e-13)


@given(st.integers(0, 10_000), st.sampled_from([0.5, 0.1, 0.01]))
def test_plancherel(seed, eps):
    u = CylinderFunction.random(UNIT, 8, seed=seed, freq_radius=30)
    fibers = gelfand_forward(u, eps)
    total = sum(abs(w) ** 2 for f in fibers.values() for w in f.entries.values())
    assert np.sqrt(total) == pytest.approx(u.norm(), rel=1e-13)


def test_P_eps_indicator():
    r = UNIT.lattice().brillouin_radius
    for eps in (1.0, 0.1, 0.01):
        assert apply_P_eps(wave(0.0), eps).ncomp == 1
        assert apply_P_eps(wave(2 * r / eps), eps).ncomp == 0


@given(st.integers(0, 10_000), st.sampled_from([0.5, 0.1]))
def test_P_eps_idempotent(seed, eps):
    u = CylinderFunction.random(UNIT, 12, seed=seed, freq_radius=60)
    once = apply_P_eps(u, eps)
    assert apply_P_eps(once, eps).allclose(once, 0.0)
    assert once.norm() <= u.norm() + 1e-15


@given(st.integers(0, 10_000), st.floats(0.05, 20))
def test_scaling_bound_on_h1(seed, delta):
    u = CylinderFunction.random(UNIT, 6, seed=seed)
    assert scale(u, delta).h1_norm() <= max(1.0, delta) * u.h1_norm() * (1 + 1e-13)
    assert scale(u, delta).norm() == pytest.approx(u.norm())


def test_laplacian_resolvent_is_a_multiplier():
    eng = build_engine(identity_coeffs(), 4, 4)
    eps, xi, m = 0.125, 9.5, 1
    out = global_apply("resolvent", wave(xi, m), eps, eng)
    expected = 1.0 / (xi**2 + (2 * np.pi * m) ** 2 - eng.mu)
    assert out.ncomp == 1
    assert out.weights[0] == pytest.approx(expected, rel=1e-13)
    eff = global_apply("eff_resolvent", wave(xi, m), eps, eng)
    assert eff.allclose(out, 1e-13)


def test_corrector_vanishes_for_y1_independent_coefficients(constant):
    eng = build_engine(constant, 3, 6)
    u = CylinderFunction.random(UNIT, 5, seed=1, freq_radius=10)
    assert global_apply("K", u, 0.1, eng).norm() <= 1e-14


def test_single_component_matches_fiber(coupled_engine):
    eps, xi, m = 0.1, 13.0, 2
    u = wave(xi, m, 0.7 - 0.2j)
    out = global_apply("resolvent", u, eps, coupled_engine)
    k, n = UNIT.lattice().reduce(np.array([eps * xi]))
    fs = coupled_engine.fiber(Quasimomentum(tuple(k), eps))
    x = np.zeros(fs.basis.dim, complex)
    x[fs.basis.index_of((int(n[0]), m))] = 0.7 - 0.2j
    y = eps**2 * fs.resolvent(x)
    fibers = gelfand_forward(out, eps)
    assert len(fibers) == 1
    got = next(iter(fibers.values())).vector(fs.basis)
    assert np.array_equal(got, y)


def test_symbol_L_is_homogeneous(coupled_engine):
    eps, xi = 0.0625, 1.7
    fs = coupled_engine.fiber(Quasimomentum((eps * xi,), eps))
    u = wave(xi, 1)
    out = global_apply("L", u, eps, coupled_engine)
    x = np.zeros(fs.basis.block_size, complex)
    x[1 + fs.basis.N2] = 1.0
    y = eps * fs.L_block @ x
    vals = {int(m[0]): w for m, w in zip(out.modes, out.weights)}
    for i, val in enumerate(y):
        assert vals.get(i - fs.basis.N2, 0.0) == pytest.approx(val, abs=1e-14 * np.abs(y).max())


def test_symbol_tail_is_bounded(coupled_engine):
    r = UNIT.lattice().brillouin_radius
    # frozen regression constant: measured sup 1.17e-4 over |xi| >= r
    for eps in (0.25, 0.0625, 0.015625):
        for t in (1.0, 2.0, 8.0):
            u = wave(t * r / eps, 0)
            assert eps * global_apply("L", u, eps, coupled_engine).norm() <= 1.3e-4 * eps


def test_combined_corrector_runs(coupled_engine):
    u = CylinderFunction.random(UNIT, 4, seed=2, freq_radius=6, max_mode=1)
    out = global_apply("C", u, 0.125, coupled_engine)
    assert np.isfinite(out.norm())


def test_window_error_for_modes_outside_basis(coupled_engine):
    with pytest.raises(WindowError):
        global_apply("resolvent", wave(0.5, 9), 0.1, coupled_engine)


def test_direct_integral_plan(coupled_engine):
    plan = DirectIntegralPlan(coupled_engine, 0.25, nodes_per_axis=4)
    assert plan.weights.sum() == pytest.approx(2 * np.pi)
    assert np.all(np.abs(plan.nodes) < np.pi)
    sup = plan.sup_norm(lambda fs: fs.tau.tau_norm)
    assert sup == pytest.approx(np.hypot(0.75 * np.pi, 0.25))
