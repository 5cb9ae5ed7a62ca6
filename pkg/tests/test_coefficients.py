from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylhom.coefficients import (CoercivityError, coercivity_constants, sector_contains,
                                 surrogate_norm)
from cylhom.trigfield import TrigField

from fields import UNIT, coeffs, const, cos_field, identity_coeffs, random_field, vector


def test_identity_norm_is_one():
    assert surrogate_norm(TrigField.identity(UNIT)) == pytest.approx(1.0, abs=1e-14)


def test_sup_of_shifted_cosine():
    assert surrogate_norm(2 + cos_field(UNIT, 0)) == pytest.approx(3.0, abs=1e-12)


def test_ref1_inverse_hermitian_part(ref1):
    # pointwise sup of |(Re A)^-1| = max(1/(2-1), 1/(1-0.5)) = 2
    assert surrogate_norm(ref1.A, "inverse_hermitian_part") == pytest.approx(2.0, rel=1e-10)


def test_ref1_constants(ref1):
    data = coercivity_constants(ref1)
    assert data.c_star == pytest.approx(0.5, rel=1e-10)
    assert data.c_natural == 0.0
    assert data.mu == pytest.approx(-1.0)
    assert not sector_contains(data, data.mu, "S1")


def test_identity_constants():
    data = coercivity_constants(identity_coeffs())
    assert data.c_star == pytest.approx(1.0)
    assert data.c_natural == 0.0


def test_constant_potential_constants():
    data = coercivity_constants(coeffs(TrigField.identity(UNIT), q=const(UNIT, 0.25)))
    assert data.c_star == pytest.approx(0.75)
    assert data.c_natural == pytest.approx(0.25)


def test_large_drift_violates_hypothesis():
    a1 = vector([const(UNIT, 10.0), const(UNIT, 0.0)])
    with pytest.raises(CoercivityError, match="coercivity hypothesis violated"):
        coercivity_constants(coeffs(TrigField.identity(UNIT), a1=a1))


def test_indefinite_matrix_rejected():
    A = TrigField.constant(UNIT, np.diag([1.0, -1.0]))
    with pytest.raises(CoercivityError, match="ellipticity"):
        coercivity_constants(coeffs(A))


def test_sector_examples(ref1):
    data = coercivity_constants(ref1)
    assert not sector_contains(data, complex(-(data.c_natural + 1)), "S1")
    assert sector_contains(data, complex(1e6), "S1")
    from cylhom.coefficients import CoercivityData
    d = CoercivityData(0.5, 0.0, 3.0)
    assert sector_contains(d, 0j, "S1")


def test_default_mu_outside_full_sector(ref1, coupled, constant):
    for c in (ref1, coupled, constant):
        data = coercivity_constants(c)
        assert data.mu.real < -data.c_natural
        assert not sector_contains(data.with_effective_bound(10 * data.C_flat), data.mu, "S")


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_norm_translation_invariant(s0, s1):
    f = random_field(UNIT, (), (2, 1), 7)
    a = surrogate_norm(f)
    b = surrogate_norm(f.translate((s0, s1)))
    assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=10)
@given(st.floats(0.01, 0.99))
def test_lower_order_contributions_scale_linearly(t):
    g = UNIT
    base = dict(a1=vector([cos_field(g, 0, 0.1), const(g, 0.05)]),
                a2=vector([const(g, 0.02), cos_field(g, 1, 0.03)]), q=const(g, 0.05 + 0.05j))
    A = TrigField.identity(g) * 2.0
    d1 = coercivity_constants(coeffs(A, **base))
    dt = coercivity_constants(coeffs(A, **{k: v * t for k, v in base.items()}))
    # c_star = 1/|ReA^-1| - L, c_natural = L'; both contributions scale by t
    assert 2.0 - dt.c_star == pytest.approx(t * (2.0 - d1.c_star), rel=1e-9)
    assert dt.c_natural == pytest.approx(t * d1.c_natural, rel=1e-9)


def test_adjoint_coefficients(coupled):
    adj = coupled.adjoint()
    assert adj.A.allclose(coupled.A.H)
    assert adj.a1.allclose(coupled.a2) and adj.a2.allclose(coupled.a1)
    assert adj.q.allclose(coupled.q.conj())
    assert adj.adjoint().A.allclose(coupled.A)
