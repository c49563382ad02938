import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floquet_monodromy.potential import (
    ClassViolation,
    FourierPotential,
    eval_coefficient,
    eval_derivative,
    gauge_normalize,
    harmonic_integral,
    verify_class,
)

from conftest import p1_potential


def test_p1_coefficients():
    p = p1_potential()
    assert eval_coefficient(p, 2, 0.0) == pytest.approx(2.0)
    assert eval_coefficient(p, 1, 0.7) == 0
    assert eval_coefficient(p, -2, np.pi / 2) == pytest.approx(1.0)


def test_p1_derivatives():
    p = p1_potential()
    assert eval_derivative(p, 2, 1, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert eval_derivative(p, 2, 1, np.pi / 2) == pytest.approx(-1.0)
    assert eval_derivative(p, 2, 2, 0.0) == pytest.approx(-1.0)


def test_vectorized_in_t():
    p = p1_potential()
    t = np.linspace(0, 2 * np.pi, 7)
    np.testing.assert_allclose(eval_coefficient(p, 2, t), 1 + np.cos(t), atol=1e-14)


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        eval_derivative(p1_potential(), 2, -1, 0.0)


def test_reality_enforced():
    arr = np.array([0, 1, 0], dtype=complex)
    with pytest.raises(ValueError):
        FourierPotential({1: arr, -1: arr * 2}, 1)
    with pytest.raises(ValueError):
        FourierPotential.from_modes({-1: {0: 1}})


@settings(max_examples=50)
@given(st.floats(0, 2 * np.pi), st.integers(-3, 3))
def test_conjugate_symmetry(t, k):
    p = FourierPotential.from_modes({1: {0: 0.3, 2: 1 - 2j}, 3: {-1: 0.5j, 1: 0.1}})
    assert eval_coefficient(p, -k, t) == pytest.approx(np.conj(eval_coefficient(p, k, t)), abs=1e-14)


@settings(max_examples=50)
@given(st.floats(0, 2 * np.pi))
def test_derivative_finite_difference(t):
    p = FourierPotential.from_modes({1: {0: 0.3, 2: 1 - 2j, -3: 0.4}})
    errs = []
    for eps in (1e-2, 5e-3):
        fd = (eval_coefficient(p, 1, t + eps) - eval_coefficient(p, 1, t - eps)) / (2 * eps)
        errs.append(abs(fd - eval_derivative(p, 1, 1, t)))
    # second order: halving eps cuts the error by about 4
    assert errs[1] <= errs[0] / 3 + 1e-12


def test_order_zero_is_coefficient():
    p = p1_potential()
    t = np.linspace(0, 6, 11)
    np.testing.assert_array_equal(eval_derivative(p, 2, 0, t), eval_coefficient(p, 2, t))


class TestGauge:
    def test_cosine_average(self):
        p = FourierPotential.from_modes({0: {1: 0.5, -1: 0.5}, 2: {0: 1.0}})
        q, gp = gauge_normalize(p)
        assert q.is_gauge_normalized() and 2 in q.modes
        assert gp.v00 == 0.0
        t = np.linspace(0, 2 * np.pi, 9)
        np.testing.assert_allclose(gp.primitive(t), np.sin(t), atol=1e-14)

    def test_constant_average(self):
        p = FourierPotential.from_modes({0: {0: 3.0}, 1: {0: 0.1}})
        q, gp = gauge_normalize(p)
        assert gp.v00 == 3.0
        np.testing.assert_allclose(gp.primitive(np.linspace(0, 6, 5)), 0.0, atol=1e-15)
        assert 0 not in q.modes

    def test_identity_when_normalized(self):
        p = p1_potential()
        q, gp = gauge_normalize(p)
        assert q is p and gp.v00 == 0.0

    def test_idempotent(self):
        p = FourierPotential.from_modes({0: {1: 0.5, -1: 0.5, 0: 2.0}, 1: {2: 0.3}})
        q, _ = gauge_normalize(p)
        r, gp = gauge_normalize(q)
        assert r is q and gp.v00 == 0.0

    def test_multiplier_is_unimodular(self):
        p = FourierPotential.from_modes({0: {1: 0.5, -1: 0.5, 0: 2.0}})
        _, gp = gauge_normalize(p)
        np.testing.assert_allclose(np.abs(gp.multiplier(np.linspace(0, 5, 6), 2.0)), 1.0)


class TestClass:
    def test_p1_minimal_constant(self):
        rep = verify_class(p1_potential())
        assert rep.norms[2] == pytest.approx(2.0)
        assert rep.minimal_c_v == pytest.approx(54.0)
        assert rep.passed

    def test_zero_potential(self):
        rep = verify_class(FourierPotential.zero(c_v=1e-3))
        assert rep.ratios == {} and rep.passed

    def test_violation(self):
        p = FourierPotential.from_modes({2: {0: 1.0, 1: 0.5, -1: 0.5}}, alpha=3, c_v=10)
        with pytest.raises(ClassViolation) as info:
            verify_class(p)
        assert info.value.report.minimal_c_v == pytest.approx(54.0)
        assert not verify_class(p, strict=False).passed


def test_harmonic_integral_matches_quadrature():
    c = np.array([0.5, 1.0, 0.5 + 0.2j])
    m = np.array([-1, 0, 1])
    for omega in (0.0, 0.37, -1.0, 5.5):
        tau = np.linspace(0, 2.0, 20001)
        f = (np.exp(1j * np.outer(tau, m)) @ c) * np.exp(1j * omega * tau)
        quad = np.trapezoid(f, tau)
        assert harmonic_integral(c, m, omega, 2.0) == pytest.approx(quad, abs=1e-7)


def test_harmonic_integral_near_resonance_branch():
    c, m = np.array([1.0]), np.array([0])
    # |m + omega| < 1e-9 uses t + i w t^2 / 2
    assert harmonic_integral(c, m, 1e-12, 3.0) == pytest.approx(3.0 + 0.5j * 1e-12 * 9.0, abs=1e-18)
