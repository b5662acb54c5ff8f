import math

import numpy as np
import pytest
from scipy.integrate import quad

from oracles import pi_p_beta, pi_p_closed_form
from radialnodes.ptrig import (
    PExponent, PPolar, capital_phi_p, cos_sin_pp, p_cartesian_from_polar, p_polar_from_cartesian, phi_p, pi_p,
)

P_VALUES = (1.5, 2.0, 3.0, 4.0)


def test_pexponent_conjugate():
    for p in (1.1, 1.5, 2.0, 3.0, 7.5):
        pe = PExponent(p)
        assert abs(1 / pe.p + 1 / pe.pconj - 1) <= 1e-14
        assert pe.conjugate().pconj == pytest.approx(p, rel=1e-14)


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, float("inf"), float("nan")])
def test_pexponent_rejects(p):
    with pytest.raises(ValueError):
        PExponent(p)


def test_phi_p_examples():
    assert phi_p(0.0, 3) == 0.0
    assert phi_p(0.0, 1.5) == 0.0
    for s in (-2.0, 0.5, 7.0):
        assert phi_p(s, 2) == s
    assert phi_p(2.0, 3) == 4.0
    assert phi_p(-2.0, 3) == -4.0


def test_phi_p_vectorized_matches_scalar():
    s = np.linspace(-3, 3, 13)
    for p in P_VALUES:
        assert np.allclose(phi_p(s, p), [phi_p(float(x), p) for x in s], rtol=1e-15, atol=0)


def test_capital_phi_examples():
    assert capital_phi_p(1.0, 2) == 0.5
    for p in P_VALUES:
        assert capital_phi_p(0.0, p) == 0.0
    assert capital_phi_p(2.0, 3) == pytest.approx(8 / 3, rel=1e-15)


def test_capital_phi_derivative_is_phi():
    h = 1e-6
    for p in P_VALUES:
        for s in (-1.7, -0.3, 0.4, 2.5):
            fd = (capital_phi_p(s + h, p) - capital_phi_p(s - h, p)) / (2 * h)
            assert fd == pytest.approx(phi_p(s, p), rel=1e-8)


def test_phi_inverse_relation():
    s = np.concatenate([np.geomspace(1e-6, 1e6, 200), -np.geomspace(1e-6, 1e6, 200)])
    for p in P_VALUES:
        pc = p / (p - 1)
        back = phi_p(phi_p(s, p), pc)
        assert np.max(np.abs(back / s - 1)) <= 1e-12


def test_pi_2_is_pi():
    assert abs(pi_p(2.0) - math.pi) <= 1e-10


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0, 1.25, 6.0])
def test_pi_p_matches_closed_forms(p):
    assert pi_p(p) == pytest.approx(pi_p_closed_form(p), rel=1e-12)
    assert pi_p(p) == pytest.approx(pi_p_beta(p), rel=1e-12)


def test_pi_p_4_by_direct_quadrature():
    # quarter period ∫_0^1 dx / ((p'/p)^{1/p} (1-x^p)^{1/p}) with the endpoint weight handled by quad
    p = 4.0
    pc = p / (p - 1)
    g = lambda x: 1.0 / ((pc / p) ** (1 / p) * (1 + x + x * x + x ** 3) ** (1 / p))
    T, _ = quad(g, 0.0, 1.0, weight="alg", wvar=(0.0, -1 / p), epsabs=0, epsrel=1e-13)
    assert pi_p(p) == pytest.approx(2 * T, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_pi_p_conjugate_symmetry(p):
    assert abs(pi_p(p) - pi_p(p / (p - 1))) <= 1e-8


def test_cos_sin_at_zero():
    for p in P_VALUES:
        assert cos_sin_pp(0.0, p) == pytest.approx((1.0, 0.0), abs=1e-15)


def test_classical_case():
    for th in (0.3, 2.0, 5.0):
        x, y = cos_sin_pp(th, 2.0)
        assert abs(x - math.cos(th)) <= 1e-9 and abs(y - math.sin(th)) <= 1e-9


@pytest.mark.parametrize("p", P_VALUES)
def test_pythagorean_identity(p):
    pc = p / (p - 1)
    th = np.linspace(-20, 20, 10_000)
    x, y = cos_sin_pp(th, p)
    assert np.max(np.abs(capital_phi_p(x, p) + capital_phi_p(y, pc) - 1 / p)) <= 1e-10


@pytest.mark.parametrize("p", P_VALUES)
def test_periodicity(p):
    th = np.linspace(-7, 7, 301)
    x0, y0 = cos_sin_pp(th, p)
    x1, y1 = cos_sin_pp(th + 2 * pi_p(p), p)
    assert np.max(np.abs(x1 - x0)) <= 1e-8 and np.max(np.abs(y1 - y0)) <= 1e-8


def test_sup_of_product_is_one_over_p():
    p = 3.0
    th = np.linspace(0, 2 * pi_p(p), 100_001)
    x, y = cos_sin_pp(th, p)
    assert abs(np.max(x * y) - 1 / p) <= 1e-6


@pytest.mark.parametrize("p", P_VALUES)
def test_vector_field_by_finite_differences(p):
    # dx/dθ = -φ_{p'}(y), dy/dθ = φ_p(x); sampled away from the axes
    pc = p / (p - 1)
    half = pi_p(p)
    th = np.concatenate([np.linspace(0.15, 0.85, 8), np.linspace(1.15, 1.85, 8)]) * half / 2
    th = np.concatenate([th, th + half])
    h = 1e-5
    xp, yp = cos_sin_pp(th + h, p)
    xm, ym = cos_sin_pp(th - h, p)
    x, y = cos_sin_pp(th, p)
    dx, dy = (xp - xm) / (2 * h), (yp - ym) / (2 * h)
    assert np.max(np.abs(dx / -phi_p(y, pc) - 1)) <= 1e-6
    assert np.max(np.abs(dy / phi_p(x, p) - 1)) <= 1e-6


def test_polar_examples():
    lam = 2.5
    for p in P_VALUES:
        pol = p_polar_from_cartesian(lam, 0.0, p, 0.0)
        assert pol.rho == pytest.approx(lam ** p, rel=1e-14)
        assert abs(pol.theta) <= 1e-12
    pol = p_polar_from_cartesian(0.0, -1.0, 2.0, -math.pi / 2)
    assert pol.rho == pytest.approx(1.0) and pol.theta == pytest.approx(-math.pi / 2, abs=1e-12)


def test_polar_origin_rejected():
    with pytest.raises(ValueError, match="origin"):
        p_polar_from_cartesian(0.0, 0.0, 2.0)


def test_polar_round_trip_random():
    rng = np.random.default_rng(12345)
    for p in P_VALUES:
        for _ in range(200):
            rho = float(rng.uniform(1e-3, 50.0))
            th = float(rng.uniform(-10, 10))
            v, w = p_cartesian_from_polar(rho, th, p)
            pol = p_polar_from_cartesian(v, w, p, th)
            assert isinstance(pol, PPolar)
            assert pol.rho == pytest.approx(rho, rel=1e-10)
            assert pol.theta == pytest.approx(th, abs=1e-8)


def test_polar_unwraps_along_a_path():
    p = 3.0
    th = np.linspace(0, -25, 2000)
    hint = 0.0
    for t in th:
        v, w = p_cartesian_from_polar(1.0, float(t), p)
        hint = p_polar_from_cartesian(v, w, p, hint).theta
        assert abs(hint - t) <= 1e-8
