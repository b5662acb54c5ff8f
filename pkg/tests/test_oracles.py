"""The reference computations agree with each other and with known values."""

import math

import mpmath as mp
import numpy as np
import pytest

from oracles import pi_p_beta, pi_p_closed_form, reduced_q_mp, reduced_q_oracle, rk4_classify, rk4_ground_state

LAMBDA0_FROZEN = 4.337387651205063


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0, 3.0, 5.0])
def test_pi_p_routes_agree(p):
    assert pi_p_closed_form(p) == pytest.approx(pi_p_beta(p), rel=1e-13)
    assert pi_p_closed_form(2.0) == pytest.approx(math.pi, rel=1e-15)


def test_rk4_ground_state_coarse():
    lam0 = rk4_ground_state(lo=4.0, hi=5.0, tol=1e-4, h=1e-3, r_max=30.0)
    assert lam0 == pytest.approx(LAMBDA0_FROZEN, rel=1e-3)


def test_rk4_classify_counts_increase():
    nodes, settled = rk4_classify([3.0, 10.0, 30.0], h=1e-3, r_max=40.0)
    assert settled.all() and list(nodes) == sorted(nodes) and nodes[0] == 0


def test_reduction_oracles_agree_on_closed_form():
    # a = r^2, b = r^2 / (1 + r^2): χ = asinh r, q(t) = sinh^2 t / cosh t
    t = np.geomspace(0.05, 6.0, 7)
    exact = np.sinh(t) ** 2 / np.cosh(t)
    a = lambda r: r ** 2
    b = lambda r: r ** 2 / (1 + r ** 2)
    a_mp = lambda r: r ** 2
    b_mp = lambda r: r ** 2 / (1 + r ** 2)
    assert np.max(np.abs(reduced_q_mp(a_mp, b_mp, 2.0, t) / exact - 1)) <= 1e-12
    assert np.max(np.abs(reduced_q_oracle(a, b, 2.0, t) / exact - 1)) <= 1e-6
