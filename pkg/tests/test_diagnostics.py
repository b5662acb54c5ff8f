import math

import numpy as np
import pytest

from radialnodes import SolveOptions, problem_from_dict, solve
from radialnodes import diagnostics as dg
from radialnodes import hypotheses as hy
from radialnodes.integrator import trajectory_from_samples


def power_problem(nonlin, N=3, p=2):
    return problem_from_dict({"p": p, "weight": {"kind": "power", "params": {"N": N}}, "nonlinearity": nonlin})


@pytest.fixture(scope="module")
def canonical():
    return power_problem({"kind": "double_power", "params": {"gamma": 3, "m": 1}})


@pytest.fixture(scope="module")
def run10(canonical):
    return solve(canonical, 10.0)


# --------------------------------------------------------------------------- rotation bound

def _closed_form_constants(c1):
    # f = s^3 - s, p = 2, q = r^2: F(s) = y has s^2 = 1 + sqrt(1 + 4y) on the outer branches,
    # min F = -1/4 at s = 1, and s f(s) = s^4 - s^2 is increasing beyond β+ = √2 (value 2)
    s2 = lambda y: 1 + math.sqrt(1 + 4 * y)
    C2, p = 2.0, 2.0
    rho1 = min(p * c1 / 4, s2(c1 / 4))
    rho2 = s2(c1) + p * (c1 + 0.25)
    A = 2.0
    omega = min(A / (2 * rho2), p * c1 / (4 * rho2))
    c0 = (2 / (2.0 * c1)) ** (1 / p) / rho1
    r_bar = max(2 * C2 * rho2 / (p * A), 4 * C2 * rho2 / (p * p * c1))
    return {"rho1": rho1, "rho2": rho2, "A": A, "omega": omega, "c0": c0, "r_bar": r_bar}


@pytest.mark.parametrize("c1", [0.1, 1.0, 5.0])
def test_rotation_constants_closed_form(canonical, c1):
    k = dg.rotation_constants(canonical, c1)
    for name, val in _closed_form_constants(c1).items():
        assert k[name] == pytest.approx(val, rel=1e-10), name
    assert k["C2"] == 2.0 and k["C2_source"] == "exact"


def test_rotation_constants_frozen(canonical):
    k = dg.rotation_constants(canonical, 0.1)
    assert k["rho1"] == pytest.approx(0.05, rel=1e-12)
    assert k["rho2"] == pytest.approx(2.8832159566199236, rel=1e-12)
    assert k["omega"] == pytest.approx(0.017341746422150226, rel=1e-12)
    assert k["c0"] == pytest.approx(63.245553203367585, rel=1e-12)
    assert k["r_bar"] == pytest.approx(57.66431913239847, rel=1e-12)


def test_rotation_certificate_passes_when_exercised():
    prob = power_problem({"kind": "double_power", "params": {"gamma": 3, "m": 1}})
    tr = solve(prob, 1e4, SolveOptions(r_max=200, max_nodes=1000))
    cert = dg.rotation_certificate(prob, tr, 1.0)
    assert cert.verdict == hy.PASS
    assert cert.details["checked_samples"] > 0 and cert.details["violations"] == 0
    assert cert.details["min_margin"] > 0
    d = cert.to_dict()
    assert d["verdict"] == hy.PASS and len(d["samples"]) == cert.samples.shape[0]


def test_rotation_g_vanishes_outside_beta_interval(canonical, run10):
    cert = dg.rotation_certificate(canonical, run10, 1.0)
    r, lhs, rhs, g = cert.samples.T
    v = run10.dense(r)[0]
    outside = (v > canonical.nonlin.beta_plus) | (v < canonical.nonlin.beta_minus)
    assert np.all(g[outside] == 0)
    assert np.allclose(rhs[outside], cert.constants["omega"])


def test_rotation_invalid_and_unvisited(canonical, run10):
    with pytest.raises(dg.DiagnosticError, match="invalid parameter"):
        dg.rotation_certificate(canonical, run10, -1.0)
    with pytest.raises(dg.DiagnosticError, match="invalid parameter"):
        dg.rotation_certificate(canonical, run10, 1e9)
    short = solve(canonical, 10.0, SolveOptions(r_max=0.01))
    cert = dg.rotation_certificate(canonical, short, 1.0)
    assert cert.verdict == hy.INCONCLUSIVE and cert.details["reason"] == "band not visited"


# --------------------------------------------------------------------------- identities

def test_identities_on_constant_solution(canonical):
    # λ = 1 is a zero of f: both sides reduce to q F(1)
    r = np.linspace(0.01, 10.0, 2001)
    tr = trajectory_from_samples(canonical, r, np.ones_like(r), np.zeros_like(r), np.zeros_like(r))
    assert dg.dissipation_residual(canonical, tr) <= 1e-8
    assert dg.h_identity_residual(canonical, tr) <= 1e-8


@pytest.mark.parametrize("lam", [10.0, 30.0])
def test_identity_residuals_converge(canonical, lam):
    tr = solve(canonical, lam)
    d16, d32 = (dg.dissipation_residual(canonical, tr, n_sub=n) for n in (16, 32))
    h16, h32 = (dg.h_identity_residual(canonical, tr, n_sub=n) for n in (16, 32))
    assert d16 <= 1e-5 and h16 <= 1e-5
    # observed order at least 1 under stride halving
    assert d16 / d32 >= 2.0 and h16 / h32 >= 2.0


def test_dissipation_mu_choices(canonical, run10):
    for mu in (0.0, canonical.mu_star, 0.5, 2.0):
        assert dg.dissipation_residual(canonical, run10, mu=mu) <= 1e-5
    with pytest.raises(dg.DiagnosticError):
        dg.dissipation_residual(canonical, run10, mu=-0.1)


def test_h_spot_values(canonical):
    w = canonical.weight
    assert float(w.h(2.0)) == pytest.approx(16.0, rel=1e-14)
    assert float(w.dh(2.0)) == pytest.approx(32.0, rel=1e-14)


def test_h_derivative_vanishes_at_nodes(canonical, run10):
    h = 1e-5
    pc = canonical.p.pconj

    def H(r):
        v, w, _ = run10.dense(np.asarray(r))
        return canonical.weight.h(r) * (np.abs(w) ** pc / pc + canonical.nonlin.F(v))

    rr = np.linspace(run10.r[1], run10.r[-2], 400)
    scale = np.max(np.abs((H(rr + h) - H(rr - h)) / (2 * h)))
    for node in run10.nodes:
        dH = (H(np.array([node + h])) - H(np.array([node - h]))) / (2 * h)
        assert abs(float(dH[0])) <= 1e-6 * scale


# --------------------------------------------------------------------------- levels and probes

def test_level_crossings(canonical, run10):
    F_lam = float(canonical.nonlin.F(10.0))
    levels = [F_lam * (1 - 1e-9), 2.0, 1.0, 0.5, -1e9]
    lc = dg.level_crossings(run10, levels, canonical)
    assert -1e9 not in lc
    assert lc[levels[0]] < 1e-2
    assert lc[0.5] > lc[1.0] > lc[2.0]
    for a, r in lc.items():
        if a < F_lam * (1 - 1e-6):
            v, w, _ = run10.dense(np.array([r]))
            E = 0.5 * float(w[0]) ** 2 + float(canonical.nonlin.F(float(v[0])))
            assert E == pytest.approx(a, abs=1e-8)
    radii = list(lc.values())
    assert radii == sorted(radii)


def test_dissipation_trend(canonical):
    rows = dg.dissipation_trend(canonical, [10.0, 1e2, 1e3, 1e4], c1=1.0)
    assert dg.strictly_increasing([r["r_c1"] for r in rows])
    assert dg.strictly_increasing([r["gap"] for r in rows])


def test_critical_layer_probe_and_contrast():
    grid = [10.0, 1e2, 1e3, 1e4]
    crit = [row["R"] for row in dg.critical_layer_probe(3, grid)]
    assert dg.strictly_decreasing(crit)
    sub_prob = power_problem({"kind": "power", "params": {"gamma": 4}})
    sub = [row["R"] for row in dg.critical_layer_probe(3, grid, prob=sub_prob)]
    assert all(x is not None for x in sub)
    # the sub-critical layer also thins, but clearly slower than the critical one
    slope = lambda R: np.polyfit(np.log10(grid), np.log10(R), 1)[0]
    assert slope(crit) < slope(sub) - 0.3


def test_probe_flags_small_lambda():
    rows = dg.critical_layer_probe(3, [0.5])
    assert rows[0]["R"] is None and rows[0]["flag"]


def test_monotone_helpers():
    assert dg.strictly_decreasing([3, 2, 1]) and not dg.strictly_decreasing([3, 3, 1])
    assert dg.strictly_increasing([1, 2, 3]) and not dg.strictly_increasing([1, None, 3])
