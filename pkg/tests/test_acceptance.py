"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary section at the
end of the run lists every criterion.
"""

import contextlib
import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import reduced_q_mp
from radialnodes import SolveOptions, find_k_node, load_problem, problem_from_dict, solve
from radialnodes import diagnostics as dg
from radialnodes import hypotheses as hy
from radialnodes import io
from radialnodes.cli import main
from radialnodes.library import LIBRARY
from radialnodes.ptrig import capital_phi_p, cos_sin_pp, pi_p
from radialnodes.shooter import support_radius
from radialnodes.weights import (
    ReducedWeight, k_hessian_pair, matukuma_pair, reduce_weights, stellar_pair, unified_pair,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# ground-state amplitude of Δu + u³ - u = 0 in d = 3, from the fixed-step RK4
# oracle (tests/oracles.py: rk4_ground_state(tol=1e-7), Δr = 1e-4)
LAMBDA0_FROZEN = 4.337387651205063


@contextlib.contextmanager
def criterion(log, n, desc):
    detail = {"text": ""}
    try:
        yield detail
    except BaseException:
        log[n] = (False, desc, detail["text"])
        print(f"criterion {n}: FAIL {desc}")
        raise
    log[n] = (True, desc, detail["text"])
    print(f"criterion {n}: PASS {desc}")


def power_problem(nonlin, N=3, p=2):
    return problem_from_dict({"p": p, "weight": {"kind": "power", "params": {"N": N}}, "nonlinearity": nonlin})


def double_power(gamma, m, N=3):
    return power_problem({"kind": "double_power", "params": {"gamma": gamma, "m": m}}, N)


@pytest.fixture(scope="module")
def library_runs():
    runs = []
    for e in LIBRARY:
        prob = e.problem()
        runs.append((e, prob, solve(prob, e.lam, e.options())))
    return runs


# --------------------------------------------------------------------------- 1

def test_criterion_1_aubin_talenti(acceptance_log):
    with criterion(acceptance_log, 1, "Aubin-Talenti closed form, max rel err <= 1e-6 on [0, 5], < 1 s") as d:
        t0 = time.perf_counter()
        prob = load_problem(CONFIGS / "aubin_talenti.json")
        tr = solve(prob, 1.0, SolveOptions(r_max=5.0))
        elapsed = time.perf_counter() - t0
        exact = lambda r: 1.0 / (1.0 + r * r / 8.0)
        rq = np.linspace(tr.r[0], 5.0, 2001)
        v, _, _ = tr.dense(rq)
        err = max(np.max(np.abs(tr.v / exact(tr.r) - 1.0)), np.max(np.abs(v / exact(rq) - 1.0)))
        d["text"] = f"max rel err {err:.2e}, {elapsed:.3f} s"
        assert tr.r[0] <= 1e-2 and abs(tr.v[0] - 1.0) <= 1e-6
        assert tr.r[-1] == pytest.approx(5.0)
        assert err <= 1e-6
        assert elapsed < 1.0


# --------------------------------------------------------------------------- 2

def test_criterion_2_ptrig(acceptance_log):
    with criterion(acceptance_log, 2, "p-trig identities, pi_p values, sup sin cos = 1/p") as d:
        worst_pyth, worst_sup = 0.0, 0.0
        for p in (1.5, 2.0, 3.0, 4.0):
            pc = p / (p - 1.0)
            th = np.linspace(-3 * pi_p(p), 3 * pi_p(p), 10_000)
            x, y = cos_sin_pp(th, p)
            pyth = np.max(np.abs(capital_phi_p(x, p) + capital_phi_p(y, pc) - 1.0 / p))
            worst_pyth = max(worst_pyth, pyth)
            fine = np.linspace(0.0, 2.0 * pi_p(p), 200_001)
            xf, yf = cos_sin_pp(fine, p)
            worst_sup = max(worst_sup, abs(np.max(xf * yf) - 1.0 / p))
        d["text"] = f"pythagoras {worst_pyth:.1e}, sup {worst_sup:.1e}"
        assert worst_pyth <= 1e-10
        assert abs(pi_p(2.0) - math.pi) <= 1e-10
        assert abs(pi_p(3.0) - pi_p(1.5)) <= 1e-8
        assert worst_sup <= 1e-6


# --------------------------------------------------------------------------- 3

def test_criterion_3_energy_decay(acceptance_log, library_runs):
    with criterion(acceptance_log, 3, "library energy decay and E' identity") as d:
        assert len(library_runs) >= 20
        worst_inc, worst_res = -math.inf, 0.0
        for e, prob, tr in library_runs:
            inc = tr.energy_increase()
            res = tr.energy_identity_residual()
            worst_inc, worst_res = max(worst_inc, inc), max(worst_res, res)
            assert inc <= 0.0, f"{e.name}: energy increase exceeds 1e-9(1+|E|) by {inc}"
            assert res <= 1e-7, f"{e.name}: E' identity residual {res}"
        d["text"] = f"{len(library_runs)} configs, worst identity residual {worst_res:.1e}"


# --------------------------------------------------------------------------- 4

def test_criterion_4_node_solutions(acceptance_log):
    with criterion(acceptance_log, 4, "find_k_node k=0..4, increasing lambda_k, lambda_0 frozen") as d:
        prob = double_power(3, 1)
        lams, times = [], []
        for k in range(5):
            t0 = time.perf_counter()
            res = find_k_node(prob, k)
            times.append(time.perf_counter() - t0)
            assert res.trajectory.node_count == k
            lams.append(res.lambda_k)
        d["text"] = "lambda_k = " + ", ".join(f"{x:.6f}" for x in lams) + f"; slowest {max(times):.1f} s"
        assert all(b > a for a, b in zip(lams, lams[1:]))
        assert max(times) < 60.0
        assert abs(lams[0] / LAMBDA0_FROZEN - 1.0) <= 1e-3


# --------------------------------------------------------------------------- 5

def test_criterion_5_identity_certificates(acceptance_log, library_runs):
    with criterion(acceptance_log, 5, "dissipation and H identity residuals <= 1e-5, shrinking with stride") as d:
        worst = 0.0
        for e, prob, tr in library_runs:
            dis16, dis32 = (dg.dissipation_residual(prob, tr, n_sub=n) for n in (16, 32))
            h16, h32 = (dg.h_identity_residual(prob, tr, n_sub=n) for n in (16, 32))
            worst = max(worst, dis16, h16)
            assert dis16 <= 1e-5, f"{e.name}: dissipation residual {dis16}"
            assert h16 <= 1e-5, f"{e.name}: H residual {h16}"
            assert dis32 < dis16, f"{e.name}: dissipation residual {dis16} -> {dis32}"
            assert h32 < h16, f"{e.name}: H residual {h16} -> {h32}"
        d["text"] = f"worst residual {worst:.1e}"


# --------------------------------------------------------------------------- 6

def test_criterion_6_rotation_certificate(acceptance_log, library_runs):
    with criterion(acceptance_log, 6, "rotation bound at every in-band sample with r >= r_bar") as d:
        checked = 0
        for e, prob, tr in library_runs:
            if not e.subcritical:
                continue
            F_lam = float(prob.nonlin.F(e.lam))
            if not F_lam > 0:
                continue  # the band (c1/2, c1) with c1 < F(lambda) is empty
            for c1 in sorted({min(1.0, 0.5 * F_lam), 0.25 * F_lam}):
                cert = dg.rotation_certificate(prob, tr, c1)
                assert cert.details["violations"] == 0, f"{e.name}, c1={c1}: {cert.details}"
                assert cert.verdict in (hy.PASS, hy.INCONCLUSIVE)
                checked += cert.details["checked_samples"]
        # runs whose band lies beyond r_bar, so the bound is actually exercised
        active = 0
        for name, c1s in (("canonical_lam1e4", (0.5, 1.0, 2.0, 5.0)), ("k_hessian_d3", (0.5, 1.0, 2.0))):
            e, prob, tr = next(x for x in library_runs if x[0].name == name)
            for c1 in c1s:
                cert = dg.rotation_certificate(prob, tr, c1)
                assert cert.verdict == hy.PASS, f"{name}, c1={c1}: {cert.details}"
                active += cert.details["checked_samples"]
        d["text"] = f"{checked + active} samples beyond r_bar checked"
        assert active > 0


# --------------------------------------------------------------------------- 7

def test_criterion_7_subcriticality(acceptance_log):
    with criterion(acceptance_log, 7, "(SC) discrimination, dissipation trend, critical layer probe") as d:
        # d = 3, p = 2: p* = 6
        sub = power_problem({"kind": "power", "params": {"gamma": 4}})
        plog = power_problem({"kind": "power_log", "params": {"d": 3, "zeta": 4.0, "s0": 6.0}})
        crit = power_problem({"kind": "power", "params": {"gamma": 5}})
        ext = power_problem({"kind": "critical_extended", "params": {"d": 3}})
        verdicts = {name: hy.check_sc(pr) for name, pr in
                    (("p*-1", sub), ("power-log", plog), ("p*", crit), ("critical-extended", ext))}
        assert verdicts["p*-1"].holds == hy.PASS
        assert verdicts["power-log"].holds == hy.PASS
        for name in ("p*", "critical-extended"):
            assert verdicts[name].holds == hy.FAIL
            assert verdicts[name].evidence["reason"] == "product stays bounded"

        grid = [10.0, 1e2, 1e3, 1e4]
        rows = dg.dissipation_trend(double_power(3, 1), grid, c1=1.0)
        r_c1 = [row["r_c1"] for row in rows]
        gap = [row["gap"] for row in rows]
        assert dg.strictly_increasing(r_c1), r_c1
        assert dg.strictly_increasing(gap), gap

        probe = dg.critical_layer_probe(3, grid)
        R = [row["R"] for row in probe]
        assert dg.strictly_decreasing(R), R
        d["text"] = "r_c1 " + ", ".join(f"{x:.3g}" for x in r_c1) + "; R " + ", ".join(f"{x:.3g}" for x in R)


# --------------------------------------------------------------------------- 8

def test_criterion_8_compact_support(acceptance_log):
    with criterion(acceptance_log, 8, "double zero for m=1/2, growing support, none for m=1") as d:
        half = double_power(3, 0.5)
        radii = []
        for k in range(3):
            res = find_k_node(half, k)
            tr = res.trajectory
            # generic amplitudes settle (A_k is open); the boundary amplitude lands in I_k
            assert tr.terminal == "double_zero" and res.classification.label() == f"I({k})"
            assert tr.double_zero is not None and math.isfinite(tr.double_zero)
            radii.append(support_radius(res))
        assert all(b > a for a, b in zip(radii, radii[1:])), radii

        one = double_power(3, 1)
        opts = SolveOptions(r_max=1e3, stop_on_settle=False, max_nodes=1000)
        for lam in (3.0, 20.0):
            t = solve(one, lam, opts)
            assert t.double_zero is None and t.terminal != "double_zero"
            assert t.r[-1] == pytest.approx(1e3)
        d["text"] = "support radii " + ", ".join(f"{x:.4g}" for x in radii)


# --------------------------------------------------------------------------- 9

def _reductions():
    return {
        "matukuma_sigma1": matukuma_pair(3, 1, 2.0),
        "matukuma_sigma2": matukuma_pair(3, 2, 2.0),
        "k_hessian_d3_k2": k_hessian_pair(3, 2),
        "k_hessian_d4_k1": k_hessian_pair(4, 1),
        "unified_d3_k1": unified_pair(3, 1, 0, 1, 1, 2.0),
        "unified_d4_p3": unified_pair(4, 1, 1, 2, 2, 3.0),
        "stellar_d3": stellar_pair(3, 1.0, 2.0),
    }


def test_criterion_9_weight_reduction(acceptance_log):
    with criterion(acceptance_log, 9, "reduced q vs oracle, a=b identity, (Q1)-(Q4) after (W1)-(W4)") as d:
        t = np.geomspace(0.05, 8.0, 10)
        worst = 0.0
        cases = [(matukuma_pair(3, 1, 2.0), lambda r: r ** 2, lambda r: r ** 2 / (1 + r), 2.0),
                 (matukuma_pair(3, 2, 2.0), lambda r: r ** 2, lambda r: r ** 2 / (1 + r ** 2), 2.0),
                 (k_hessian_pair(3, 2), lambda r: r, lambda r: r ** 2, 3.0)]
        for pair, a, b, p in cases:
            q = reduce_weights(pair, p).q(t)
            ref = reduced_q_mp(a, b, p, t)
            err = float(np.max(np.abs(q / ref - 1.0)))
            worst = max(worst, err)
            assert err <= 1e-8

        ident = load_problem(CONFIGS / "identical_pair.json")
        r = np.geomspace(1e-3, 1e3, 50)
        assert isinstance(ident.weight, ReducedWeight) and ident.pair.identical
        assert np.array_equal(ident.pair.chi(r), r)
        assert np.allclose(ident.weight.q(r), r ** 2, rtol=1e-14)

        passing = 0
        for name, pair in _reductions().items():
            if hy.check_w1(pair).holds != hy.PASS:
                continue
            if any(v.holds != hy.PASS for v in hy.check_w(pair)):
                continue
            passing += 1
            rw = ReducedWeight(pair)
            grid = hy.weight_grid(rw)
            for fn in (hy.check_q1, hy.check_q2, hy.check_q3, hy.check_q4):
                v = fn(rw, grid)
                assert v.holds == hy.PASS, f"{name}: {v.name} {v.evidence}"
        assert passing >= 4
        d["text"] = f"oracle err {worst:.1e}; {passing} reductions pass (W1)-(W4) and (Q1)-(Q4)"


# --------------------------------------------------------------------------- 10

def _run_twice(tmp_path, args):
    dirs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main([*args, "--out", str(out)]) == 0
        dirs.append(out)
    return dirs


def test_criterion_10_determinism(acceptance_log, tmp_path):
    with criterion(acceptance_log, 10, "byte-identical reruns, lossless CSV round trip") as d:
        commands = [
            ["solve", str(CONFIGS / "canonical.json"), "--lambda", "7"],
            ["solve", str(CONFIGS / "canonical.json"), "--lambda", "7", "--stride", "0.05"],
            ["shoot", str(CONFIGS / "canonical.json"), "--k", "1"],
            ["sweep", str(CONFIGS / "canonical.json"), "--lambdas", "3,5,10"],
            ["check", str(CONFIGS / "power_log.json")],
            ["reduce", str(CONFIGS / "k_hessian.json")],
            ["diag", str(CONFIGS / "canonical.json"), "--lambda", "5"],
        ]
        n_files = 0
        for i, args in enumerate(commands):
            a, b = _run_twice(tmp_path / f"cmd{i}", args)
            names = sorted(p.name for p in a.iterdir())
            assert names == sorted(p.name for p in b.iterdir())
            match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
            assert not mismatch and not errors, (args, mismatch, errors)
            n_files += len(match)

        prob = load_problem(CONFIGS / "canonical.json")
        for lam in (3.0, 7.0):
            tr = solve(prob, lam)
            path = io.write_trajectory_csv(tr, tmp_path / f"rt{lam}.csv")
            loaded = io.load_trajectory(path)
            assert np.array_equal(loaded.samples, tr.samples)
            again = io.write_csv(tmp_path / f"rt{lam}b.csv", io.CSV_HEADER, loaded.samples)
            assert again.read_bytes() == path.read_bytes()
        d["text"] = f"{len(commands)} commands, {n_files} files compared"
