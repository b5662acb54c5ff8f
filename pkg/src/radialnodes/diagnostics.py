"""Numerical certificates evaluated along computed trajectories.

* the angular-velocity lower bound ``-θ' > ω - c0 g(v, v')`` on an energy band,
* the dissipation identity for ``Q E + μ q v φ_p(v')``,
* the identity ``(hE)' = h' F(v)`` with ``h = q^{p'}``,
* first crossings ``r_λ(a)`` of energy levels and the critical-layer radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .hypotheses import FAIL, INCONCLUSIVE, PASS, weight_grid
from .integrator import SolveOptions, Trajectory, solve
from .nonlinearities import make_critical_extended
from .problem import Problem, make_problem
from .weights import PowerWeight


class DiagnosticError(ValueError):
    pass


# --------------------------------------------------------------------------- rotation bound

def _F_inverse(nl, y, side, s_max):
    """Solve ``F(s) = y`` on ``[β+, s_max]`` (right) or ``[-s_max, β-]`` (left)."""
    sign, beta = (1.0, nl.beta_plus) if side == "right" else (-1.0, nl.beta_minus)
    g = lambda x: float(nl.F(sign * x)) - y
    a, b = abs(beta), s_max
    while g(b) < 0.0:
        b *= 2.0
        if b > 1e150:
            raise DiagnosticError(f"F never reaches {y} on the {side} branch")
    return sign * brentq(g, a, b, xtol=1e-15, rtol=1e-14)


def grid_C2(prob: Problem, r_hi: float | None = None) -> float:
    """Supremum of ``r q'/q`` over the weight grid (exact for power weights)."""
    w = prob.weight
    if isinstance(w, PowerWeight):
        return float(w.N - 1.0)
    r = weight_grid(w, n_per_decade=40, hi=r_hi)
    return float(np.max(r * np.asarray(w.dlog(r))))


@dataclass
class RotationCertificate:
    c1: float
    constants: dict
    samples: np.ndarray  # columns r, lhs, rhs, g
    verdict: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"c1": self.c1, "constants": self.constants, "verdict": self.verdict, "details": self.details,
                "samples": [[float(x) for x in row] for row in self.samples]}


def rotation_constants(prob: Problem, c1: float, C2: float | None = None, s_max: float | None = None) -> dict:
    """``ρ1, ρ2, A, ω, c0, r̄`` as functions of the band top ``c1``."""
    pe, nl = prob.p, prob.nonlin
    p, pc = pe.p, pe.pconj
    s_max = s_max or prob.grids.s_max
    if not c1 > 0:
        raise DiagnosticError("invalid parameter: c1 must be positive")
    C2 = grid_C2(prob) if C2 is None else float(C2)
    Fr4, Fl4 = _F_inverse(nl, c1 / 4.0, "right", s_max), _F_inverse(nl, c1 / 4.0, "left", s_max)
    Fr1, Fl1 = _F_inverse(nl, c1, "right", s_max), _F_inverse(nl, c1, "left", s_max)
    # F̄ = -min F over [β-, β+]
    fbar = 0.0
    for lo, hi in ((nl.beta_minus, 0.0), (0.0, nl.beta_plus)):
        grid = np.linspace(lo, hi, 401)
        Fg = np.asarray(nl.F(grid), dtype=float)
        j = int(Fg.argmin())
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
        res = minimize_scalar(lambda s: float(nl.F(s)), bounds=(a, b), method="bounded", options={"xatol": 1e-13})
        fbar = max(fbar, -min(float(Fg.min()), float(res.fun)))
    rho1 = min(p * c1 / 4.0, abs(Fr4) ** p, abs(Fl4) ** p)
    rho2 = max(abs(Fr1) ** p, abs(Fl1) ** p) + p * (c1 + fbar)
    top = rho2 ** (1.0 / p)
    A = math.inf
    for lo, hi in ((-top, nl.beta_minus), (nl.beta_plus, top)):
        if hi <= lo:
            continue
        s = np.linspace(lo, hi, 4001)
        A = min(A, float(np.min(s * np.asarray(nl.f(s), dtype=float))))
    if not A > 0:
        raise DiagnosticError(f"s f(s) is not positive outside [beta-, beta+] (A = {A})")
    omega = min(A / (2.0 * rho2), p * c1 / (4.0 * rho2))
    c0 = (2.0 / (pc * c1)) ** (1.0 / p) / rho1
    r_bar = max(2.0 * C2 * rho2 / (p * A), 4.0 * C2 * rho2 / (p * p * c1))
    return {"rho1": rho1, "rho2": rho2, "A": A, "omega": omega, "c0": c0, "r_bar": r_bar,
            "C2": C2, "C2_source": "exact" if isinstance(prob.weight, PowerWeight) else "grid estimate",
            "F_bar": fbar, "F_r_inv_c1": Fr1, "F_l_inv_c1": Fl1, "F_r_inv_c1_4": Fr4, "F_l_inv_c1_4": Fl4}


def rotation_certificate(prob: Problem, traj: Trajectory, c1: float, C2: float | None = None,
                         slack: float = 1e-12) -> RotationCertificate:
    """Check ``-θ' > ω - c0 g`` at every sample with ``c1/2 <= E <= c1`` and ``r >= r̄``."""
    nl = prob.nonlin
    F_lam = float(nl.F(traj.lam))
    if not (0.0 < c1 < F_lam):
        raise DiagnosticError(f"invalid parameter: need 0 < c1 < F(lambda) = {F_lam:g}, got {c1}")
    k = rotation_constants(prob, c1, C2)
    band = (traj.E >= 0.5 * c1) & (traj.E <= c1)
    r, v, dv = traj.r[band], traj.v[band], traj.dv[band]
    lhs = -traj.dtheta[band]
    inside = (v >= nl.beta_minus) & (v <= nl.beta_plus)
    g = np.where(inside, np.abs(v * np.asarray(nl.f(v), dtype=float) * dv), 0.0)
    rhs = k["omega"] - k["c0"] * g
    samples = np.column_stack([r, lhs, rhs, g]) if r.size else np.empty((0, 4))
    checked = r >= k["r_bar"]
    ok = lhs > rhs - slack
    details = {"band_samples": int(r.size), "checked_samples": int(checked.sum()),
               "violations": int(np.count_nonzero(checked & ~ok)),
               "holds_below_r_bar": bool(np.all(ok[~checked])) if np.any(~checked) else None,
               "g_identically_zero": bool(np.all(g == 0.0))}
    if not r.size:
        verdict = INCONCLUSIVE
        details["reason"] = "band not visited"
    elif not np.any(checked):
        verdict = INCONCLUSIVE
        details["reason"] = "no band samples beyond r_bar"
    else:
        verdict = PASS if details["violations"] == 0 else FAIL
    if np.any(checked):
        details["min_margin"] = float(np.min(lhs[checked] - rhs[checked]))
    return RotationCertificate(c1=c1, constants=k, samples=samples, verdict=verdict, details=details)


# --------------------------------------------------------------------------- identities

def _strided(traj: Trajectory, n_sub: int, r_from: float | None):
    """Dense samples plus the mask of samples that enter the residual norm.

    Samples before ``r_from`` and, for p > 2, inside the window around each
    critical point (where the solution is only Hölder and second-order
    differences lose their rate) are excluded from the norm but still serve as
    stencil neighbours.
    """
    r, v, w, _ = traj.resample(n_sub)
    keep = np.ones(r.size, dtype=bool)
    keep[0] = keep[-1] = False
    if r_from is not None:
        keep &= r >= r_from
    win = traj.stats.get("critical_window")
    if win:
        for c in traj.critical_points:
            keep &= np.abs(r - c) >= win
    return r, v, w, keep


def _normalized_rms(r, lhs, rhs, keep=None):
    """``||lhs - rhs|| / ||rhs||`` in the r-weighted (trapezoid) L2 norm over ``keep``."""
    wt = np.gradient(r)
    if keep is not None:
        wt = np.where(keep, wt, 0.0)
    den = math.sqrt(float(np.sum(wt * rhs * rhs)))
    num = math.sqrt(float(np.sum(wt * (lhs - rhs) ** 2)))
    return num / den if den > 0 else num


def dissipation_residual(prob: Problem, traj: Trajectory, mu: float | None = None, n_sub: int = 16,
                         r_from: float | None = None) -> float:
    """Normalized RMS of ``d/dr(Q E + μ q v φ_p(v'))`` minus its closed-form right side.

    The left side is a second-order finite difference on the dense output
    sampled ``n_sub`` times per accepted step.
    """
    mu = prob.mu_star if mu is None else float(mu)
    if mu < 0:
        raise DiagnosticError("mu must be >= 0")
    pe, w_, nl = prob.p, prob.weight, prob.nonlin
    r, v, w, keep = _strided(traj, n_sub, r_from)
    q, Q = np.asarray(w_.q(r)), np.asarray(w_.Q(r))
    E = np.abs(w) ** pe.pconj / pe.pconj + np.asarray(nl.F(v))
    # φ_p(v') = w
    L = Q * E + mu * q * v * w
    dL = np.gradient(L, r, edge_order=2)
    fv, Fv = np.asarray(nl.f(v)), np.asarray(nl.F(v))
    rhs = q * np.abs(w) ** pe.pconj * (mu + np.asarray(w_.qq_prime(r)) - 1.0 / pe.p) + q * (Fv - mu * v * fv)
    return _normalized_rms(r, dL, rhs, keep)


def h_identity_residual(prob: Problem, traj: Trajectory, n_sub: int = 16, r_from: float | None = None) -> float:
    """Normalized RMS of ``d/dr(h E) - h' F(v)`` along the dense output."""
    pe, w_, nl = prob.p, prob.weight, prob.nonlin
    r, v, w, keep = _strided(traj, n_sub, r_from)
    h, dh = np.asarray(w_.h(r)), np.asarray(w_.dh(r))
    E = np.abs(w) ** pe.pconj / pe.pconj + np.asarray(nl.F(v))
    dH = np.gradient(h * E, r, edge_order=2)
    rhs = dh * np.asarray(nl.F(v))
    return _normalized_rms(r, dH, rhs, keep)


# --------------------------------------------------------------------------- level statistics

def level_crossings(traj: Trajectory, levels, prob: Problem | None = None) -> dict:
    """First radius where E falls to each level (levels never crossed are omitted).

    With ``prob`` given, the crossing is refined with a root-finder on the
    energy of the dense output; otherwise E is interpolated linearly between
    samples.  The map is made monotone (higher level, smaller radius).
    """
    E, r = traj.E, traj.r
    out = {}
    for a in sorted({float(x) for x in levels}, reverse=True):
        idx = np.flatnonzero(E <= a)
        if idx.size == 0:
            continue
        j = int(idx[0])
        if j == 0:
            out[a] = float(r[0])
            continue
        r0, r1 = r[j - 1], r[j]
        if prob is not None and r1 > r0:
            pc = prob.p.pconj

            def g(x):
                v, w, _ = traj.dense(x)
                return abs(float(w)) ** pc / pc + float(prob.nonlin.F(float(v))) - a

            g0, g1 = g(r0), g(r1)
            if g0 >= 0.0 >= g1:
                out[a] = brentq(g, r0, r1, xtol=1e-12, rtol=1e-14)
                continue
        E0, E1 = E[j - 1], E[j]
        out[a] = float(r0 + (r1 - r0) * (E0 - a) / (E0 - E1)) if E0 != E1 else float(r1)
    # enforce monotonicity: r(a1) <= r(a2) for a1 > a2
    best = -math.inf
    for a in sorted(out, reverse=True):
        best = max(best, out[a])
        out[a] = best
    return dict(sorted(out.items(), reverse=True))


def dissipation_trend(prob: Problem, lambdas, c1: float, opts: SolveOptions | None = None) -> list[dict]:
    """``r_λ(c1)`` and ``r_λ(c1/2) - r_λ(c1)`` over an amplitude grid."""
    opts = opts or SolveOptions(r_max=1e3, max_nodes=100_000, stop_on_settle=True)
    rows = []
    for lam in lambdas:
        tr = solve(prob, lam, opts)
        lc = level_crossings(tr, [c1, 0.5 * c1], prob)
        r1, r2 = lc.get(c1), lc.get(0.5 * c1)
        rows.append({"lambda": float(lam), "r_c1": r1, "r_c1_half": r2,
                     "gap": (r2 - r1) if (r1 is not None and r2 is not None) else None,
                     "nodes": tr.node_count})
    return rows


def critical_layer_probe(d: int, lambda_grid, opts: SolveOptions | None = None, beta: float = 1.0,
                         prob: Problem | None = None) -> list[dict]:
    """Radius ``R(λ)`` where the energy first reaches ``√F(λ)``.

    Defaults to p = 2, ``q = r^{d-1}`` and the critically extended power
    nonlinearity; ``prob`` overrides the problem for contrast runs.
    """
    prob = prob or make_problem(2.0, PowerWeight(d), make_critical_extended(d, beta))
    rows = []
    for lam in lambda_grid:
        lam = float(lam)
        F_lam = float(prob.nonlin.F(lam))
        if not F_lam > 1.0:
            rows.append({"lambda": lam, "R": None, "flag": "F(lambda) <= 1"})
            continue
        level = math.sqrt(F_lam)
        o = opts or SolveOptions(r_max=10.0, max_nodes=100_000)
        # stop as soon as the level is passed
        tr = solve(prob, lam, o.with_(settle_tol=o.settle_tol, stop_on_settle=True))
        lc = level_crossings(tr, [level], prob)
        R = lc.get(level)
        rows.append({"lambda": lam, "R": R, "flag": "" if R is not None else "crossing not found before r_max"})
    return rows


def strictly_decreasing(values) -> bool:
    x = [v for v in values]
    return all(v is not None for v in x) and all(b < a for a, b in zip(x, x[1:]))


def strictly_increasing(values) -> bool:
    x = [v for v in values]
    return all(v is not None for v in x) and all(b > a for a, b in zip(x, x[1:]))
