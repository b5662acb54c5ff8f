"""Shooting integrator for ``(q φ_p(v'))' + q f(v) = 0``, ``v(0) = λ``, ``v'(0) = 0``.

The first-order system is integrated in the variables

    v' = φ_{p'}(w),   w' = -(q'/q) w - f(v),
    θ' = -[(p/p')|w|^{p'} + v f(v) + (q'/q) v w] / ρ,   ρ = |v|^p + (p/p')|w|^{p'},
    D' = (q'/q) |w|^{p'},

where ``D`` accumulates the dissipated energy, so ``E + D`` is constant along
exact solutions.  The singular coefficient ``q'/q`` is never evaluated at
``r = 0``: the first stretch ``[0, r1]`` comes from the integral form of the
equation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .problem import Problem, energy
from .ptrig import p_polar_from_cartesian, pi_p

log = logging.getLogger(__name__)

REACHED_R_MAX = "reached_r_max"
DOUBLE_ZERO = "double_zero"
SETTLED = "settled_negative_energy"
STEP_FAILURE = "step_failure"
MAX_NODES = "max_nodes"
UNIQUENESS = "uniqueness_boundary"
TERMINALS = (REACHED_R_MAX, DOUBLE_ZERO, SETTLED, STEP_FAILURE, MAX_NODES, UNIQUENESS)


class IntegrationDomainError(ValueError):
    """Non-finite values produced by f or q."""


class StartupError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    r_max: float = 100.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    startup_radius: float | None = None  # None: chosen so |v(r1) - λ| ≈ 1e-6 |λ|
    double_zero_tol: float = 1e-10
    settle_tol: float = 1e-8
    max_nodes: int = 50
    stop_on_settle: bool = True
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.double_zero_tol > 0 and self.settle_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.startup_radius is not None and not (0 < self.startup_radius < self.r_max):
            raise ValueError("need r_max > startup_radius > 0")
        if self.max_nodes < 0:
            raise ValueError("max_nodes must be >= 0")

    def with_(self, **kw) -> "SolveOptions":
        return replace(self, **kw)


@dataclass
class Trajectory:
    """Accepted-step samples of ``(r, v, w, E, θ)`` plus the event log.

    ``dv, dw, dtheta`` hold the right-hand side at every sample, which gives
    a piecewise cubic Hermite dense output.
    """

    lam: float
    p: float
    r: np.ndarray
    v: np.ndarray
    w: np.ndarray
    E: np.ndarray
    theta: np.ndarray
    D: np.ndarray
    dv: np.ndarray
    dw: np.ndarray
    dtheta: np.ndarray
    nodes: list = field(default_factory=list)
    critical_points: list = field(default_factory=list)
    double_zero: float | None = None
    terminal: str = REACHED_R_MAX
    message: str = ""
    flags: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    dD: np.ndarray | None = field(default=None, repr=False)
    stepper: object = field(default=None, repr=False, compare=False)

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.r, self.v, self.w, self.E, self.theta])

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def final_energy(self) -> float:
        return float(self.E[-1])

    def energy_increase(self) -> float:
        """Largest ``E_{i+1} - E_i - 1e-9 (1 + |E_i|)``; nonpositive when E is monotone."""
        dE = np.diff(self.E)
        return float(np.max(dE - 1e-9 * (1.0 + np.abs(self.E[:-1])))) if dE.size else -1.0

    def energy_identity_residual(self) -> float:
        """Normalized, step-weighted RMS of ``dE/dr + (q'/q)|v'|^p`` over accepted steps.

        Per step the mean residual is ``(ΔE + ΔD)/h``; it is normalized by the
        step-weighted RMS of the mean dissipation rate ``ΔD/h`` (or 1 when
        nothing dissipates).
        """
        h = np.diff(self.r)
        ok = h > 0
        if not np.any(ok):
            return 0.0
        h = h[ok]
        dE, dD = np.diff(self.E)[ok], np.diff(self.D)[ok]
        res = (dE + dD) / h
        rate = dD / h
        num = math.sqrt(float(np.sum(h * res * res)) / float(np.sum(h)))
        den = math.sqrt(float(np.sum(h * rate * rate)) / float(np.sum(h)))
        return num / den if den > 0 else num

    def dense(self, rq):
        """Dense output of ``(v, w, θ)`` at radii inside the sampled range.

        With the vectorized right-hand side attached (as :func:`solve` does),
        each radius is reached by one Runge-Kutta step from the accepted
        sample to its left, so dense values carry the integrator's own local
        accuracy.  Without it, cubic Hermite interpolation is used.
        """
        rq = np.asarray(rq, dtype=float)
        r, keep = _strict(self.r)
        if self.stepper is not None and self.dD is not None and r.size > 1:
            idx = np.clip(np.searchsorted(r, rq, side="right") - 1, 0, r.size - 2)
            y0 = tuple(a[keep][idx] for a in (self.v, self.w, self.theta, self.D))
            k0 = tuple(a[keep][idx] for a in (self.dv, self.dw, self.dtheta, self.dD))
            y, _, _ = _dp_step(self.stepper, r[idx], y0, k0, rq - r[idx])
            outside = (rq < r[0]) | (rq > r[-1])
            return tuple(np.where(outside, np.nan, c) for c in y[:3])
        out = []
        for y, dy in ((self.v, self.dv), (self.w, self.dw), (self.theta, self.dtheta)):
            out.append(CubicHermiteSpline(r, y[keep], dy[keep], extrapolate=False)(rq))
        return tuple(out)

    def resample(self, n_sub: int = 1):
        """Accepted-step grid refined by ``n_sub`` equal subdivisions per step.

        For p > 2, steps inside ``stats["critical_window"]`` of a critical
        point are not subdivided: the dense output there is no better than the
        local expansion, and finite differences at tiny spacings only amplify
        round-off.
        """
        r, _ = _strict(self.r)
        if n_sub <= 1:
            rq = r
        else:
            frac = np.arange(n_sub) / n_sub
            rq = r[:-1, None] + np.diff(r)[:, None] * frac[None, :]
            win = self.stats.get("critical_window")
            if win and len(self.critical_points):
                cp = np.asarray(self.critical_points, dtype=float)
                mid = 0.5 * (r[:-1] + r[1:])
                near = np.min(np.abs(mid[:, None] - cp[None, :]), axis=1) < win
                rq = np.where(near[:, None], r[:-1, None], rq)
            rq = np.unique(np.append(rq.ravel(), r[-1]))
        v, w, th = self.dense(rq)
        return rq, v, w, th

    def events(self) -> dict:
        return {"lambda": self.lam, "nodes": list(self.nodes), "critical_points": list(self.critical_points),
                "double_zero": self.double_zero, "terminal": self.terminal}


def _strict(r):
    """Indices keeping a strictly increasing subsequence (drops zero-length landings)."""
    keep = np.concatenate([[True], np.diff(r) > 0])
    return r[keep], keep


# --------------------------------------------------------------------------- right-hand side

class VectorRHS:
    """Array version of the right-hand side, used for dense output."""

    def __init__(self, prob: Problem):
        self.prob = prob

    def __call__(self, r, y):
        pe, w_, nl = self.prob.p, self.prob.weight, self.prob.nonlin
        p, pc = pe.p, pe.pconj
        v, w = np.asarray(y[0], dtype=float), np.asarray(y[1], dtype=float)
        r = np.asarray(r, dtype=float)
        g = np.asarray(w_.dlog(r), dtype=float)
        fv = np.asarray(nl.f(v), dtype=float)
        aw = np.abs(w)
        awp = aw ** pc
        dv = np.sign(w) * aw ** (pc - 1.0)
        dw = -g * w - fv
        rho = np.abs(v) ** p + (p / pc) * awp
        with np.errstate(invalid="ignore", divide="ignore"):
            dth = np.where(rho > 0.0, -((p / pc) * awp + v * fv + g * v * w) / np.where(rho > 0.0, rho, 1.0), 0.0)
        return (dv, dw, dth, g * awp)


def make_rhs(prob: Problem):
    p, pc = prob.p.p, prob.p.pconj
    ratio = p / pc
    dlog = prob.weight.scalar_dlog()
    f = prob.nonlin.scalar_f()
    e1 = pc - 1.0
    copysign = math.copysign

    def rhs(r, y):
        v, w = y[0], y[1]
        g = dlog(r)
        fv = f(v)
        aw = -w if w < 0.0 else w
        awp = aw ** pc
        dv = copysign(aw ** e1, w) if aw != 0.0 else 0.0
        dw = -g * w - fv
        av = -v if v < 0.0 else v
        rho = av ** p + ratio * awp
        dth = -(ratio * awp + v * fv + g * v * w) / rho if rho > 0.0 else 0.0
        return (dv, dw, dth, g * awp)

    return rhs


# --------------------------------------------------------------------------- startup

_GX, _GW = leggauss(16)


def _gl_nodes(r):
    """Gauss-Legendre nodes/weights on [0, r] for every entry of the array r."""
    r = np.asarray(r, dtype=float)[..., None]
    return 0.5 * r * (_GX + 1.0), 0.5 * r * _GW


def _phi(s, e):
    return np.sign(s) * np.abs(s) ** e


def _startup_profile(prob: Problem, lam: float, r1: float):
    """One Picard refinement of the integral form, returning ``(v(r1), w(r1), correction)``."""
    pe = prob.p
    e = pe.pconj - 1.0
    fl = float(prob.nonlin.f(lam))
    QoQ = prob.weight.Q_over_q
    q = prob.weight.q
    f = prob.nonlin.f

    def v_first(t):
        # v_1(t) = λ - ∫_0^t φ_{p'}((Q/q)(s) f(λ)) ds
        s, ws = _gl_nodes(t)
        return lam - np.sum(ws * _phi(np.asarray(QoQ(s)) * fl, e), axis=-1)

    def w_second(t):
        # w(t) = -(1/q(t)) ∫_0^t q(s) f(v_1(s)) ds
        s, ws = _gl_nodes(t)
        return -np.sum(ws * np.asarray(q(s)) * np.asarray(f(v_first(s))), axis=-1) / np.asarray(q(t))

    s, ws = _gl_nodes(np.array([r1]))
    v2 = lam + float(np.sum(ws * _phi(w_second(s), e)))
    w2 = float(w_second(np.array([r1]))[0])
    v1 = float(v_first(np.array([r1]))[0])
    return v2, w2, abs(v2 - v1), abs(v1 - lam)


def _auto_radius(prob: Problem, lam: float, target: float) -> float:
    """Radius where the leading-order deviation ``∫_0^r φ_{p'}((Q/q) f(λ))`` reaches ``target``."""
    fl = abs(float(prob.nonlin.f(lam)))
    e = prob.p.pconj - 1.0
    QoQ = prob.weight.Q_over_q

    def dev(r):
        s, ws = _gl_nodes(np.array([r]))
        return float(np.sum(ws * np.abs(np.asarray(QoQ(s)) * fl) ** e))

    lo, hi = 1e-12, 1e-2
    while dev(hi) < target and hi < 1.0:
        hi *= 4.0
    if dev(hi) < target:
        return min(hi, 1.0)
    while dev(lo) > target and lo > 1e-300:
        lo *= 1e-3
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if dev(mid) > target:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1.0 + 1e-6:
            break
    return lo


def startup(prob: Problem, lam: float, r1: float | None = None, max_shrinks: int = 20):
    """State ``(r1, v(r1), w(r1))`` from the integral form of the equation near ``r = 0``."""
    lam = float(lam)
    fl = float(prob.nonlin.f(lam))
    if r1 is None:
        r1 = 1e-3 if fl == 0.0 else _auto_radius(prob, lam, 1e-6 * abs(lam))
    if fl == 0.0:
        return r1, lam, 0.0
    for _ in range(max_shrinks + 1):
        v, w, corr, _ = _startup_profile(prob, lam, r1)
        if corr <= 1e-3 * abs(lam) and math.isfinite(v) and math.isfinite(w):
            return r1, v, w
        r1 *= 0.5
    raise StartupError(f"startup radius did not converge after {max_shrinks} shrinks")


# --------------------------------------------------------------------------- Dormand-Prince 5(4)

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _dp_step(rhs, r, y, k1, h):
    ks = [k1]
    for i in range(1, 7):
        a = _A[i]
        yi = tuple(y[c] + h * sum(a[j] * ks[j][c] for j in range(i) if a[j] != 0.0) for c in range(4))
        ks.append(rhs(r + _C[i] * h, yi))
        if i == 6:
            y_new = yi
    err = tuple(h * sum(_E[j] * ks[j][c] for j in range(7) if _E[j] != 0.0) for c in range(4))
    return y_new, ks[6], err


def _check_finite(y):
    for x in y:
        if not math.isfinite(x):
            raise IntegrationDomainError("input-domain error: non-finite value from f or q")


def solve(prob: Problem, lam: float, opts: SolveOptions | None = None) -> Trajectory:
    """Integrate from the startup radius until a terminal condition."""
    opts = opts or SolveOptions()
    lam = float(lam)
    if lam == 0.0 or not math.isfinite(lam):
        raise ValueError("lambda must be nonzero")
    pe = prob.p
    nl = prob.nonlin
    flags = {}
    if (lam > 0 and lam <= nl.beta_plus) or (lam < 0 and lam >= nl.beta_minus):
        flags["below_beta"] = True
        log.warning("lambda=%g does not exceed |beta|; no sign change is possible", lam)
    # the origin is reachable at finite r only if |F|^{-1/p} is integrable at 0
    reachable = nl.origin_reachable(pe.p)
    rhs = make_rhs(prob)
    fscal, dlog_s = nl.scalar_f(), prob.weight.scalar_dlog()
    # the expansion is used over a stretch well inside its accuracy range
    s_crit = _crit_stretch(pe.pconj, opts.rel_tol)
    Ffun = nl.scalar_F()
    pc = pe.pconj
    ratio = pe.p / pc
    kinks = tuple(float(b) for b in getattr(nl, "kinks", ()))

    def E_of(y):
        return abs(y[1]) ** pc / pc + Ffun(y[0])

    r1, v1, w1 = startup(prob, lam, opts.startup_radius)
    hint = 0.0 if lam > 0 else pi_p(pe)
    th1 = p_polar_from_cartesian(v1, w1, pe, hint).theta if (v1 != 0.0 or w1 != 0.0) else hint
    y = (v1, w1, th1, 0.0)
    r = r1
    k1 = rhs(r, y)
    _check_finite(k1)

    R, Y, K, EE = [r], [y], [k1], [E_of(y)]
    nodes, crit = [], []
    terminal, message, dz = REACHED_R_MAX, "", None
    half = 0.5 * pi_p(pe)
    theta_dev = 0.0
    sign_v = 1.0 if v1 > 0 else -1.0
    sign_w = -sign_v if w1 != 0.0 else 0.0
    stats = {"accepted": 0, "rejected": 0, "landings": 0, "startup_radius": r1}

    if nl.f(lam) == 0.0:
        # constant solution
        yT = (lam, 0.0, 0.0, 0.0)
        R.append(opts.r_max)
        Y.append(yT)
        K.append(rhs(opts.r_max, yT))
        EE.append(E_of(yT))
        return _assemble(lam, pe.p, R, Y, K, EE, nodes, crit, None, REACHED_R_MAX, "constant solution", flags, stats,
                         VectorRHS(prob))

    h = min(0.1 * r1, opts.r_max - r)
    err_prev = 1e-4
    rtol, atol = opts.rel_tol, opts.abs_tol
    n_steps = 0
    while True:
        if r >= opts.r_max:
            terminal = REACHED_R_MAX
            break
        if n_steps >= opts.max_steps:
            terminal, message = STEP_FAILURE, "maximum number of steps exceeded"
            break
        h = min(h, opts.r_max - r)
        if h <= 1e-14 * max(r, 1.0):
            terminal, message = STEP_FAILURE, f"step size underflow at r={r:.6g}"
            break
        y_new, k7, err = _dp_step(rhs, r, y, k1, h)
        _check_finite(y_new)
        en = 0.0
        for c in range(4):
            sc = atol + rtol * max(abs(y[c]), abs(y_new[c]))
            en += (err[c] / sc) ** 2
        en = math.sqrt(en / 4.0)
        n_steps += 1
        if en > 1.0:
            stats["rejected"] += 1
            h *= max(0.2, 0.9 * en ** -0.2)
            continue

        # events: sign changes of v (nodes) and w (critical points)
        cross_v = y_new[0] != 0.0 and math.copysign(1.0, y_new[0]) != sign_v
        cross_w = y_new[1] != 0.0 and sign_w != 0.0 and math.copysign(1.0, y_new[1]) != sign_w
        if sign_w == 0.0 and y_new[1] != 0.0:
            sign_w = math.copysign(1.0, y_new[1])
        event = None
        kink = next((b for b in kinks if (abs(y[0]) - b) * (abs(y_new[0]) - b) < 0.0), None)
        if kink is not None and not (cross_v or cross_w):
            # f' jumps at |v| = kink: end the step there so no step straddles it
            hs = _land_on(lambda s: abs(_dp_step(rhs, r, y, k1, s)[0][0]) - kink, h)
            if hs < h:
                y_new, k7, _ = _dp_step(rhs, r, y, k1, hs)
                h = hs
                stats["landings"] += 1
            h_used = h
        elif cross_v or cross_w:
            cands = []
            for ch, crossed, sg in ((0, cross_v, sign_v), (1, cross_w, sign_w)):
                if crossed:
                    hs = _land(rhs, r, y, k1, h, ch, sg)
                    cands.append((hs, ch))
            hs, ch = min(cands)
            bridged = None
            if ch == 1 and pe.p > 2.0:
                if hs > 2.0 * s_crit:
                    # retry with an error-controlled step ending short of the critical point
                    h = hs - s_crit
                    continue
                # close enough: bridge with linear w
                bridged = _reach_critical_point(y, k1, pc, 10.0 * s_crit)
            if bridged is not None:
                h_used, y_new = bridged
                stats["landings"] += 1
            elif hs < h:
                y_new, k7, _ = _dp_step(rhs, r, y, k1, hs)
                stats["landings"] += 1
                h_used = hs
            else:
                h_used = h
            y_new = tuple(0.0 if c == ch else y_new[c] for c in range(4))
            k7 = rhs(r + h_used, y_new)
            event = ch
        else:
            h_used = h

        r = r + h_used
        y = y_new
        k1 = k7
        E = E_of(y)
        R.append(r)
        Y.append(y)
        K.append(k1)
        EE.append(E)
        stats["accepted"] += 1

        if event == 0:
            nodes.append(r)
            sign_v = -sign_v
            # θ at a node sits on an odd multiple of π_p/2
            theta_dev = max(theta_dev, _axis_dev(y[2], half, odd=True))
        elif event == 1:
            crit.append(r)
            sign_w = -sign_w
            theta_dev = max(theta_dev, _axis_dev(y[2], half, odd=False))
            if pe.p > 2.0 and abs(nl.f(y[0])) < 1e-10:
                terminal, message = UNIQUENESS, "w = 0 and f(v) = 0 with p > 2"
                break
            if pe.p > 2.0:
                # v' = φ_{p'}(w) is not Lipschitz at w = 0 when p > 2: leave the
                # critical point along the local expansion instead of a RK step
                s = min(s_crit, 0.5 * (opts.r_max - r))
                if s > 0.0:
                    r, y = r + s, _leave_critical_point(y, k1, fscal(y[0]), dlog_s(r), pc, s)
                    k1 = rhs(r, y)
                    _check_finite(k1)
                    E = E_of(y)
                    R.append(r)
                    Y.append(y)
                    K.append(k1)
                    EE.append(E)
                    stats["analytic_steps"] = stats.get("analytic_steps", 0) + 1
                    # restart step control at the scale of the distance to the singular point
                    h = 2.0 * s
                    err_prev = 1e-4
                    continue

        rho = abs(y[0]) ** pe.p + ratio * abs(y[1]) ** pc
        if rho < opts.double_zero_tol and abs(E) < opts.double_zero_tol:
            if reachable:
                terminal, dz = DOUBLE_ZERO, r
                break
            flags["near_origin"] = r
        if len(nodes) > opts.max_nodes:
            terminal, message = MAX_NODES, f"more than {opts.max_nodes} nodes"
            break
        if opts.stop_on_settle and E < -opts.settle_tol:
            terminal = SETTLED
            break

        # PI step-size control
        en = max(en, 1e-10)
        fac = 0.9 * en ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
        h = h_used * min(5.0, max(0.2, fac)) if event is None else h * min(5.0, max(0.2, fac))
        err_prev = en

    stats["theta_axis_deviation"] = theta_dev
    if pe.p > 2.0:
        # steps this close to a critical point are resolved by the expansions only
        stats["critical_window"] = _CRIT_WINDOW * s_crit
    return _assemble(lam, pe.p, R, Y, K, EE, nodes, crit, dz, terminal, message, flags, stats, VectorRHS(prob))


_CRIT_WINDOW = 1e3


def _crit_stretch(pconj: float, rel_tol: float) -> float:
    return 1e-2 * rel_tol ** (1.0 / (pconj + 1.0))


def _reach_critical_point(y, k, pc, max_dist):
    """Distance to ``w = 0`` and the state there, assuming w linear over the gap.

    ``v`` gains ``∫ φ_{p'}(w) = -|w|^{p'}/(p' w')`` exactly for linear w.
    Returns None when the linear model does not reach zero within ``max_dist``.
    """
    v, w, th, D = y
    b = k[1]
    if b == 0.0 or w == 0.0:
        return None
    x0 = -w / b
    if not 0.0 < x0 <= max_dist:
        return None
    awp = abs(w) ** pc
    return x0, (v - awp / (pc * b), 0.0, th + x0 * k[2], D + k[3] * x0 / (pc + 1.0))


def _leave_critical_point(y, k, a, g0, pc, s):
    """State a distance ``s`` past a point with ``w = 0``, ``f(v) = a``.

    From ``w' = -g w - f(v)``: ``w ≈ -a s (1 - g0 s/2)``; integrating
    ``φ_{p'}(w)`` termwise gives v, and ``D' = g |w|^{p'}`` gives D.
    The neglected terms are ``O(s^{p'+1})`` in w and ``O(s^{2p'})`` in v.
    """
    e = pc - 1.0
    v0, _, th0, D0 = y
    sa = 1.0 if a > 0 else -1.0
    aa = abs(a)
    w = -a * s * (1.0 - 0.5 * g0 * s)
    v = v0 - sa * aa ** e * (s ** pc / pc - e * g0 * s ** (pc + 1.0) / (2.0 * (pc + 1.0)))
    D = D0 + g0 * aa ** pc * s ** (pc + 1.0) / (pc + 1.0)
    return (v, w, th0 + s * k[2], D)


def _axis_dev(theta, half, odd):
    """Distance of θ from the nearest multiple of π_p/2 with the required parity."""
    k = -theta / half
    target = 2.0 * round((k - 1.0) / 2.0) + 1.0 if odd else 2.0 * round(k / 2.0)
    return abs(k - target) * half


def _land(rhs, r, y, k1, h, ch, sign_before):
    """Sub-step ``h* in (0, h]`` where channel ``ch`` of the Runge-Kutta step vanishes."""
    def g(s):
        return sign_before * _dp_step(rhs, r, y, k1, s)[0][ch]

    lo = 1e-12 * h
    glo, ghi = g(lo), g(h)
    if glo <= 0.0:
        return lo
    if ghi > 0.0:
        return h
    return brentq(g, lo, h, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)


def _land_on(g, h):
    """Root of ``g`` on ``(0, h]``, given that g changes sign over the step."""
    lo = 1e-12 * h
    glo, ghi = g(lo), g(h)
    if glo == 0.0 or glo * ghi > 0.0:
        return h
    return brentq(g, lo, h, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)


def _assemble(lam, p, R, Y, K, EE, nodes, crit, dz, terminal, message, flags, stats, stepper=None):
    Ya = np.array(Y, dtype=float)
    Ka = np.array(K, dtype=float)
    return Trajectory(lam=lam, p=p, r=np.array(R), v=Ya[:, 0], w=Ya[:, 1], E=np.array(EE),
                      theta=Ya[:, 2], D=Ya[:, 3], dv=Ka[:, 0], dw=Ka[:, 1], dtheta=Ka[:, 2],
                      nodes=nodes, critical_points=crit, double_zero=dz, terminal=terminal,
                      message=message, flags=flags, stats=stats, dD=Ka[:, 3], stepper=stepper)


def trajectory_from_samples(prob: Problem, r, v, w, theta, events: dict | None = None) -> Trajectory:
    """Rebuild a :class:`Trajectory` from stored ``(r, v, w, θ)`` samples.

    Derivatives come from the right-hand side, ``D`` from the trapezoid rule
    on its rate, and the dense output re-steps from the stored samples.
    """
    r, v, w, theta = (np.asarray(a, dtype=float) for a in (r, v, w, theta))
    rhs = VectorRHS(prob)
    dv, dw, dth, dD = (np.asarray(a, dtype=float) for a in rhs(r, (v, w, theta, np.zeros_like(r))))
    D = np.concatenate([[0.0], np.cumsum(0.5 * (dD[1:] + dD[:-1]) * np.diff(r))])
    ev = events or {}
    lam = float(ev.get("lambda", v[0]))
    stats = {"reloaded": True}
    if prob.p.p > 2.0:
        stats["critical_window"] = _CRIT_WINDOW * _crit_stretch(prob.p.pconj, SolveOptions().rel_tol)
    E = np.asarray(energy(prob, v, w), dtype=float)
    return Trajectory(lam=lam, p=prob.p.p, r=r, v=v, w=w, E=E, theta=theta, D=D, dv=dv, dw=dw, dtheta=dth,
                      nodes=list(ev.get("nodes", [])), critical_points=list(ev.get("critical_points", [])),
                      double_zero=ev.get("double_zero"), terminal=ev.get("terminal", REACHED_R_MAX),
                      stats=stats, dD=dD, stepper=rhs)


def detect_double_zero(prob: Problem, v: float, w: float, tol: float = 1e-10) -> bool:
    """True when ``ρ < tol`` and ``|E| < tol`` at ``(v, w)`` and the origin is reachable at finite r.

    When ``|F|^{-1/p}`` is not integrable at 0 the origin is only approached
    asymptotically, so small ``ρ`` there is not a double zero.
    """
    pe = prob.p
    rho = abs(v) ** pe.p + (pe.p / pe.pconj) * abs(w) ** pe.pconj
    return rho < tol and abs(energy(prob, v, w)) < tol and prob.nonlin.origin_reachable(pe.p)
