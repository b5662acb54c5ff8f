"""Grid-based verdicts for the structural hypotheses on q, f and (a, b).

Each checker returns a :class:`Verdict` with a tri-state ``holds`` field.
A pass certifies the property on the sampled range only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .ptrig import as_pexp, phi_p

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

HYPOTHESES = ("Q1", "Q2", "Q3", "Q4", "f1", "f2", "SC", "H", "W1", "W2", "W3", "W4")


@dataclass
class Verdict:
    name: str
    holds: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "holds": self.holds, "evidence": _jsonable(self.evidence)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class ConditionReport:
    entries: dict = field(default_factory=dict)

    def add(self, v: Verdict):
        if v.name in self.entries:
            raise ValueError(f"duplicate hypothesis entry {v.name}")
        self.entries[v.name] = v

    def __getitem__(self, name) -> Verdict:
        return self.entries[name]

    def ordered(self):
        return [self.entries[n] for n in HYPOTHESES if n in self.entries]

    def failures(self):
        return [v for v in self.ordered() if v.holds == FAIL]

    @property
    def ok(self) -> bool:
        return not self.failures()

    def to_dict(self):
        return {"entries": [v.to_dict() for v in self.ordered()]}

    def table(self) -> str:
        lines = [f"{'hypothesis':<11}{'verdict':<14}evidence"]
        for v in self.ordered():
            ev = ", ".join(f"{k}={_short(val)}" for k, val in v.evidence.items() if not isinstance(val, (list, np.ndarray)))
            lines.append(f"{v.name:<11}{v.holds:<14}{ev}")
        return "\n".join(lines)


def _short(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _tail_trend(r, g, decades=2.0):
    """Log-log slope of ``g`` over the last ``decades`` of a geometric grid."""
    lr = np.log10(r)
    sel = lr >= lr[-1] - decades
    if np.count_nonzero(sel) < 3 or np.any(g[sel] <= 0):
        return float("nan")
    return float(np.polyfit(lr[sel], np.log10(g[sel]), 1)[0])


def _head_trend(r, g, decades=2.0):
    lr = np.log10(r)
    sel = lr <= lr[0] + decades
    if np.count_nonzero(sel) < 3 or np.any(g[sel] <= 0):
        return float("nan")
    return float(np.polyfit(lr[sel], np.log10(g[sel]), 1)[0])


def _bounded_band(name, r, g, slope_tol=0.02):
    """(Q3)/(W3)-type check: ``C1 <= g <= C2`` with both ends settling."""
    g = np.asarray(g, dtype=float)
    ev = {"C1": float(np.min(g)), "C2": float(np.max(g)), "r_min": float(r[0]), "r_max": float(r[-1])}
    if not np.all(np.isfinite(g)) or np.min(g) <= 0.0:
        return Verdict(name, FAIL, {**ev, "reason": "nonpositive or non-finite values"})
    s_hi, s_lo = _tail_trend(r, g), _head_trend(r, g)
    ev.update(slope_at_infinity=s_hi, slope_at_zero=s_lo)
    if abs(s_hi) > 0.2 or abs(s_lo) > 0.2:
        return Verdict(name, FAIL, {**ev, "reason": "unbounded drift at an end of the grid"})
    if abs(s_hi) > slope_tol or abs(s_lo) > slope_tol:
        return Verdict(name, INCONCLUSIVE, {**ev, "reason": "ends not settled on the grid"})
    return Verdict(name, PASS, ev)


def _divergent_increments(name, x, inc_fn, offsets=(0.1, 1.0, 10.0)):
    """(Q4)/(W4)-type check: ``k(x + r0) - k(x)`` grows without bound for each r0."""
    ev = {"offsets": list(offsets), "note": "tested only at the listed offsets r0"}
    worst = PASS
    for r0 in offsets:
        d = np.asarray(inc_fn(x, r0), dtype=float)
        tail = d[x >= x[-1] / 1e3] if np.any(x >= x[-1] / 1e3) else d
        ratio = float(tail[-1] / tail[0]) if tail[0] > 0 else float("inf")
        ev[f"r0={r0:g}"] = {"first": float(tail[0]), "last": float(tail[-1]), "ratio": ratio}
        increasing = bool(np.all(np.diff(tail) >= -1e-12 * np.abs(tail[1:])))
        if tail[-1] <= 0 or ratio <= 1.01:
            worst = FAIL
        elif not (increasing and ratio >= 2.0) and worst == PASS:
            worst = INCONCLUSIVE
    return Verdict(name, worst, ev)


# --------------------------------------------------------------------------- weights

def weight_grid(w, n_per_decade=20, lo=1e-6, hi=None):
    if hi is None:
        hi = 1e6
        pair = getattr(w, "pair", None)
        if pair is not None and not getattr(w, "_identity", False):
            hi = min(hi, 0.5 * float(pair.chi(pair.r_hi)))
        tab = getattr(w, "r_nodes", None)
        if tab is not None:
            hi = min(hi, float(tab[-1]))
            lo = max(lo, float(tab[0]) * 1e-2)
    n = int(n_per_decade * math.log10(hi / lo)) + 1
    return np.geomspace(lo, hi, n)


def check_q1(w, r) -> Verdict:
    q, dq = np.asarray(w.q(r)), np.asarray(w.dq(r))
    ev = {"min_q": float(q.min()), "min_dq": float(dq.min())}
    return Verdict("Q1", PASS if q.min() > 0 and dq.min() > 0 else FAIL, ev)


def check_q2(w, r) -> Verdict:
    g = np.asarray(w.dlog(r), dtype=float)
    inc = np.diff(g)
    ev = {"max_increment": float(inc.max())}
    return Verdict("Q2", PASS if np.all(inc < 0) else FAIL, ev)


def check_q3(w, r) -> Verdict:
    return _bounded_band("Q3", r, np.asarray(r * w.dlog(r), dtype=float))


def check_q4(w, r) -> Verdict:
    x = r[r >= 1.0] if np.count_nonzero(r >= 1.0) > 10 else r[-40:]
    x = x[x + 10.0 <= r[-1]] if np.count_nonzero(x + 10.0 <= r[-1]) > 10 else x
    return _divergent_increments("Q4", x, lambda x, r0: w.h(x + r0) - w.h(x))


def check_w1(pair, lo=None, hi=None) -> Verdict:
    lo = pair.r_lo if lo is None else lo
    hi = pair.r_hi if hi is None else hi
    r = np.geomspace(lo, hi, 200)
    a, b = pair.a(r), pair.b(r)
    # local exponent of the density (b/a)^{1/p}
    e = r * (pair.b.dlog(r) - pair.a.dlog(r)) / pair.pexp.p
    ev = {"density_exponent_at_0": float(e[0]), "density_exponent_at_inf": float(e[-1])}
    if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)) or a.min() <= 0 or b.min() <= 0:
        return Verdict("W1", FAIL, {**ev, "reason": "a or b not positive"})
    if e[0] <= -1.0 + 1e-9:
        return Verdict("W1", FAIL, {**ev, "reason": "(b/a)^(1/p) not integrable at 0"})
    if e[-1] < -1.0 - 1e-9:
        return Verdict("W1", FAIL, {**ev, "reason": "chi bounded at infinity"})
    return Verdict("W1", PASS, ev)


def check_w(pair, p=None):
    """(W2)-(W4) for a weight pair; (W1) should be checked first."""
    pe = pair.pexp if p is None else as_pexp(p)
    r = np.geomspace(1e-6, 1e6, 241)
    psi = np.asarray(pair.psi(r), dtype=float)
    inc = np.diff(psi)
    w2 = Verdict("W2", PASS if psi.min() > 0 and np.all(inc < 0) else FAIL,
                 {"min_psi": float(psi.min()), "max_increment": float(inc.max())})
    chi = np.asarray(pair.chi(r), dtype=float)
    w3 = _bounded_band("W3", r, chi * psi)
    w3.evidence["limit_estimate_at_0"] = float((chi * psi)[0])
    w3.evidence["limit_estimate_at_inf"] = float((chi * psi)[-1])

    def kfun(x):
        return np.exp((pe.pconj - 1.0) * pair.a.log(x) + pair.b.log(x))

    x = r[r >= 1.0]
    x = x[x + 10.0 <= r[-1]]
    w4 = _divergent_increments("W4", x, lambda x, r0: kfun(x + r0) - kfun(x))
    return [w2, w3, w4]


# --------------------------------------------------------------------------- f

def check_f1(nl) -> Verdict:
    f0 = float(nl.f(0.0))
    s = np.concatenate([-np.geomspace(1e-8, 1.0, 50), np.geomspace(1e-8, 1.0, 50)])
    vals = np.asarray(nl.f(s), dtype=float)
    ev = {"f(0)": f0, "max_|f|_near_0": float(np.max(np.abs(vals)))}
    ok = f0 == 0.0 and np.all(np.isfinite(vals)) and ev["max_|f|_near_0"] < 10.0
    return Verdict("f1", PASS if ok else FAIL, ev)


def check_f2(nl, s_max: float = 1e3) -> Verdict:
    bm, bp = nl.beta_minus, nl.beta_plus
    ev = {"beta_minus": bm, "beta_plus": bp, "F(beta_plus)": float(nl.F(bp)), "F(beta_minus)": float(nl.F(bm)),
          "s_max": s_max}
    inner = np.concatenate([np.linspace(bm, 0.0, 2001)[1:-1], np.linspace(0.0, bp, 2001)[1:-1]])
    Fin = np.asarray(nl.F(inner), dtype=float)
    right = np.geomspace(bp, max(s_max, 2 * bp), 2001)
    left = -np.geomspace(-bm, max(s_max, -2 * bm), 2001)
    fr, fl = np.asarray(nl.f(right), dtype=float), np.asarray(nl.f(left), dtype=float)
    ev.update(max_F_inside=float(Fin.max()), min_f_right=float(fr.min()), max_f_left=float(fl.max()))
    ok = (bm < 0 < bp and abs(ev["F(beta_plus)"]) <= 1e-10 * max(1.0, abs(bp))
          and abs(ev["F(beta_minus)"]) <= 1e-10 * max(1.0, abs(bm))
          and Fin.max() < 0 and fr.min() > 0 and fl.max() < 0)
    return Verdict("f2", PASS if ok else FAIL, ev)


# --------------------------------------------------------------------------- (SC)

def _key(sl):
    sign, lg = sl
    return (sign, sign * lg)


def _sc_product(nl, w, pe, s, alpha, mu, n_inner):
    """``inf_{s1,s2 in [αs,s]} (F(s2) - μ s2 f(s2)) Q(((1-α)s/φ_{p'}(f(s1)))^{1/p'})``.

    The two factors depend on separate variables, so the infimum of the
    product is attained at a combination of the extrema of each factor.
    Everything is carried as (sign, log|.|) so very large amplitudes are safe.
    """
    grid = np.linspace(alpha * s, s, n_inner)
    t1 = [nl.log_defect(float(x), mu) for x in grid]
    t1_lo, t1_hi = min(t1, key=_key), max(t1, key=_key)
    try:
        logf = np.array([nl.log_f(float(x)) for x in grid])
    except ValueError:
        raise ValueError("(f2) violated: f(s1) <= 0 on [alpha s, s]") from None
    log_arg = (math.log(1.0 - alpha) + math.log(s) - (pe.pconj - 1.0) * logf) / pe.pconj
    logq = np.asarray(w.log_Q(np.exp(log_arg)), dtype=float) if np.all(log_arg > -700) else \
        np.array([_log_Q_small(w, la) for la in log_arg])
    q_lo, q_hi = float(logq.min()), float(logq.max())
    cands = [(t[0], t[1] + lq) for t in (t1_lo, t1_hi) for lq in (q_lo, q_hi)]
    sign, lg = min(cands, key=_key)
    if sign == 0.0:
        return 0.0
    return sign * math.exp(min(lg, 700.0))


def _log_Q_small(w, log_x):
    if hasattr(w, "N") and type(w).__name__ == "PowerWeight":
        return w.N * log_x - math.log(w.N)
    return float(np.log(w.Q(math.exp(log_x))))


def sc_precondition(w, pe, mu, r0=1e-2, levels=30):
    r = r0 * 2.0 ** (-np.arange(levels))
    vals = mu + np.asarray(w.qq_prime(r), dtype=float) - 1.0 / pe.p
    return float(vals.min()), r


def check_sc(prob, alpha: float = 0.5, mu: float | None = None, s_grid=None, per_decade: int = 200) -> Verdict:
    """Divergence test of the (SC) product along a geometric amplitude grid.

    pass: last-decade minimum is positive and at least 10x the first-decade
    maximum.  fail: last-decade maximum at most 2x the first-decade peak
    magnitude.  Otherwise inconclusive.
    """
    pe, nl, w = prob.p, prob.nonlin, prob.weight
    if mu is None:
        # (Q/q)' may approach 1/N from below, so μ* itself can miss the
        # small-r condition on every interval; raise μ by the worst deficit
        deficit, _ = sc_precondition(w, pe, prob.mu_star)
        mu = prob.mu_star + max(0.0, -deficit)
    mu = float(mu)
    if mu < prob.mu_star - 1e-9:
        raise ValueError("mu must be >= mu_star")
    if s_grid is None:
        lo = max(1e2, 4.0 * nl.beta_plus)
        s_grid = np.geomspace(lo, lo * 1e98, 99 * 4 + 1)
    s_grid = np.asarray(s_grid, dtype=float)
    pre_min, _ = sc_precondition(w, pe, mu)
    n_inner = max(int(per_decade * math.log10(1.0 / alpha)) + 1, 50)
    prods = np.array([_sc_product(nl, w, pe, s, alpha, mu, n_inner) for s in s_grid])
    ls = np.log10(s_grid)
    first = prods[ls <= ls[0] + 1.0]
    last = prods[ls >= ls[-1] - 1.0]
    first_peak = float(np.max(np.abs(first)))
    first_max = float(np.max(first))
    ev = {"alpha": alpha, "mu": mu, "precondition_min": pre_min, "grid_points_per_decade": per_decade,
          "s_min": float(s_grid[0]), "s_max": float(s_grid[-1]),
          "first_decade_max": first_max, "last_decade_min": float(last.min()),
          "last_decade_max": float(last.max()), "products": prods.tolist()}
    if pre_min < -1e-9:
        return Verdict("SC", FAIL, {**ev, "reason": "mu + (Q/q)' - 1/p < 0 near r = 0"})
    if last.min() > 0 and last.min() >= 10.0 * max(first_max, 0.0) and last.min() > 0:
        if first_max > 0 or last.min() > 0:
            return Verdict("SC", PASS, ev)
    if last.max() <= 2.0 * first_peak:
        return Verdict("SC", FAIL, {**ev, "reason": "product stays bounded"})
    return Verdict("SC", INCONCLUSIVE, ev)


# --------------------------------------------------------------------------- (H)

def check_H(prob) -> Verdict:
    pe, nl, w = prob.p, prob.nonlin, prob.weight
    ev = {}
    integrable = True
    for side, ratio in zip(("right", "left"), nl.primitive_tail_ratios(pe.p)):
        ev[f"tail_ratio_{side}"] = ratio
        integrable &= ratio < 0.99
    ev["compact_support_branch"] = bool(integrable)
    r = weight_grid(w, n_per_decade=10, lo=1e-3)
    hp = np.asarray(w.dh(r), dtype=float)
    nondecr = bool(np.all(np.diff(hp) >= -1e-12 * np.abs(hp[1:])))
    grows = _tail_trend(r, hp) > 0.02 if np.all(hp > 0) else False
    ev.update(h_prime_nondecreasing=nondecr, h_prime_tail_slope=_tail_trend(r, hp) if np.all(hp > 0) else None)
    second = nondecr and grows
    ev["h_branch"] = bool(second)
    if integrable:
        return Verdict("H", PASS, {**ev, "branch": "integrable |F|^(-1/p)"})
    if second:
        return Verdict("H", PASS, {**ev, "branch": "h' nondecreasing and unbounded"})
    return Verdict("H", INCONCLUSIVE, ev)


# --------------------------------------------------------------------------- report

def check_all(prob, sc_kwargs=None, s_max=1e3) -> ConditionReport:
    rep = ConditionReport()
    w = prob.weight
    r = weight_grid(w)
    for fn in (check_q1, check_q2, check_q3, check_q4):
        rep.add(fn(w, r))
    rep.add(check_f1(prob.nonlin))
    rep.add(check_f2(prob.nonlin, s_max=s_max))
    try:
        rep.add(check_sc(prob, **(sc_kwargs or {})))
    except ValueError as exc:
        rep.add(Verdict("SC", FAIL, {"reason": str(exc)}))
    rep.add(check_H(prob))
    pair = prob.pair
    if pair is None:
        from .weights import WeightPair, _WeightAsRadial
        pair = WeightPair(_WeightAsRadial(w), _WeightAsRadial(w), prob.p)
    w1 = check_w1(pair)
    rep.add(w1)
    if w1.holds == FAIL:
        for n in ("W2", "W3", "W4"):
            rep.add(Verdict(n, INCONCLUSIVE, {"reason": "(W1) failed"}))
    else:
        for v in check_w(pair, prob.p):
            rep.add(v)
    return rep
