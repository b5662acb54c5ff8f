"""Radial weights ``q`` and the two-weight reduction ``(a, b) -> q``.

Every weight exposes vectorized ``q``, ``dq``, ``dlog`` (``q'/q``), ``Q``
(``∫_0^r q``), ``h`` (``q^{p'}``) and ``qq_prime`` (``(Q/q)'``).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .ptrig import PExponent, as_pexp

_GL_X, _GL_W = leggauss(10)


class WeightError(ValueError):
    """A weight violates a structural requirement (e.g. (W1))."""


class Weight:
    """Base class; subclasses provide ``q`` and ``dlog`` and usually ``Q``."""

    kind = "user"

    def __init__(self, p):
        self.pexp = as_pexp(p) if p is not None else None

    def with_p(self, p) -> "Weight":
        self.pexp = as_pexp(p)
        return self

    def q(self, r):
        raise NotImplementedError

    def dlog(self, r):
        raise NotImplementedError

    def dq(self, r):
        return self.q(r) * self.dlog(r)

    def Q(self, r):
        r = np.asarray(r, dtype=float)
        return np.vectorize(lambda x: quad(self.q, 0.0, x, epsabs=0.0, epsrel=1e-12, limit=200)[0])(r)

    def Q_over_q(self, r):
        return self.Q(r) / self.q(r)

    def log_Q(self, r):
        return np.log(self.Q(r))

    def qq_prime(self, r):
        """``(Q/q)' = 1 - Q q' / q^2``."""
        return 1.0 - self.Q_over_q(r) * self.dlog(r)

    def h(self, r):
        return self.q(r) ** self.pexp.pconj

    def scalar_dlog(self):
        """Callable ``r -> q'(r)/q(r)`` on floats, for the integrator's inner loop."""
        return lambda r: float(self.dlog(r))

    def scalar_Q_over_q(self):
        return lambda r: float(self.Q_over_q(r))

    def dh(self, r):
        return self.pexp.pconj * self.h(r) * self.dlog(r)

    def describe(self) -> dict:
        return {"kind": self.kind}


class PowerWeight(Weight):
    """``q(r) = r^{N-1}``."""

    kind = "power"

    def __init__(self, N: float, p=None):
        super().__init__(p)
        N = float(N)
        if not N > 1.0:
            raise WeightError(f"invalid parameter: power weight needs N > 1, got {N}")
        self.N = N

    def q(self, r):
        return np.power(r, self.N - 1.0)

    def dlog(self, r):
        return (self.N - 1.0) / r

    def Q(self, r):
        return np.power(r, self.N) / self.N

    def log_Q(self, r):
        return self.N * np.log(r) - math.log(self.N)

    def scalar_dlog(self):
        c = self.N - 1.0
        return lambda r: c / r

    def scalar_Q_over_q(self):
        n = self.N
        return lambda r: r / n

    def Q_over_q(self, r):
        return np.asarray(r, dtype=float) / self.N if np.ndim(r) else float(r) / self.N

    def qq_prime(self, r):
        return np.full_like(np.asarray(r, dtype=float), 1.0 / self.N) if np.ndim(r) else 1.0 / self.N

    def h(self, r):
        return np.power(r, (self.N - 1.0) * self.pexp.pconj)

    def describe(self):
        return {"kind": self.kind, "N": self.N}


def make_power_weight(N: float, p=None) -> PowerWeight:
    return PowerWeight(N, p)


class TabulatedWeight(Weight):
    """User data ``(r_i, q_i)``; monotone interpolation of ``log q`` vs ``log r``.

    Below the first node the weight is continued as a pure power with the
    slope of the first interval.
    """

    kind = "tabulated"

    def __init__(self, r, q, p=None):
        super().__init__(p)
        r = np.asarray(r, dtype=float)
        q = np.asarray(q, dtype=float)
        if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0) or np.any(r <= 0) or np.any(q <= 0):
            raise WeightError("tabulated weight needs >= 4 increasing positive radii and positive values")
        self.r_nodes, self.q_nodes = r, q
        self._lr, self._lq = np.log(r), np.log(q)
        self._spline = PchipInterpolator(self._lr, self._lq, extrapolate=True)
        self._dspline = self._spline.derivative()
        self._k0 = (self._lq[1] - self._lq[0]) / (self._lr[1] - self._lr[0])
        if self._k0 <= 0:
            raise WeightError("tabulated weight must increase near r = 0")
        # Q on the nodes: power-law head plus Gauss-Legendre on each interval
        head = r[0] * q[0] / (self._k0 + 1.0)
        seg = np.array([self._gl(a, b) for a, b in zip(r[:-1], r[1:])])
        self._Q_nodes = head + np.concatenate([[0.0], np.cumsum(seg)])

    def _gl(self, a, b):
        x = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
        return 0.5 * (b - a) * float(np.dot(_GL_W, self.q(x)))

    def q(self, r):
        r = np.asarray(r, dtype=float)
        lr = np.log(r)
        out = np.where(lr < self._lr[0], self._lq[0] + self._k0 * (lr - self._lr[0]), self._spline(lr))
        out = np.exp(out)
        return float(out) if out.ndim == 0 else out

    def dlog(self, r):
        r = np.asarray(r, dtype=float)
        lr = np.log(r)
        out = np.where(lr < self._lr[0], self._k0, self._dspline(lr)) / r
        return float(out) if out.ndim == 0 else out

    def Q(self, r):
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        out = np.empty_like(flat)
        idx = np.searchsorted(self.r_nodes, flat, side="right") - 1
        for i, (x, j) in enumerate(zip(flat, idx)):
            if j < 0:
                out[i] = x * self.q(x) / (self._k0 + 1.0)
            else:
                out[i] = self._Q_nodes[j] + self._gl(self.r_nodes[j], x)
        return float(out[0]) if r.ndim == 0 else out.reshape(r.shape)

    def describe(self):
        return {"kind": self.kind, "nodes": int(self.r_nodes.size)}


# ---------------------------------------------------------------------------
# radial functions used as the raw weights a and b


class RadialFunction:
    """Positive C^1 function of r > 0 with its logarithmic derivative."""

    name = "radial"

    def __call__(self, r):
        return np.exp(self.log(r))

    def log(self, r):
        raise NotImplementedError

    def dlog(self, r):
        raise NotImplementedError

    def deriv(self, r):
        return self(r) * self.dlog(r)

    def integral(self, r):
        """``∫_0^r`` of the function, or ``None`` when no closed form exists."""
        return None

    def params(self) -> dict:
        return {}


class PowerFunction(RadialFunction):
    """``c r^e``."""

    name = "power"

    def __init__(self, exponent: float, coeff: float = 1.0):
        self.e = float(exponent)
        self.c = float(coeff)

    def log(self, r):
        return math.log(self.c) + self.e * np.log(r)

    def __call__(self, r):
        return self.c * np.power(r, self.e)

    def dlog(self, r):
        return self.e / np.asarray(r, dtype=float) if np.ndim(r) else self.e / r

    def integral(self, r):
        if self.e <= -1.0:
            return None
        return self.c * np.power(r, self.e + 1.0) / (self.e + 1.0)

    def params(self):
        return {"exponent": self.e, "coeff": self.c}


class UnifiedB(RadialFunction):
    """``r^{d+l-1} (r^s / (1 + r^s))^{σ/s}``, the b-weight of the unified family."""

    name = "unified"

    def __init__(self, d, l, sigma, s):
        self.d, self.l, self.sigma, self.s = float(d), float(l), float(sigma), float(s)
        if self.sigma < 0 or self.s <= 0:
            raise WeightError("unified weight needs sigma >= 0 and s > 0")

    def log(self, r):
        lr = np.log(r)
        # log(r^s/(1+r^s)) = -log1p(r^{-s})
        return (self.d + self.l - 1.0) * lr - (self.sigma / self.s) * np.log1p(np.exp(-self.s * lr))

    def dlog(self, r):
        r = np.asarray(r, dtype=float)
        x = np.exp(-self.s * np.log(r))  # r^{-s}
        out = (self.d + self.l - 1.0 + self.sigma * x / (1.0 + x)) / r
        return float(out) if out.ndim == 0 else out

    def params(self):
        return {"d": self.d, "l": self.l, "sigma": self.sigma, "s": self.s}


class MatukumaB(RadialFunction):
    """``r^{d-1} / (1 + r^σ)``."""

    name = "matukuma"

    def __init__(self, d, sigma):
        self.d, self.sigma = float(d), float(sigma)

    def log(self, r):
        lr = np.log(r)
        return (self.d - 1.0) * lr - np.log1p(np.exp(self.sigma * lr))

    def dlog(self, r):
        r = np.asarray(r, dtype=float)
        rs = np.power(r, self.sigma)
        out = ((self.d - 1.0) - self.sigma * rs / (1.0 + rs)) / r
        return float(out) if out.ndim == 0 else out

    def params(self):
        return {"d": self.d, "sigma": self.sigma}


class StellarB(RadialFunction):
    """``r^{d-1+σ-p'} / (1 + r^{p'})^{σ/p'}`` (generalized Matukuma model)."""

    name = "stellar"

    def __init__(self, d, sigma, p):
        self.d, self.sigma = float(d), float(sigma)
        self.pc = as_pexp(p).pconj

    def log(self, r):
        lr = np.log(r)
        pc = self.pc
        return (self.d - 1.0 + self.sigma - pc) * lr - (self.sigma / pc) * np.log1p(np.exp(pc * lr))

    def dlog(self, r):
        r = np.asarray(r, dtype=float)
        pc = self.pc
        rp = np.power(r, pc)
        out = ((self.d - 1.0 + self.sigma - pc) - self.sigma * rp / (1.0 + rp)) / r
        return float(out) if out.ndim == 0 else out

    def params(self):
        return {"d": self.d, "sigma": self.sigma}


RADIAL_FAMILIES = {
    "power": lambda prm, p: PowerFunction(prm["exponent"], prm.get("coeff", 1.0)),
    "unified": lambda prm, p: UnifiedB(prm["d"], prm["l"], prm["sigma"], prm["s"]),
    "matukuma": lambda prm, p: MatukumaB(prm["d"], prm["sigma"]),
    "stellar": lambda prm, p: StellarB(prm["d"], prm["sigma"], p),
}


class _WeightAsRadial(RadialFunction):
    """View a single weight ``q`` as a raw radial function (for ``a = b = q``)."""

    name = "weight"

    def __init__(self, w):
        self.w = w

    def log(self, r):
        return np.log(self.w.q(r))

    def __call__(self, r):
        return self.w.q(r)

    def dlog(self, r):
        return self.w.dlog(r)

    def integral(self, r):
        return self.w.Q(r)

    def params(self):
        return self.w.describe()


class _CumulativeTable:
    """``∫_0^r g`` for positive g on a geometric table.

    Nodes are spaced by a constant ratio; each interval is integrated with
    Gauss-Legendre, the head ``[0, r_0]`` by the local power law.  Values in
    between use cubic Hermite interpolation with the exact derivative ``g``.
    """

    def __init__(self, g, dlog_g, r_lo=1e-12, r_hi=1e8, per_decade=600):
        self.g = g
        n = int(round(per_decade * math.log10(r_hi / r_lo))) + 1
        r = np.geomspace(r_lo, r_hi, n)
        gr = g(r)
        kappa = float(r_lo * dlog_g(r_lo)) + 1.0  # g ~ r^{kappa - 1} near 0
        if not kappa > 0.0:
            raise WeightError("integrand is not integrable at r = 0")
        self.kappa_head = kappa
        head = r_lo * gr[0] / kappa
        a, b = r[:-1], r[1:]
        x = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (b + a)[:, None]
        seg = 0.5 * (b - a) * (g(x) @ _GL_W)
        vals = head + np.concatenate([[0.0], np.cumsum(seg)])
        self.r, self.vals, self.gr = r, vals, gr
        self._lr = np.log(r)
        self._spline = CubicHermiteSpline(r, vals, gr)
        self._dlog_g = dlog_g

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        lo = x < self.r[0]
        hi = x > self.r[-1]
        mid = ~(lo | hi)
        out[mid] = self._spline(x[mid])
        if np.any(lo):
            xl = np.maximum(x[lo], 0.0)
            pos = xl > 0.0
            vals = np.zeros_like(xl)
            vals[pos] = xl[pos] * self.g(xl[pos]) / self.kappa_head
            out[lo] = vals
        if np.any(hi):
            xh = x[hi]
            extra = np.array([quad(self.g, self.r[-1], t, epsabs=0.0, epsrel=1e-12, limit=200)[0] for t in xh])
            out[hi] = self.vals[-1] + extra
        return float(out) if out.ndim == 0 else out

    def inverse(self, t):
        """Solve ``∫_0^r g = t`` for r: table bracket, then Newton on the Hermite interpolant."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).astype(float)
        if np.any(flat < 0):
            raise ValueError("cumulative integral inverse needs t >= 0")
        out = np.zeros_like(flat)
        head = (flat > 0) & (flat < self.vals[0])
        tail = flat > self.vals[-1]
        mid = ~(head | tail) & (flat > 0)
        if np.any(head):
            th = flat[head]
            r = self.r[0] * (th / self.vals[0]) ** (1.0 / self.kappa_head)
            for _ in range(3):
                r = r - (r * self.g(r) / self.kappa_head - th) / self.g(r)
            out[head] = r
        if np.any(mid):
            tm = flat[mid]
            j = np.clip(np.searchsorted(self.vals, tm) - 1, 0, self.r.size - 2)
            a, b = self.r[j], self.r[j + 1]
            va, vb = self.vals[j], self.vals[j + 1]
            r = a + (b - a) * (tm - va) / (vb - va)
            for _ in range(6):
                r = np.clip(r - (self._spline(r) - tm) / self.g(r), a, b)
            out[mid] = r
        for i in np.nonzero(tail)[0]:
            out[i] = self._inverse_far(float(flat[i]))
        return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)

    def _inverse_far(self, t):
        r = self.r[-1]
        for _ in range(60):
            step = (self(r) - t) / self.g(r)
            r = max(r - step, 0.5 * r)
            if abs(step) <= 1e-15 * r:
                break
        return r

    def scalar_inverse(self):
        """Fast scalar inverse for inner loops (warm-started Newton)."""
        vals, rr, spline, g = self.vals, self.r, self._spline, self.g
        lo_v, hi_v = vals[0], vals[-1]
        inv = self.inverse

        def fn(t):
            if t <= lo_v or t >= hi_v:
                return float(inv(t))
            j = int(np.searchsorted(vals, t)) - 1
            a, b = rr[j], rr[j + 1]
            va, vb = vals[j], vals[j + 1]
            r = a + (b - a) * (t - va) / (vb - va)
            for _ in range(3):
                r -= (float(spline(r)) - t) / float(g(r))
            return r
        return fn


class WeightPair:
    """Raw weights ``a``, ``b`` of the divergence-form radial equation.

    ``chi(r) = ∫_0^r (b/a)^{1/p}``; the reduced weight lives in the
    variable ``t = chi(r)``.
    """

    def __init__(self, a: RadialFunction, b: RadialFunction, p, r_lo=1e-12, r_hi=1e8):
        self.a, self.b = a, b
        self.pexp = as_pexp(p)
        self.r_lo, self.r_hi = r_lo, r_hi
        self.identical = a is b or (type(a) is type(b) and a.params() == b.params() and a.params() != {})
        self._chi = None
        self._B = None

    # (b/a)^{1/p}
    def chi_density(self, r):
        return np.exp((self.b.log(r) - self.a.log(r)) / self.pexp.p)

    def _chi_density_dlog(self, r):
        return (self.b.dlog(r) - self.a.dlog(r)) / self.pexp.p

    @property
    def chi_table(self) -> _CumulativeTable:
        if self._chi is None:
            self._chi = _CumulativeTable(self.chi_density, self._chi_density_dlog, self.r_lo, self.r_hi)
        return self._chi

    @property
    def B_table(self) -> _CumulativeTable:
        if self._B is None:
            self._B = _CumulativeTable(self.b, self.b.dlog, self.r_lo, self.r_hi)
        return self._B

    def chi(self, r):
        if self.identical:
            return r
        return self.chi_table(r)

    def chi_inv(self, t):
        if self.identical:
            return t
        return self.chi_table.inverse(t)

    def B(self, r):
        closed = self.b.integral(r)
        return closed if closed is not None else self.B_table(r)

    def psi(self, r):
        """``(a'/(p a) + b'/(p' b)) (a/b)^{1/p}``."""
        pe = self.pexp
        return (self.a.dlog(r) / pe.p + self.b.dlog(r) / pe.pconj) / self.chi_density(r)

    def describe(self):
        return {"a": {"kind": self.a.name, **self.a.params()},
                "b": {"kind": self.b.name, **self.b.params()}}


class ReducedWeight(Weight):
    """``q = (a∘χ^{-1})^{1/p} (b∘χ^{-1})^{1/p'}`` in the variable ``t = χ(r)``.

    Uses ``q'/q = ψ∘χ^{-1}`` and ``Q = B∘χ^{-1}``.
    """

    kind = "reduced"

    def __init__(self, pair: WeightPair):
        super().__init__(pair.pexp)
        self.pair = pair
        self._identity = pair.identical

    def radius(self, t):
        return t if self._identity else self.pair.chi_inv(t)

    def _q_at(self, r):
        pe = self.pexp
        return np.exp(self.pair.a.log(r) / pe.p + self.pair.b.log(r) / pe.pconj)

    def q(self, t):
        return self._q_at(self.radius(t))

    def dlog(self, t):
        return self.pair.psi(self.radius(t))

    def Q(self, t):
        return self.pair.B(self.radius(t))

    def Q_over_q(self, t):
        r = self.radius(t)
        return self.pair.B(r) / self._q_at(r)

    def scalar_dlog(self):
        psi = self.pair.psi
        if self._identity:
            return lambda t: float(psi(t))
        inv = self.pair.chi_table.scalar_inverse()
        return lambda t: float(psi(inv(t)))

    def describe(self):
        return {"kind": self.kind, **self.pair.describe()}


def reduce_weights(pair: WeightPair, p=None) -> ReducedWeight:
    """Single weight equivalent to the pair under ``t = χ(r)``.

    Raises :class:`WeightError` when (W1) fails numerically: the density
    ``(b/a)^{1/p}`` is not integrable at 0, or χ stays bounded at infinity.
    """
    if p is not None and as_pexp(p) != pair.pexp:
        raise ValueError("p of the pair and of the reduction differ")
    from .hypotheses import check_w1  # local: hypotheses imports this module

    verdict = check_w1(pair)
    if verdict.holds == "fail":
        raise WeightError(f"(W1) violated: {verdict.evidence.get('reason', verdict.evidence)}")
    return ReducedWeight(pair)


def unified_pair(d, k, l, sigma, s, p) -> WeightPair:
    """``a = r^{d+k-1}``, ``b = r^{d+l-1}(r^s/(1+r^s))^{σ/s}``."""
    return WeightPair(PowerFunction(d + k - 1.0), UnifiedB(d, l, sigma, s), p)


def matukuma_pair(d, sigma, p) -> WeightPair:
    return WeightPair(PowerFunction(d - 1.0), MatukumaB(d, sigma), p)


def stellar_pair(d, sigma, p) -> WeightPair:
    return WeightPair(PowerFunction(d - 1.0), StellarB(d, sigma, p), p)


def k_hessian_pair(d, k) -> WeightPair:
    """Radial k-Hessian operator: ``p = k + 1``, ``a = r^{d-k}``, ``b = r^{d-1}``."""
    return WeightPair(PowerFunction(d - k), PowerFunction(d - 1.0), k + 1.0)


def unified_mu_star(d, k, l, sigma, p) -> float:
    """Closed form ``[(d+k-p) / (p (d+l+σ))]_+`` for the unified family."""
    return max((d + k - p) / (p * (d + l + sigma)), 0.0)


def effective_dimension(w: Weight, p=None, r0: float = 1e-2, levels: int = 40, tail: int = 10):
    """Estimate ``N`` from ``1/N = liminf_{r->0} (Q/q)'(r)``.

    Samples ``(Q/q)'`` at ``r0 2^{-j}``, Richardson-extrapolates successive
    pairs and takes the minimum over the tail.  Returns ``(N, mu_star, info)``
    with ``mu_star = [1/p - 1/N]_+``; ``info['inconclusive']`` flags a tail
    whose spread exceeds 1e-3.
    """
    pe = as_pexp(p) if p is not None else w.pexp
    r = r0 * 2.0 ** (-np.arange(levels + 1))
    g = np.asarray(w.qq_prime(r), dtype=float)
    rich = 2.0 * g[1:] - g[:-1]
    tail_vals = np.concatenate([g[-tail:], rich[-tail:]])
    liminf = float(np.min(tail_vals))
    spread = float(np.max(tail_vals) - np.min(tail_vals))
    N = 1.0 / liminf if liminf > 0 else math.inf
    mu_star = max(1.0 / pe.p - 1.0 / N, 0.0)
    info = {"samples": g.tolist(), "spread": spread, "inconclusive": spread > 1e-3}
    return N, mu_star, info
