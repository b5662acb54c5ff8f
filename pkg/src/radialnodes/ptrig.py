"""Generalized p-trigonometric functions and the odd power maps.

The pair ``(cos_{p'}, sin_{p'})`` solves

    dx/dθ = -φ_{p'}(y),   dy/dθ = φ_p(x),   x(0) = 1, y(0) = 0,

and conserves ``Φ_p(x) + Φ_{p'}(y) = 1/p``.  The half period is ``π_p``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature misses its requested tolerance."""


@dataclass(frozen=True)
class PExponent:
    """Exponent ``p > 1`` together with its Hölder conjugate."""

    p: float
    pconj: float = field(init=False)

    def __post_init__(self):
        p = float(self.p)
        if not p > 1.0 or not math.isfinite(p):
            raise ValueError(f"p must be a finite real > 1, got {self.p!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "pconj", p / (p - 1.0))

    def conjugate(self) -> "PExponent":
        return PExponent(self.pconj)


def as_pexp(p) -> PExponent:
    return p if isinstance(p, PExponent) else PExponent(p)


def phi_p(s, p):
    """Odd power map ``|s|^{p-2} s`` (zero at the origin for every p)."""
    p = as_pexp(p).p
    if np.ndim(s) == 0:
        s = float(s)
        if s == 0.0:
            return 0.0
        return math.copysign(abs(s) ** (p - 1.0), s)
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.abs(s) ** (p - 1.0)


def capital_phi_p(s, p):
    """``|s|^p / p``, a primitive of :func:`phi_p`."""
    p = as_pexp(p).p
    if np.ndim(s) == 0:
        return abs(float(s)) ** p / p
    return np.abs(np.asarray(s, dtype=float)) ** p / p


@lru_cache(maxsize=None)
def _pi_p_cached(p: float) -> float:
    pc = p / (p - 1.0)
    scale = (pc / p) ** (1.0 / p)
    # (1 - x^p)^{-1/p} = (1 - x)^{-1/p} * [(1 - x^p)/(1 - x)]^{-1/p}; the bracket is smooth on [0, 1]
    def smooth(x):
        if x >= 1.0:
            ratio = p
        else:
            ratio = (1.0 - x**p) / (1.0 - x)
        return ratio ** (-1.0 / p)

    val, err = quad(smooth, 0.0, 1.0, weight="alg", wvar=(0.0, -1.0 / p),
                    epsabs=0.0, epsrel=1e-13, limit=200)
    if not math.isfinite(val) or err > 1e-11 * abs(val):
        raise QuadratureError(f"pi_p quadrature for p={p} reached only {err:.3e}")
    return 2.0 * val / scale


def pi_p(p) -> float:
    """Half period ``π_p`` of ``(cos_{p'}, sin_{p'})``."""
    return _pi_p_cached(as_pexp(p).p)


class _PTrigTable:
    """Quarter-period table of ``(cos_{p'}, sin_{p'})``.

    Built once from a tight dense-output integration; evaluation uses the
    even/odd and half-period symmetries to reduce any angle to ``[0, π_p/2]``.
    Inside the quarter only the component that is smooth and well conditioned
    is interpolated; the other one follows from the conserved quantity.
    """

    def __init__(self, p: float, n: int = 16385):
        self.p = p
        self.pc = p / (p - 1.0)
        self.half = pi_p(p)
        self.quarter = 0.5 * self.half
        pc = self.pc

        def rhs(_, z):
            x, y = z
            return [-math.copysign(abs(y) ** (pc - 1.0), y),
                    math.copysign(abs(x) ** (p - 1.0), x)]

        theta = np.linspace(0.0, self.quarter, n)
        sol = solve_ivp(rhs, (0.0, self.quarter), [1.0, 0.0], method="DOP853",
                        t_eval=theta, rtol=1e-13, atol=1e-15)
        x = np.clip(sol.y[0], 0.0, 1.0)
        y = np.clip(sol.y[1], 0.0, None)
        x[-1] = 0.0
        y[0] = 0.0
        self.ymax = (pc / p) ** (1.0 / pc)
        y[-1] = self.ymax
        self.theta = theta
        self.x_spline = CubicHermiteSpline(theta, x, -y ** (pc - 1.0))
        self.y_spline = CubicHermiteSpline(theta, y, x ** (p - 1.0))
        # switch where Φ_p(x) = Φ_{p'}(y) = 1/(2p)
        self.x_switch = 0.5 ** (1.0 / p)
        self.theta_switch = brentq(lambda t: float(self.x_spline(t)) - self.x_switch,
                                   0.0, self.quarter, xtol=1e-15)

    def _x_from_y(self, y):
        return np.clip(1.0 - (self.p / self.pc) * y ** self.pc, 0.0, None) ** (1.0 / self.p)

    def _y_from_x(self, x):
        return np.clip((self.pc / self.p) * (1.0 - x ** self.p), 0.0, None) ** (1.0 / self.pc)

    def quarter_eval(self, t):
        t = np.asarray(t, dtype=float)
        near_zero = t <= self.theta_switch
        y = np.where(near_zero, self.y_spline(t), 0.0)
        x = np.where(near_zero, 0.0, self.x_spline(t))
        y = np.clip(y, 0.0, self.ymax)
        x = np.clip(x, 0.0, 1.0)
        x = np.where(near_zero, self._x_from_y(y), x)
        y = np.where(near_zero, y, self._y_from_x(x))
        return x, y

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        period = 2.0 * self.half
        t = np.mod(theta, period)
        # second half period: (x, y) -> (-x, -y)
        flip = t >= self.half
        t = np.where(flip, t - self.half, t)
        # second quarter: reflection θ -> π_p - θ gives (-x, y)
        mirror = t > self.quarter
        t = np.where(mirror, self.half - t, t)
        x, y = self.quarter_eval(t)
        x = np.where(mirror, -x, x)
        sign = np.where(flip, -1.0, 1.0)
        return sign * x, sign * y

    def quarter_angle(self, ax, ay):
        """Angle in ``[0, π_p/2]`` of the normalized point ``(ax, ay)``, both ≥ 0."""
        if ax >= self.x_switch:
            # y is the steep, well-conditioned coordinate here
            target, spline, lo, hi = ay, self.y_spline, 0.0, self.theta_switch
            if target <= 0.0:
                return 0.0
        else:
            target, spline, lo, hi = -ax, lambda s: -self.x_spline(s), self.theta_switch, self.quarter
            if ax <= 0.0:
                return self.quarter
        g = lambda s: float(spline(s)) - target
        glo, ghi = g(lo), g(hi)
        if glo >= 0.0:
            return lo
        if ghi <= 0.0:
            return hi
        return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


_tables: dict[float, _PTrigTable] = {}
_tables_lock = threading.Lock()


def _table(p: float) -> _PTrigTable:
    tab = _tables.get(p)
    if tab is None:
        with _tables_lock:
            tab = _tables.get(p)
            if tab is None:
                tab = _PTrigTable(p)
                _tables[p] = tab
    return tab


def cos_sin_pp(theta, p):
    """Return ``(cos_{p'}(θ), sin_{p'}(θ))``; vectorized over θ."""
    x, y = _table(as_pexp(p).p).evaluate(theta)
    if np.ndim(theta) == 0:
        return float(x), float(y)
    return x, y


@dataclass(frozen=True)
class PPolar:
    rho: float
    theta: float


def p_polar_from_cartesian(v: float, w: float, p, theta_hint: float = 0.0) -> PPolar:
    """Generalized polar coordinates of ``(v, w)``.

    ``rho = |v|^p + (p/p')|w|^{p'}``; the angle is taken on the branch
    closest to ``theta_hint`` so repeated calls along a path unwrap.
    """
    pe = as_pexp(p)
    v, w = float(v), float(w)
    if v == 0.0 and w == 0.0:
        raise ValueError("polar angle undefined at origin")
    rho = pe.p * (capital_phi_p(v, pe) + capital_phi_p(w, pe.pconj))
    x = v / rho ** (1.0 / pe.p)
    y = w / rho ** (1.0 / pe.pconj)
    tab = _table(pe.p)
    t0 = tab.quarter_angle(abs(x), abs(y))
    half = tab.half
    if x >= 0.0 and y >= 0.0:
        theta = t0
    elif x < 0.0 and y >= 0.0:
        theta = half - t0
    elif x < 0.0:
        theta = half + t0
    else:
        theta = 2.0 * half - t0
    period = 2.0 * half
    theta += period * round((theta_hint - theta) / period)
    return PPolar(rho=rho, theta=theta)


def p_cartesian_from_polar(rho: float, theta: float, p) -> tuple[float, float]:
    pe = as_pexp(p)
    c, s = cos_sin_pp(theta, pe)
    return rho ** (1.0 / pe.p) * c, rho ** (1.0 / pe.pconj) * s
