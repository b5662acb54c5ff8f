"""The :class:`Problem` bundle and its construction from JSON documents.

Config schema (all keys except ``p``, ``weight`` and ``nonlinearity`` optional)::

    {
      "name": "canonical",
      "p": 2,
      "weight": {"kind": "power", "params": {"N": 3}},
        | {"pair": {"a_kind": "power", "a_params": {"exponent": 2},
                    "b_kind": "matukuma", "b_params": {"d": 3, "sigma": 1}}}
      "nonlinearity": {"kind": "double_power", "params": {"gamma": 3, "m": 1}},
      "grids": {"r_min": 1e-6, "r_max": 100, "s_max": 1000},
      "solver": {"lambda": 3.0, "r_max": 100, "rel_tol": 1e-10, "abs_tol": 1e-12},
      "shoot": {"k": 2, "lambda_start": 1.5, "growth_factor": 1.25, "bisect_tol": 1e-10}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import nonlinearities as nlm
from . import weights as wm
from .ptrig import PExponent, as_pexp


class ConfigError(ValueError):
    """Malformed or unsupported problem description."""


@dataclass(frozen=True)
class Grids:
    r_min: float = 1e-6
    r_max: float = 100.0
    s_max: float = 1e3


@dataclass(frozen=True)
class Problem:
    p: PExponent
    weight: wm.Weight
    nonlin: nlm.Nonlinearity
    N_eff: float
    mu_star: float
    pair: wm.WeightPair | None = None
    grids: Grids = field(default_factory=Grids)
    name: str = ""
    config: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.N_eff > 1.0:
            raise ConfigError(f"effective dimension must exceed 1, got {self.N_eff}")
        if not (0.0 <= self.mu_star <= 1.0 / self.p.p + 1e-12):
            raise ConfigError(f"mu_star out of range: {self.mu_star}")


def make_problem(p, weight: wm.Weight, nonlin: nlm.Nonlinearity, pair=None, grids=None, name="", config=None) -> Problem:
    pe = as_pexp(p)
    weight.with_p(pe)
    if isinstance(weight, wm.PowerWeight):
        N = weight.N
        mu = max(1.0 / pe.p - 1.0 / N, 0.0)
    else:
        N, mu, _ = wm.effective_dimension(weight, pe)
    return Problem(p=pe, weight=weight, nonlin=nonlin, N_eff=N, mu_star=mu, pair=pair,
                   grids=grids or Grids(), name=name, config=config)


# --------------------------------------------------------------------------- registries

def _req(params, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"missing parameter(s) {missing}")
    return [params[k] for k in keys]


WEIGHT_KINDS = {
    "power": lambda prm, p: (wm.PowerWeight(*_req(prm, "N")), None),
    "tabulated": lambda prm, p: (wm.TabulatedWeight(*_req(prm, "r", "q")), None),
}

PAIR_PRESETS = {
    "unified": lambda prm, p: wm.unified_pair(*_req(prm, "d", "k", "l", "sigma", "s"), p),
    "matukuma": lambda prm, p: wm.matukuma_pair(*_req(prm, "d", "sigma"), p),
    "stellar": lambda prm, p: wm.stellar_pair(*_req(prm, "d", "sigma"), p),
    "k_hessian": lambda prm, p: _k_hessian(prm, p),
}

NONLIN_KINDS = {
    "double_power": lambda prm, p: nlm.DoublePower(*_req(prm, "gamma", "m")),
    "power": lambda prm, p: nlm.PowerFill(_req(prm, "gamma")[0], prm.get("beta", 1.0)),
    "critical_extended": lambda prm, p: nlm.CriticalExtended(_req(prm, "d")[0], prm.get("beta", 1.0)),
    "power_log": lambda prm, p: nlm.PowerLog(_req(prm, "d")[0], prm.get("p", p.p), *_req(prm, "zeta", "s0")),
    "tabulated": lambda prm, p: nlm.TabulatedNonlinearity(*_req(prm, "s", "f")),
}


def _k_hessian(prm, p):
    d, k = _req(prm, "d", "k")
    if abs(p.p - (k + 1.0)) > 1e-12:
        raise ConfigError(f"k-Hessian weights need p = k + 1 = {k + 1}, got {p.p}")
    return wm.k_hessian_pair(d, k)


def _unknown(what, kind, table):
    return ConfigError(f"unknown {what} kind {kind!r}; supported: {', '.join(sorted(table))}")


def build_pair(spec: dict, p: PExponent) -> wm.WeightPair:
    if "kind" in spec:
        kind = spec["kind"]
        if kind not in PAIR_PRESETS:
            raise _unknown("weight pair", kind, PAIR_PRESETS)
        return PAIR_PRESETS[kind](spec.get("params", {}), p)
    a_kind, b_kind = spec.get("a_kind"), spec.get("b_kind")
    shared = spec.get("params", {})
    fam = wm.RADIAL_FAMILIES
    for k in (a_kind, b_kind):
        if k not in fam:
            raise _unknown("radial function", k, fam)
    a = fam[a_kind](spec.get("a_params", shared), p)
    b = fam[b_kind](spec.get("b_params", shared), p)
    return wm.WeightPair(a, b, p)


def problem_from_dict(cfg: dict) -> Problem:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    try:
        p = as_pexp(cfg["p"])
    except KeyError:
        raise ConfigError("missing key 'p'") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    wspec = cfg.get("weight")
    if not isinstance(wspec, dict):
        raise ConfigError("missing or malformed 'weight'")
    pair = None
    try:
        if "pair" in wspec:
            pair = build_pair(wspec["pair"], p)
            weight = wm.reduce_weights(pair, p)
        else:
            kind = wspec.get("kind")
            if kind in PAIR_PRESETS:
                pair = build_pair(wspec, p)
                weight = wm.reduce_weights(pair, p)
            elif kind in WEIGHT_KINDS:
                weight, _ = WEIGHT_KINDS[kind](wspec.get("params", {}), p)
            else:
                raise _unknown("weight", kind, {**WEIGHT_KINDS, **PAIR_PRESETS})
        nspec = cfg.get("nonlinearity")
        if not isinstance(nspec, dict):
            raise ConfigError("missing or malformed 'nonlinearity'")
        nkind = nspec.get("kind")
        if nkind not in NONLIN_KINDS:
            raise _unknown("nonlinearity", nkind, NONLIN_KINDS)
        nonlin = NONLIN_KINDS[nkind](nspec.get("params", {}), p)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed parameters: {exc}") from None
    g = cfg.get("grids", {})
    grids = Grids(**{k: float(v) for k, v in g.items() if k in ("r_min", "r_max", "s_max")})
    return make_problem(p, weight, nonlin, pair=pair, grids=grids, name=str(cfg.get("name", "")), config=cfg)


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON parse error: {exc}") from None


def load_problem(path) -> Problem:
    return problem_from_dict(load_config(path))


def energy(prob: Problem, v, w):
    """``E = |w|^{p'}/p' + F(v)``, equal to ``|v'|^p/p' + F(v)``."""
    pc = prob.p.pconj
    if np.ndim(w) == 0:
        return abs(float(w)) ** pc / pc + prob.nonlin.F(v)
    return np.abs(w) ** pc / pc + prob.nonlin.F(v)


def pstar(N: float, p) -> float:
    """Critical exponent ``Np/(N-p)`` (infinite when N <= p)."""
    pe = as_pexp(p)
    return N * pe.p / (N - pe.p) if N > pe.p else math.inf


def config_schema() -> dict[str, Any]:
    return {"weight": sorted({**WEIGHT_KINDS, **PAIR_PRESETS}),
            "radial_functions": sorted(wm.RADIAL_FAMILIES),
            "nonlinearity": sorted(NONLIN_KINDS)}
