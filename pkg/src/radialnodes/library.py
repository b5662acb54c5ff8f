"""Built-in problem library: desk-scale configurations with a chosen amplitude.

Each entry is a config document in the JSON schema accepted by
:func:`radialnodes.problem.problem_from_dict`; its ``solver`` block carries the
amplitude and any solver overrides.  ``subcritical`` marks entries whose
nonlinearity grows slower than the critical exponent of the weight.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .integrator import SolveOptions
from .problem import Problem, problem_from_dict


def _power(N):
    return {"kind": "power", "params": {"N": N}}


def _dp(gamma, m):
    return {"kind": "double_power", "params": {"gamma": gamma, "m": m}}


def _cfg(name, p, weight, nonlin, lam, **solver):
    return {"name": name, "p": p, "weight": weight, "nonlinearity": nonlin,
            "solver": {"lambda": lam, **solver}}


_R2 = [0.001 * 1.2 ** i for i in range(80)]

_ENTRIES = [
    (_cfg("canonical_lam3", 2, _power(3), _dp(3, 1), 3.0), True),
    (_cfg("canonical_lam10", 2, _power(3), _dp(3, 1), 10.0), True),
    (_cfg("canonical_lam100", 2, _power(3), _dp(3, 1), 100.0), True),
    (_cfg("canonical_lam1e4", 2, _power(3), _dp(3, 1), 1e4, r_max=200, max_nodes=1000), True),
    (_cfg("canonical_below_beta", 2, _power(3), _dp(3, 1), 1.2, r_max=20, stop_on_settle=False), True),
    (_cfg("canonical_near_ground_state", 2, _power(3), _dp(3, 1), 4.3373876, r_max=40), True),
    (_cfg("compact_m_half", 2, _power(3), _dp(3, 0.5), 10.0), True),
    (_cfg("dim_2_5", 2, _power(2.5), _dp(3, 1), 6.0), True),
    (_cfg("dim4_gamma2_5", 2, _power(4), _dp(2.5, 1), 8.0), True),
    (_cfg("p3_dim4", 3, _power(4), _dp(4, 1.5), 5.0), True),
    (_cfg("p1_5_dim3", 1.5, _power(3), _dp(1.8, 0.5), 5.0), True),
    (_cfg("p4_dim5", 4, _power(5), _dp(6, 2), 3.0), True),
    (_cfg("power_fill_gamma3", 2, _power(3), {"kind": "power", "params": {"gamma": 3, "beta": 1}}, 10.0), True),
    (_cfg("power_fill_pstar_minus_1", 2, _power(3), {"kind": "power", "params": {"gamma": 4, "beta": 1}}, 5.0), True),
    (_cfg("critical_extended_d3", 2, _power(3), {"kind": "critical_extended", "params": {"d": 3}}, 10.0), False),
    (_cfg("critical_extended_d4", 2, _power(4), {"kind": "critical_extended", "params": {"d": 4}}, 10.0), False),
    (_cfg("power_log_d3", 2, _power(3), {"kind": "power_log", "params": {"d": 3, "zeta": 4, "s0": 6}}, 20.0), True),
    (_cfg("aubin_talenti", 2, _power(4), {"kind": "power", "params": {"gamma": 3, "beta": 0.1}}, 1.0, r_max=5), False),
    (_cfg("matukuma_sigma1", 2, {"kind": "matukuma", "params": {"d": 3, "sigma": 1}}, _dp(3, 1), 5.0), True),
    (_cfg("unified_k1", 2, {"kind": "unified", "params": {"d": 3, "k": 1, "l": 0, "sigma": 1, "s": 1}}, _dp(2.5, 1), 5.0),
     True),
    (_cfg("k_hessian_d3", 3, {"kind": "k_hessian", "params": {"d": 3, "k": 2}}, _dp(4, 1), 4.0), True),
    (_cfg("tabulated_weight", 2, {"kind": "tabulated", "params": {"r": _R2, "q": [r * r for r in _R2]}}, _dp(3, 1), 5.0),
     True),
    (_cfg("tabulated_nonlinearity", 2, _power(3),
          {"kind": "tabulated", "params": {"s": [-4 + 0.05 * i for i in range(161)],
                                           "f": [(-4 + 0.05 * i) ** 3 - (-4 + 0.05 * i) for i in range(161)]}}, 3.0),
     True),
]


@dataclass(frozen=True)
class LibraryEntry:
    name: str
    config: dict
    subcritical: bool

    @property
    def lam(self) -> float:
        return float(self.config["solver"]["lambda"])

    def problem(self) -> Problem:
        return problem_from_dict(copy.deepcopy(self.config))

    def options(self) -> SolveOptions:
        return solver_options(self.config)


def solver_options(cfg: dict, **overrides) -> SolveOptions:
    """SolveOptions from a config's ``solver`` block (unknown keys ignored)."""
    s = dict(cfg.get("solver", {}))
    fields = {"r_max", "rel_tol", "abs_tol", "startup_radius", "double_zero_tol", "settle_tol", "max_nodes",
              "stop_on_settle", "max_steps"}
    kw = {k: s[k] for k in fields if k in s}
    if "r_max" not in kw and "grids" in cfg and "r_max" in cfg["grids"]:
        kw["r_max"] = cfg["grids"]["r_max"]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SolveOptions(**kw)


LIBRARY = tuple(LibraryEntry(c["name"], c, sc) for c, sc in _ENTRIES)


def entry(name: str) -> LibraryEntry:
    for e in LIBRARY:
        if e.name == name:
            return e
    raise KeyError(f"unknown library entry {name!r}")
