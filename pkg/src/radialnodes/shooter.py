"""Classification of amplitudes and bisection for k-node solutions.

An amplitude λ is classified from the terminal state of its trajectory:
``A(k)`` when the energy turns negative after k nodes (no further sign change
can occur), ``I(k)`` when a double zero is reached after k nodes, and
``Undecided`` otherwise.  ``λ_k`` is bracketed between an amplitude with at
most k nodes and one with at least k + 1.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import integrator as itg
from .integrator import SolveOptions, Trajectory, solve
from .problem import Problem

log = logging.getLogger(__name__)

A_TAG, I_TAG, UNDECIDED = "A", "I", "Undecided"


class ShootingError(RuntimeError):
    """Raised when no bracket is found; carries the sweep log."""

    def __init__(self, message, sweep_log=None):
        super().__init__(message)
        self.sweep_log = list(sweep_log or [])


@dataclass
class Classification:
    tag: str
    k: int
    evidence: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def decided(self) -> bool:
        return self.tag != UNDECIDED

    def label(self) -> str:
        return f"Undecided({self.reason})" if self.tag == UNDECIDED else f"{self.tag}({self.k})"

    def to_dict(self) -> dict:
        return {"tag": self.tag, "k": self.k, "label": self.label(), "reason": self.reason, "evidence": self.evidence}


def classify_trajectory(tr: Trajectory) -> Classification:
    ev = {"final_E": float(tr.E[-1]), "nodes": [float(x) for x in tr.nodes], "terminal": tr.terminal}
    k = tr.node_count
    if tr.terminal == itg.SETTLED:
        return Classification(A_TAG, k, {**ev, "settle_radius": float(tr.r[-1])})
    if tr.terminal == itg.DOUBLE_ZERO:
        return Classification(I_TAG, k, {**ev, "double_zero_radius": tr.double_zero})
    if tr.terminal == itg.REACHED_R_MAX and tr.message == "constant solution":
        return Classification(A_TAG, k, {**ev, "constant": True})
    return Classification(UNDECIDED, k, ev, reason=tr.terminal)


def classify(prob: Problem, lam: float, opts: SolveOptions | None = None) -> Classification:
    """Run :func:`solve` and map its terminal tag to A(k), I(k) or Undecided."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    try:
        tr = solve(prob, lam, opts)
    except (itg.IntegrationDomainError, itg.StartupError) as exc:
        return Classification(UNDECIDED, 0, {"error": str(exc)}, reason=itg.STEP_FAILURE)
    return classify_trajectory(tr)


def node_count(prob: Problem, lam: float, opts: SolveOptions | None = None) -> int:
    c = classify(prob, lam, opts)
    if not c.decided:
        raise ShootingError(f"lambda={lam:g} is Undecided ({c.reason}); increase r_max or max_nodes")
    return c.k


@dataclass(frozen=True)
class SearchOptions:
    lambda_start: float | None = None  # None: just above β+
    growth_factor: float = 1.25
    bisect_tol: float = 1e-10
    lambda_cap: float = 1e12
    max_iter: int = 200
    workers: int = 1
    batch: int = 8

    def __post_init__(self):
        if not self.growth_factor > 1.0:
            raise ValueError("growth_factor must exceed 1")
        if not self.bisect_tol > 0:
            raise ValueError("bisect_tol must be positive")


@dataclass
class ShootResult:
    k: int
    lambda_k: float
    bracket: tuple
    trajectory: Trajectory
    iterations: int
    classification: Classification
    sweep_log: list = field(default_factory=list)

    def to_dict(self, trajectory_ref: str | None = None) -> dict:
        return {"k": self.k, "lambda_k": self.lambda_k, "bracket": list(self.bracket),
                "iterations": self.iterations, "trajectory_ref": trajectory_ref,
                "classification_evidence": self.classification.to_dict(),
                "sweep_log": self.sweep_log}


def _classify_job(args):
    prob, lam, opts = args
    return classify(prob, lam, opts)


def _sweep(prob, k, opts, search, start):
    """Geometric sweep returning ``(lo, hi, log)`` with ``N(lo) <= k < N(hi)``."""
    sweep_log = []
    lam = start
    prev = None
    pool = ProcessPoolExecutor(max_workers=search.workers) if search.workers > 1 else None
    try:
        while lam <= search.lambda_cap:
            batch = [lam * search.growth_factor ** i for i in range(search.batch if pool else 1)]
            if pool:
                results = list(pool.map(_classify_job, [(prob, x, opts) for x in batch]))
            else:
                results = [classify(prob, x, opts) for x in batch]
            for x, c in zip(batch, results):
                sweep_log.append({"lambda": x, "class": c.label()})
                if c.decided and c.k <= k:
                    prev = x
                elif c.k >= k + 1:
                    # Undecided with at least k+1 nodes already counts as "above"
                    if prev is None:
                        raise ShootingError(f"sweep start {start:g} already has {c.k} > {k} nodes; lower lambda_start",
                                            sweep_log)
                    return prev, x, sweep_log
                else:
                    raise ShootingError(f"Undecided region at lambda={x:g} ({c.reason}) with {c.k} nodes", sweep_log)
            lam = batch[-1] * search.growth_factor
    finally:
        if pool:
            pool.shutdown()
    raise ShootingError(f"sweep reached lambda cap {search.lambda_cap:g} without {k + 1} nodes", sweep_log)


def find_k_node(prob: Problem, k: int, opts: SolveOptions | None = None,
                search: SearchOptions | None = None) -> ShootResult:
    """Bracket and bisect the amplitude where the node count steps from k to k + 1."""
    if k < 0:
        raise ValueError("k must be >= 0")
    opts = opts or SolveOptions()
    search = search or SearchOptions()
    beta = prob.nonlin.beta_plus
    start = search.lambda_start if search.lambda_start is not None else max(beta, 1e-8) * (1.0 + 1e-6)
    lo, hi, sweep_log = _sweep(prob, k, opts, search, start)
    c_lo = classify(prob, lo, opts)
    it = 0
    while hi - lo > search.bisect_tol * hi and it < search.max_iter:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        c = classify(prob, mid, opts)
        it += 1
        if c.decided and c.k <= k:
            lo, c_lo = mid, c
        elif c.k >= k + 1:
            hi = mid
        else:
            raise ShootingError(f"Undecided region at lambda={mid:g} ({c.reason}) during bisection", sweep_log)
    # the returned amplitude must carry exactly k nodes
    lam_k = 0.5 * (lo + hi)
    tr = solve(prob, lam_k, opts)
    c = classify_trajectory(tr)
    if c.k != k:
        lam_k, c = lo, c_lo
        tr = solve(prob, lam_k, opts)
    if tr.node_count != k:
        raise ShootingError(f"bracket [{lo:.17g}, {hi:.17g}] has no amplitude with exactly {k} nodes", sweep_log)
    return ShootResult(k=k, lambda_k=lam_k, bracket=(lo, hi), trajectory=tr, iterations=it,
                       classification=c, sweep_log=sweep_log)


def node_sweep(prob: Problem, lambdas, opts: SolveOptions | None = None, workers: int = 1):
    """Classifications over an amplitude grid, plus the list of non-monotone steps of N(λ)."""
    lambdas = [float(x) for x in lambdas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(_classify_job, [(prob, x, opts) for x in lambdas]))
    else:
        res = [classify(prob, x, opts) for x in lambdas]
    drops = [(lambdas[i], lambdas[i + 1]) for i in range(len(res) - 1) if res[i + 1].k < res[i].k]
    if drops:
        log.info("N(lambda) decreases across %s", drops)
    return res, drops


def support_radius(res: ShootResult) -> float:
    """Radius of the double zero, or of the last near-zero of ``(v, w)`` when the run stopped beside it."""
    tr = res.trajectory
    if tr.double_zero is not None:
        return float(tr.double_zero)
    p = tr.p
    rho = abs(tr.v) ** p + abs(tr.w) ** (p / (p - 1.0))
    return float(tr.r[int(rho.argmin())]) if math.isfinite(rho.min()) else math.nan
