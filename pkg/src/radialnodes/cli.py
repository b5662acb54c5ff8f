"""Batch command-line front end.

Subcommands ``solve``, ``shoot``, ``sweep``, ``check``, ``reduce`` and
``diag`` read a JSON problem config and write CSV/JSON outputs plus a run
manifest into ``--out``.  Exit codes: 0 success, 1 parse or solver failure,
2 hypothesis failure, 3 shooting bracket not found, 64 usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import hypotheses as hy
from . import integrator as itg
from . import io
from .library import solver_options
from .nonlinearities import NonlinearityError
from .problem import ConfigError, build_pair, load_config, problem_from_dict
from .ptrig import as_pexp
from .shooter import SearchOptions, ShootingError, find_k_node, node_sweep
from .weights import PowerWeight, ReducedWeight, WeightError

log = logging.getLogger("radialnodes")

EXIT_OK, EXIT_FAILURE, EXIT_HYPOTHESIS, EXIT_NOT_FOUND, EXIT_USAGE = 0, 1, 2, 3, 64



class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS defaults so the flags may appear before or after the subcommand
    g = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g.add_argument("--config", help="problem config JSON")
    g.add_argument("--out", help="output directory (default: ./out)")
    g.add_argument("--seedless", action="store_true",
                   help="accepted for scripts; no-op, since nothing here uses random numbers")
    g.add_argument("--tol-rel", type=float, help="relative integration tolerance")
    g.add_argument("--tol-abs", type=float, help="absolute integration tolerance")
    g.add_argument("--r-max", type=float, help="integration end radius")
    g.add_argument("--force", action="store_true", help="run even when hypothesis checks fail")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="radialnodes", description="Radial node solutions by shooting.", parents=[common])
    parser.add_argument("--version", action="version", version=f"radialnodes {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.add_argument("config_pos", nargs="?", metavar="CONFIG", help="problem config JSON")
        return sp

    sp = add("solve", "integrate one trajectory")
    sp.add_argument("--lambda", dest="lam", type=float, help="initial amplitude v(0)")
    sp.add_argument("--stride", type=float, help="resample the CSV on a uniform grid of this spacing")

    sp = add("shoot", "find the k-node amplitude")
    sp.add_argument("--k", type=int, help="number of nodes")
    sp.add_argument("--lambda-start", type=float)
    sp.add_argument("--bisect-tol", type=float)
    sp.add_argument("--workers", type=int, default=1)

    sp = add("sweep", "node counts over an amplitude grid")
    sp.add_argument("--lambdas", help="comma-separated amplitudes")
    sp.add_argument("--lambda-min", type=float)
    sp.add_argument("--lambda-max", type=float)
    sp.add_argument("--num", type=int, default=20)
    sp.add_argument("--workers", type=int, default=1)

    add("check", "evaluate the hypothesis checkers")

    sp = add("reduce", "tabulate the reduced weight of a weight pair")
    sp.add_argument("--t-min", type=float, default=1e-4)
    sp.add_argument("--t-max", type=float, default=1e3)
    sp.add_argument("--points", type=int, default=141)

    sp = add("diag", "trajectory certificates")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--lambda", dest="lam", type=float)
    src.add_argument("--traj", help="trajectory CSV written by solve/shoot")
    sp.add_argument("--rotation", action="store_true", help="rotation bound certificate")
    sp.add_argument("--dissipation", action="store_true", help="dissipation identity residual")
    sp.add_argument("--h-identity", action="store_true", help="(hE)' = h'F(v) residual")
    sp.add_argument("--probe", action="store_true", help="critical-layer radius table")
    sp.add_argument("--c1", type=float, help="energy band top (default min(1, F(lambda)/2))")
    sp.add_argument("--mu", type=float, help="dissipation multiplier (default mu*)")
    sp.add_argument("--n-sub", type=int, default=16, help="dense samples per accepted step")
    sp.add_argument("--resid-tol", type=float, default=1e-5)
    sp.add_argument("--probe-lambdas", default="10,100,1000,10000")
    return parser


# --------------------------------------------------------------------------- helpers

def _opt(args, name, default=None):
    return getattr(args, name, default)


def _config_path(args) -> str:
    path = _opt(args, "config_pos") or _opt(args, "config")
    if not path:
        raise UsageError("a config file is required (positional or --config)")
    return path


def _out_dir(args) -> Path:
    return Path(_opt(args, "out", "out"))


def _load(args):
    cfg = load_config(_config_path(args))
    return cfg, problem_from_dict(cfg)


def _options(args, cfg):
    return solver_options(cfg, r_max=_opt(args, "r_max"), rel_tol=_opt(args, "tol_rel"), abs_tol=_opt(args, "tol_abs"))


def _tolerances(opts: itg.SolveOptions) -> dict:
    return {"rel_tol": opts.rel_tol, "abs_tol": opts.abs_tol, "r_max": opts.r_max,
            "double_zero_tol": opts.double_zero_tol, "settle_tol": opts.settle_tol}


def _command_line(args) -> str:
    # recorded without paths so the manifest does not depend on the working directory
    skip = ("command", "config", "config_pos", "out", "verbose")
    opts = {k: v for k, v in vars(args).items() if k not in skip and v is not None and v is not False}
    return args.command + "".join(f" --{k.replace('_', '-')}={opts[k]}" for k in sorted(opts))


def _lambda(args, cfg) -> float:
    lam = _opt(args, "lam")
    if lam is None:
        lam = cfg.get("solver", {}).get("lambda")
    if lam is None:
        raise UsageError("--lambda is required (or solver.lambda in the config)")
    return float(lam)


def _gate(prob) -> list[hy.Verdict]:
    w = prob.weight
    r = hy.weight_grid(w)
    verdicts = [hy.check_q1(w, r), hy.check_q2(w, r), hy.check_q3(w, r), hy.check_q4(w, r),
                hy.check_f1(prob.nonlin), hy.check_f2(prob.nonlin, s_max=prob.grids.s_max)]
    return [v for v in verdicts if v.holds == hy.FAIL]


def _report_failures(fails):
    for v in fails:
        ev = ", ".join(f"{k}={v.evidence[k]}" for k in sorted(v.evidence) if not isinstance(v.evidence[k], (list, dict)))
        print(f"hypothesis ({v.name}) failed: {ev}", file=sys.stderr)


def _write_trajectory(out, traj, prob, stride=None):
    csv = io.write_trajectory_csv(traj, out / "trajectory.csv", prob, stride)
    ev = io.write_events(traj, out / "trajectory.events.json")
    return [csv, ev]


# --------------------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    cfg, prob = _load(args)
    lam = _lambda(args, cfg)
    if lam == 0.0:
        print("error: lambda must be nonzero", file=sys.stderr)
        return EXIT_FAILURE
    fails = _gate(prob)
    if fails:
        _report_failures(fails)
        if not _opt(args, "force", False):
            return EXIT_HYPOTHESIS
        log.warning("continuing despite failed hypotheses (--force)")
    opts = _options(args, cfg)
    traj = itg.solve(prob, lam, opts)
    out = _out_dir(args)
    outputs = _write_trajectory(out, traj, prob, _opt(args, "stride"))
    io.write_manifest(out, cfg, _command_line(args), _tolerances(opts), outputs)
    print(f"lambda={lam:.17g} terminal={traj.terminal} nodes={traj.node_count} r_end={traj.r[-1]:.17g}")
    if traj.terminal == itg.STEP_FAILURE:
        print(f"error: solver failure: {traj.message}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_shoot(args) -> int:
    cfg, prob = _load(args)
    shoot_cfg = cfg.get("shoot", {})
    k = _opt(args, "k")
    if k is None:
        k = shoot_cfg.get("k")
    if k is None:
        raise UsageError("--k is required (or shoot.k in the config)")
    k = int(k)
    if k < 0:
        raise UsageError("k must be >= 0")
    skw = {key: shoot_cfg[key] for key in ("lambda_start", "growth_factor", "bisect_tol", "lambda_cap") if key in shoot_cfg}
    for key in ("lambda_start", "bisect_tol"):
        if _opt(args, key) is not None:
            skw[key] = _opt(args, key)
    search = SearchOptions(workers=_opt(args, "workers", 1), **skw)
    opts = _options(args, cfg)
    out = _out_dir(args)
    try:
        res = find_k_node(prob, k, opts, search)
    except ShootingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for row in exc.sweep_log:
            print(f"  lambda={row['lambda']:.17g} {row['class']}", file=sys.stderr)
        io.write_json(out / "sweep_log.json", {"k": k, "error": str(exc), "sweep_log": exc.sweep_log})
        return EXIT_NOT_FOUND
    outputs = _write_trajectory(out, res.trajectory, prob)
    outputs.append(io.write_json(out / "shoot.json", res.to_dict("trajectory.csv")))
    gp = out / "plot.gp"
    gp.write_text(io.gnuplot_script("trajectory.csv", res.trajectory.nodes,
                                    f"k={k}, lambda={res.lambda_k:.12g}"), encoding="utf-8")
    outputs.append(gp)
    io.write_manifest(out, cfg, _command_line(args), _tolerances(opts), outputs)
    print(f"k={k} lambda_k={res.lambda_k:.17g} bracket=[{res.bracket[0]:.17g}, {res.bracket[1]:.17g}]")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, prob = _load(args)
    if _opt(args, "lambdas"):
        lams = [float(x) for x in args.lambdas.split(",") if x.strip()]
    elif _opt(args, "lambda_min") is not None and _opt(args, "lambda_max") is not None:
        if not 0 < args.lambda_min < args.lambda_max or args.num < 2:
            raise UsageError("need 0 < --lambda-min < --lambda-max and --num >= 2")
        lams = np.geomspace(args.lambda_min, args.lambda_max, args.num).tolist()
    else:
        raise UsageError("give --lambdas or --lambda-min/--lambda-max")
    opts = _options(args, cfg)
    res, drops = node_sweep(prob, lams, opts, workers=_opt(args, "workers", 1))
    out = _out_dir(args)
    rows = [(lam, c.k, 1.0 if c.decided else 0.0) for lam, c in zip(lams, res)]
    outputs = [io.write_csv(out / "sweep.csv", ("lambda", "nodes", "decided"), rows),
               io.write_json(out / "sweep.json", {"classifications": [{"lambda": lam, **c.to_dict()}
                                                                       for lam, c in zip(lams, res)],
                                                  "non_monotone": [list(d) for d in drops]})]
    io.write_manifest(out, cfg, _command_line(args), _tolerances(opts), outputs)
    for lam, c in zip(lams, res):
        print(f"lambda={lam:.17g} {c.label()}")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg, prob = _load(args)
    rep = hy.check_all(prob)
    print(rep.table())
    if _opt(args, "out") is not None:
        out = _out_dir(args)
        path = io.write_json(out / "check.json", rep.to_dict())
        io.write_manifest(out, cfg, _command_line(args), {}, [path])
    return EXIT_OK if rep.ok else EXIT_HYPOTHESIS


def _pair_of(cfg):
    p = as_pexp(cfg["p"]) if "p" in cfg else None
    if p is None:
        raise ConfigError("missing key 'p'")
    wspec = cfg.get("weight", {})
    if "pair" in wspec:
        return build_pair(wspec["pair"], p)
    if wspec.get("kind") in ("unified", "matukuma", "stellar", "k_hessian"):
        return build_pair(wspec, p)
    raise ConfigError("reduce needs a weight pair ('weight.pair' or a pair preset kind)")


def cmd_reduce(args) -> int:
    cfg = load_config(_config_path(args))
    pair = _pair_of(cfg)
    w1 = hy.check_w1(pair)
    if w1.holds == hy.FAIL:
        _report_failures([w1])
        return EXIT_HYPOTHESIS
    rw = ReducedWeight(pair)
    if not (0 < args.t_min < args.t_max) or args.points < 2:
        raise UsageError("need 0 < --t-min < --t-max and --points >= 2")
    t = np.geomspace(args.t_min, args.t_max, args.points)
    cols = [t] + [np.asarray(fn(t), dtype=float) for fn in (rw.q, rw.dq, rw.Q, rw.h)]
    out = _out_dir(args)
    rg = hy.weight_grid(rw)
    report = [w1] + hy.check_w(pair) + [fn(rw, rg) for fn in (hy.check_q1, hy.check_q2, hy.check_q3, hy.check_q4)]
    outputs = [io.write_csv(out / "reduced.csv", ("r", "q", "dq", "Q", "h"), np.column_stack(cols)),
               io.write_json(out / "reduce.json", {"identity": bool(pair.identical), "pair": pair.describe(),
                                                   "verdicts": [v.to_dict() for v in report]})]
    io.write_manifest(out, cfg, _command_line(args), {}, outputs)
    for v in report:
        print(f"{v.name:<4} {v.holds}")
    return EXIT_OK


def _diag_trajectory(args, cfg, prob):
    if _opt(args, "traj"):
        loaded = io.load_trajectory(args.traj)
        return itg.trajectory_from_samples(prob, loaded.r, loaded.v, loaded.w, loaded.theta, loaded.events)
    lam = _lambda(args, cfg)
    if lam == 0.0:
        raise ValueError("lambda must be nonzero")
    return itg.solve(prob, lam, _options(args, cfg))


def cmd_diag(args) -> int:
    cfg, prob = _load(args)
    want = {name for name in ("rotation", "dissipation", "h_identity", "probe") if _opt(args, name)}
    if not want:
        want = {"rotation", "dissipation", "h_identity"}
    out = _out_dir(args)
    results, outputs = {}, []
    traj = _diag_trajectory(args, cfg, prob) if want - {"probe"} else None
    if "rotation" in want:
        F_lam = float(prob.nonlin.F(traj.lam))
        c1 = _opt(args, "c1") or min(1.0, 0.5 * F_lam)
        try:
            cert = dg.rotation_certificate(prob, traj, c1)
            results["rotation"] = {"verdict": cert.verdict, "c1": c1, "constants": cert.constants,
                                   "details": cert.details}
        except dg.DiagnosticError as exc:
            results["rotation"] = {"verdict": hy.INCONCLUSIVE, "c1": c1, "details": {"reason": str(exc)}}
    tol = args.resid_tol
    if "dissipation" in want:
        res = dg.dissipation_residual(prob, traj, mu=_opt(args, "mu"), n_sub=args.n_sub)
        results["dissipation"] = {"verdict": hy.PASS if res <= tol else hy.FAIL, "residual": res, "tolerance": tol}
    if "h_identity" in want:
        res = dg.h_identity_residual(prob, traj, n_sub=args.n_sub)
        results["h_identity"] = {"verdict": hy.PASS if res <= tol else hy.FAIL, "residual": res, "tolerance": tol}
    if "probe" in want:
        grid = [float(x) for x in args.probe_lambdas.split(",") if x.strip()]
        d = int(round(prob.weight.N)) if isinstance(prob.weight, PowerWeight) else int(round(prob.N_eff))
        rows = dg.critical_layer_probe(d, grid, prob=prob)
        Rs = [row["R"] for row in rows]
        outputs.append(io.write_csv(out / "probe.csv", ("lambda", "R"),
                                    [(row["lambda"], row["R"] if row["R"] is not None else math.nan) for row in rows]))
        results["probe"] = {"verdict": hy.PASS if dg.strictly_decreasing(Rs) else hy.INCONCLUSIVE, "rows": rows}
    outputs.append(io.write_json(out / "diag.json", results))
    io.write_manifest(out, cfg, _command_line(args), _tolerances(_options(args, cfg)), outputs)
    for name in sorted(results):
        r = results[name]
        extra = f" residual={r['residual']:.3e}" if "residual" in r else ""
        marker = f" ({r['details'].get('reason')})" if r["verdict"] == hy.INCONCLUSIVE and "details" in r else ""
        print(f"{name}: {r['verdict']}{extra}{marker}")
    return EXIT_FAILURE if any(r["verdict"] == hy.FAIL for r in results.values()) else EXIT_OK


COMMANDS = {"solve": cmd_solve, "shoot": cmd_shoot, "sweep": cmd_sweep, "check": cmd_check,
            "reduce": cmd_reduce, "diag": cmd_diag}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if _opt(args, "verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"radialnodes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WeightError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ConfigError, NonlinearityError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, itg.IntegrationDomainError, itg.StartupError, dg.DiagnosticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
