"""Deterministic CSV/JSON output, run manifests and the trajectory loader.

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly.  JSON is written with sorted keys and ``repr`` floats.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .integrator import Trajectory

CSV_HEADER = ("r", "v", "w", "E", "theta")


def fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(float(x)) for x in row) + "\n")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(x) for x in row] for row in reader if row]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {h: arr[:, i].copy() for i, h in enumerate(header)}


def trajectory_rows(traj: Trajectory, prob=None, stride: float | None = None) -> np.ndarray:
    """``(r, v, w, E, θ)`` at accepted steps, or on a uniform grid of spacing ``stride``.

    The uniform grid uses the dense output and needs ``prob`` to recompute E.
    """
    if stride is None:
        return traj.samples
    if prob is None:
        raise ValueError("resampling at a stride needs the problem to recompute E")
    r0, r1 = float(traj.r[0]), float(traj.r[-1])
    n = int(math.floor((r1 - r0) / stride + 1e-9))
    rq = r0 + stride * np.arange(n + 1)
    v, w, th = traj.dense(rq)
    pc = prob.p.pconj
    E = np.abs(w) ** pc / pc + np.asarray(prob.nonlin.F(v))
    return np.column_stack([rq, v, w, E, th])


def write_trajectory_csv(traj: Trajectory, path, prob=None, stride: float | None = None) -> Path:
    return write_csv(path, CSV_HEADER, trajectory_rows(traj, prob, stride))


@dataclass
class LoadedTrajectory:
    r: np.ndarray
    v: np.ndarray
    w: np.ndarray
    E: np.ndarray
    theta: np.ndarray
    events: dict | None = None

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.r, self.v, self.w, self.E, self.theta])


def load_trajectory(path, events_path=None) -> LoadedTrajectory:
    """Read a trajectory CSV (and optionally its events sidecar)."""
    cols = read_csv(path)
    if tuple(cols) != CSV_HEADER:
        raise ValueError(f"unexpected header {list(cols)}; expected {list(CSV_HEADER)}")
    ev = None
    if events_path is None:
        guess = Path(path).with_suffix(".events.json")
        events_path = guess if guess.exists() else None
    if events_path is not None:
        with open(events_path, encoding="utf-8") as fh:
            ev = json.load(fh)
    return LoadedTrajectory(cols["r"], cols["v"], cols["w"], cols["E"], cols["theta"], ev)


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
    return path


def write_events(traj: Trajectory, path) -> Path:
    return write_json(path, traj.events())


# --------------------------------------------------------------------------- manifest

def _normalize_numbers(obj):
    if isinstance(obj, dict):
        return {k: _normalize_numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_normalize_numbers(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        return repr(float(obj))
    return obj


def canonical_json(cfg) -> str:
    """Sorted keys, no whitespace, every number rendered as a float repr."""
    return json.dumps(_normalize_numbers(cfg), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_digest(cfg) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def timestamp() -> str:
    """UTC time from ``SOURCE_DATE_EPOCH`` (0 when unset) so manifests are reproducible."""
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(out_dir, cfg, command: str, tolerances: dict, outputs) -> Path:
    out_dir = Path(out_dir)
    manifest = {"config_digest": config_digest(cfg), "tool": "radialnodes", "version": __version__,
                "command": command, "tolerances": tolerances, "timestamp": timestamp(),
                "outputs": sorted(Path(p).name for p in outputs)}
    return write_json(out_dir / "manifest.json", manifest)


def gnuplot_script(csv_name: str, nodes, title: str = "") -> str:
    """Text gnuplot script plotting v(r) from the CSV with node markers."""
    lines = ["set datafile separator ','",
             "set key off",
             "set xlabel 'r'",
             "set ylabel 'v'",
             f"set title {json.dumps(title)}",
             "set xzeroaxis"]
    for i, r in enumerate(nodes, start=1):
        lines.append(f"set arrow {i} from {fmt(r)}, graph 0 to {fmt(r)}, graph 1 nohead dt 2")
    lines.append(f"plot '{csv_name}' using 1:2 skip 1 with lines lw 2")
    return "\n".join(lines) + "\n"
