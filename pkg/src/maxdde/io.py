"""CSV and JSON writers with stable, full-precision formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .integrator import Trajectory


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no infinities; keep them readable
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def trajectory_rows(traj: Trajectory, raw: bool = True):
    """Rows t, u, uprime, window_max, f from t0 on (history excluded)."""
    prob = traj.problem
    n = traj.n_hist
    t = traj.times[n:]
    u = traj.values[n:]
    d = traj.derivs[n:]
    w = traj.window_max[n:]
    if raw:
        f = prob.forcing.raw(prob.to_raw_time(t))
        t = prob.to_raw_time(t)
        u = prob.to_raw_value(u)
        w = prob.to_raw_value(w)
    else:
        f = prob.forcing(t)
    return zip(t, u, d, w, f)


def write_trajectory(path, traj: Trajectory, raw: bool = True) -> Path:
    return write_csv(path, ["t", "u", "uprime", "window_max", "f"], trajectory_rows(traj, raw))


def write_events(path, traj: Trajectory, raw: bool = True) -> Path:
    prob = traj.problem
    rows = []
    for e in traj.events:
        tau, val = (prob.to_raw_time(e.tau), prob.to_raw_value(e.value)) if raw else (e.tau, e.value)
        rows.append((tau, val, e.branch_j))
    return write_csv(path, ["tau", "value", "branch_j"], rows)


def write_projection(path, traj: Trajectory, raw: bool = True) -> Path:
    """Delay-coordinate projection (u(t), u(t - h)) for t >= t0."""
    prob = traj.problem
    n = traj.n_hist
    t = traj.times[n:]
    u = traj.values[n:]
    ud = traj.values[:traj.values.size - n]
    if raw:
        t, u, ud = prob.to_raw_time(t), prob.to_raw_value(u), prob.to_raw_value(ud)
    return write_csv(path, ["t", "u", "u_delayed"], zip(t, u, ud))
