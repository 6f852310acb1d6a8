"""Artifact writers: CSV tables, JSON reports, trajectory containers."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .kinetic import KGrid, Trajectory


def _jsonable(x: Any) -> Any:
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    return x


def write_json(path: str | Path, payload: Mapping, config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(_jsonable(payload))
    body["config_hash"] = config_hash
    path.write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path: str | Path, rows: Iterable[Mapping], config_hash: str) -> Path:
    """CSV with a header row; every row carries ``config_hash``."""
    rows = [dict(_jsonable(r)) for r in rows]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    fields.append("config_hash")
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**{k: _csv_cell(v) for k, v in r.items()}, "config_hash": config_hash})
    return path


def _csv_cell(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def save_trajectory(path: str | Path, traj: Trajectory, config_hash: str) -> tuple[Path, Path]:
    """``<path>.npz`` with times and states plus a ``<path>.json`` sidecar."""
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    npz = base.with_suffix(".npz")
    np.savez(npz, times=np.asarray(traj.times), states=traj.array())
    side = {
        "variant": traj.variant,
        "grid": traj.grid.spec() if traj.grid else None,
        "times": list(traj.times),
        "meta": traj.meta,
    }
    sidecar = write_json(base.with_suffix(".json"), side, config_hash)
    return npz, sidecar


def load_trajectory(path: str | Path) -> Trajectory:
    base = Path(path)
    side = json.loads(base.with_suffix(".json").read_text())
    with np.load(base.with_suffix(".npz")) as z:
        states = list(z["states"])
        times = [float(t) for t in z["times"]]
    grid = KGrid(**side["grid"]) if side.get("grid") else None
    return Trajectory(times, states, side["variant"], grid, side.get("meta", {}))


def slice_rows(traj: Trajectory) -> list[dict]:
    """Rows ``(t, k1, W)`` along the first k-axis through the grid centre (for plotting)."""
    g = traj.grid
    mid = g.m // 2
    rows = []
    for t, st in zip(traj.times, traj.states):
        arr = st
        if traj.variant == "E":
            w1 = np.full(g.zeta_points, g.dzeta)
            w1[[0, -1]] *= 0.5
            arr = np.real(np.einsum("...abc,a,b,c->...", arr, w1, w1, w1))
        if g.inhomogeneous:
            arr = arr[len(g.x_axis) // 2]
        for k1, v in zip(g.k_axis, arr[:, mid, mid]):
            rows.append({"t": float(t), "k1": float(k1), "W": float(v)})
    return rows


__all__ = ["write_json", "write_csv", "save_trajectory", "load_trajectory", "slice_rows"]
