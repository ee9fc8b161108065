"""CSV and JSON writers for fields, trajectories, spectra, signals and plans.

CSV numbers use ``%.17g`` so files round-trip exactly and reruns are
byte-identical.  Every writer that takes a ``config`` also drops a JSON
sidecar next to the CSV carrying the config, library versions and wall time.
"""

from __future__ import annotations

import json
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

from .core import ControlSignal, Field, Grid, Layout, ValidationError

FMT = "%.17g"


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path, config: dict, wall_time: float | None = None, **extra) -> Path:
    meta = {"config": config, "versions": versions(), "wall_time_s": wall_time, **extra}
    return write_json(sidecar_path(path), meta)


def _write_csv(path, header: str, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack(columns), fmt=FMT, delimiter=",", header=header,
               comments="")
    return path


def write_field(path, f: Field) -> Path:
    return _write_csv(path, "x,value", [f.x, f.values])


def read_field(path) -> Field:
    """Inverse of :func:`write_field`; the layout is inferred from x[0]."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, values = data[:, 0], data[:, 1]
    if x.size < 2:
        raise ValidationError(f"{path}: need at least two rows")
    if x[0] == 0.0:
        grid = Grid(x.size - 1, Layout.NODE)
    else:
        grid = Grid(x.size, Layout.CELL)
    if not np.allclose(x, grid.x, atol=1e-12):
        raise ValidationError(f"{path}: x column is not a uniform grid on [0, 1]")
    return Field(grid, values)


def write_trajectory(path, traj, config: dict | None = None, wall_time: float | None = None) -> Path:
    """Long-format ``t,x,value`` CSV plus a sidecar with grid, controls and meta."""
    nt, nx = traj.values.shape
    t = np.repeat(traj.times, nx)
    x = np.tile(traj.grid.x, nt)
    _write_csv(path, "t,x,value", [t, x, traj.values.ravel()])
    write_sidecar(
        path, config or {}, wall_time,
        grid={"n_cells": traj.grid.n_cells, "layout": traj.grid.layout.value},
        controls={k: v.to_dict() for k, v in traj.controls.items()},
        meta=traj.meta,
    )
    return Path(path)


def write_spectral(path, state) -> Path:
    return _write_csv(path, "n,coeff", [state.indices, state.coeffs])


def write_signal(path, sig: ControlSignal) -> Path:
    return _write_csv(path, "t,value", [sig.times, sig.samples])


def write_plan(path, plan) -> Path:
    return write_json(path, plan.to_dict())
