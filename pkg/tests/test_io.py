import json

import numpy as np
import pytest

from blcontrol import io, viscous
from blcontrol.colehopf import Basis, SpectralState
from blcontrol.core import ControlSignal, Field, Grid, Layout, Params, ValidationError


@pytest.mark.parametrize("layout", list(Layout))
def test_field_roundtrip(tmp_path, layout):
    g = Grid(37, layout)
    f = Field.from_function(g, lambda x: np.exp(np.sin(7 * x)) / 3)
    path = io.write_field(tmp_path / "f.csv", f)
    back = io.read_field(path)
    assert back.grid == g and np.array_equal(back.values, f.values)


def test_read_field_rejects_bad_grid(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,value\n0,1\n0.3,2\n1,3\n")
    with pytest.raises(ValidationError):
        io.read_field(p)


def test_trajectory_csv_and_sidecar(tmp_path):
    g = Grid(8)
    T = 0.01
    z = ControlSignal.zero(T)
    y0 = Field.from_function(g, lambda x: np.sin(np.pi * x))
    traj = viscous.solve(viscous.ViscousProblem(Params(1, 1, T), y0, z, z, z), g, 1e-3)
    path = io.write_trajectory(tmp_path / "t.csv", traj, {"dt": 1e-3}, 0.5)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (traj.times.size * g.size, 3)
    assert np.array_equal(data[:, 2], traj.values.ravel())
    side = io.read_json(io.sidecar_path(path))
    assert side["config"] == {"dt": 1e-3} and side["wall_time_s"] == 0.5
    assert side["grid"] == {"n_cells": 8, "layout": "node_centered"}
    assert set(side["controls"]) == {"u", "v0", "v1"}
    assert {"python", "numpy", "scipy", "numba"} <= set(side["versions"])


def test_spectral_and_signal(tmp_path):
    s = SpectralState(Basis.E, np.array([1.0, -0.5, 0.25]))
    data = np.loadtxt(io.write_spectral(tmp_path / "s.csv", s), delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], [1, 2, 3]) and np.array_equal(data[:, 1], s.coeffs)
    sig = ControlSignal.from_function(np.cos, 1.0, 16)
    data = np.loadtxt(io.write_signal(tmp_path / "v.csv", sig), delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], sig.samples)


def test_json_handles_numpy(tmp_path):
    p = io.write_json(tmp_path / "a.json", {"a": np.float64(1.5), "b": np.arange(3),
                                             "c": np.inf, "d": np.bool_(True)})
    assert json.loads(p.read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": "inf", "d": True}
