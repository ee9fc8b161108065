r"""Semi-implicit monotone solver for the controlled viscous Burgers system

.. math::

    y_t + y y_x - \nu y_{xx} = u(t), \quad y(t, 0) = v_0(t), \quad y(t, 1) = v_1(t)

on a node-centered grid.  One step is advection (explicit Godunov flux),
then diffusion (backward Euler, Thomas sweep), then the spatially uniform
forcing.  Each piece is monotone under the CFL bound, so the whole step
preserves pointwise ordering of data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import (
    CFLError,
    ControlSignal,
    Field,
    Grid,
    Layout,
    NumericalError,
    Params,
    ResolutionError,
    ValidationError,
)
from .tridiag import factor_toeplitz, solve_factored

CFL_SLACK = 1e-12
SPEED_FLOOR = 1e-12


@njit(cache=True, nogil=True)
def godunov_flux(ul, ur):
    """Exact Riemann flux for f(y) = y^2 / 2."""
    if ul >= ur:
        if 0.5 * (ul + ur) > 0.0:
            return 0.5 * ul * ul
        return 0.5 * ur * ur
    if ul > 0.0:
        return 0.5 * ul * ul
    if ur < 0.0:
        return 0.5 * ur * ur
    return 0.0


@njit(cache=True, nogil=True)
def _march(y0, dts, dx, nu, left, right, forcing, stride, snaps):
    """Advance ``len(dts)`` steps.

    Returns ``(status, k, y, n_stored)``; status 0 ok, 1 CFL violation at
    step k, 2 non-finite state after step k.
    """
    y = y0.copy()
    n = y.shape[0] - 1
    flux = np.empty(n)
    rhs = np.empty(n - 1)
    sol = np.empty(n - 1)
    last_r = -1.0
    cp = np.empty(n - 1)
    inv = np.empty(n - 1)
    n_stored = 0
    for k in range(dts.shape[0]):
        dt = dts[k]
        y[0] = left[k]
        y[n] = right[k]
        smax = max(abs(left[k + 1]), abs(right[k + 1]), 1e-12)
        for i in range(n + 1):
            if abs(y[i]) > smax:
                smax = abs(y[i])
        if dt * smax > dx * (1.0 + 1e-12):
            return 1, k, y, n_stored
        for i in range(n):
            flux[i] = godunov_flux(y[i], y[i + 1])
        lam = dt / dx
        for i in range(1, n):
            rhs[i - 1] = y[i] - lam * (flux[i] - flux[i - 1])
        r = nu * dt / (dx * dx)
        if r != last_r:
            cp, inv = factor_toeplitz(r, n - 1)
            last_r = r
        U = forcing[k]
        rhs[0] += r * (left[k + 1] - U)
        rhs[n - 2] += r * (right[k + 1] - U)
        solve_factored(r, cp, inv, rhs, sol)
        for i in range(1, n):
            y[i] = sol[i - 1] + U
        y[0] = left[k + 1]
        y[n] = right[k + 1]
        for i in range(n + 1):
            if not np.isfinite(y[i]):
                return 2, k, y, n_stored
        if stride > 0 and (k + 1) % stride == 0 and n_stored < snaps.shape[0]:
            snaps[n_stored, :] = y
            n_stored += 1
    return 0, dts.shape[0], y, n_stored


@dataclass(frozen=True, eq=False)
class ViscousProblem:
    """Initial state, viscosity and the three control signals."""

    params: Params
    y0: Field
    u: object
    v0: object
    v1: object

    def __post_init__(self):
        if self.y0.grid.layout is not Layout.NODE:
            raise ValidationError("viscous problems need a node-centered initial state")
        T = self.params.T
        for name in ("u", "v0", "v1"):
            sig = getattr(self, name)
            if sig.t_end < T * (1 - 1e-12):
                raise ValidationError(f"control {name} ends at {sig.t_end} < T = {T}")

    @property
    def boundary_mismatch(self) -> float:
        """Largest gap between y0's end values and the Dirichlet data at t = 0."""
        return max(abs(self.y0.values[0] - self.v0(0.0)), abs(self.y0.values[-1] - self.v1(0.0)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of a solve together with the data that produced them."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    controls: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> Field:
        return Field(self.grid, self.values[-1])

    @property
    def initial(self) -> Field:
        return Field(self.grid, self.values[0])

    def snapshot(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def at(self, t: float) -> Field:
        """Snapshot closest to time t."""
        return self.snapshot(int(np.argmin(np.abs(self.times - t))))

    def __len__(self):
        return self.times.size


def check_resolution(grid: Grid, params: Params):
    """Refuse grids that cannot resolve a layer of width viscosity / H."""
    limit = params.viscosity / (4.0 * params.H)
    if grid.dx > limit * (1 + 1e-12):
        raise ResolutionError(
            f"dx = {grid.dx:.3g} exceeds viscosity/(4H) = {limit:.3g}; "
            f"use at least {math.ceil(1.0 / limit)} cells"
        )


def _step_times(t_start: float, t_stop: float, dt: float) -> np.ndarray:
    n = max(1, math.ceil((t_stop - t_start) / dt - 1e-9))
    times = t_start + dt * np.arange(n + 1)
    times[-1] = t_stop
    return times


def _run(prob: ViscousProblem, y: np.ndarray, times: np.ndarray, dx: float, stride: int):
    left = np.asarray(prob.v0(times), dtype=float)
    right = np.asarray(prob.v1(times), dtype=float)
    prim = np.asarray(prob.u.primitive(times), dtype=float)
    forcing = np.diff(prim)
    dts = np.diff(times)
    n_snap = (dts.size // stride) if stride > 0 else 0
    snaps = np.empty((n_snap, y.size))
    status, k, y_end, n_stored = _march(
        y, dts, dx, prob.params.viscosity, left, right, forcing, stride, snaps
    )
    if status == 1:
        raise CFLError(
            f"step {k} at t = {times[k]:.6g}: dt = {dts[k]:.3g} violates the CFL bound "
            f"dx / max|y| for dx = {dx:.3g}"
        )
    if status == 2:
        raise NumericalError(f"non-finite state after step {k} at t = {times[k + 1]:.6g}")
    snap_times = times[stride::stride][:n_stored] if stride > 0 else times[:0]
    return y_end, snap_times, snaps[:n_stored]


def step(state: Field, t: float, dt: float, prob: ViscousProblem) -> Field:
    """One advection / diffusion / forcing step from t to t + dt."""
    if state.grid != prob.y0.grid:
        raise ValidationError("state and problem live on different grids")
    if not dt > 0:
        raise ValidationError("dt must be positive")
    check_resolution(state.grid, prob.params)
    times = np.array([t, t + dt])
    y, _, _ = _run(prob, state.values, times, state.grid.dx, 0)
    return Field(state.grid, y)


def solve(prob: ViscousProblem, grid: Grid, dt: float, stride: int = 1,
          dt_schedule=None) -> Trajectory:
    """March over [0, T], storing every ``stride``-th step and the final state.

    ``dt_schedule`` optionally lists ``(t_stop, dt)`` windows covering
    [0, T]; each window ends exactly on its ``t_stop`` so control switches
    are hit without interpolation.
    """
    if grid != prob.y0.grid:
        raise ValidationError("grid does not match the initial state's grid")
    check_resolution(grid, prob.params)
    T = prob.params.T
    windows = list(dt_schedule) if dt_schedule else [(T, dt)]
    if not math.isclose(windows[-1][0], T, rel_tol=1e-12):
        raise ValidationError("dt schedule must end at T")
    y = prob.y0.values.copy()
    all_times = [np.array([0.0])]
    all_values = [y[None, :].copy()]
    t0 = 0.0
    for t_stop, dt_w in windows:
        if not dt_w > 0:
            raise ValidationError("dt must be positive")
        if t_stop <= t0:
            continue
        times = _step_times(t0, t_stop, dt_w)
        y, snap_t, snap_v = _run(prob, y, times, grid.dx, stride)
        if snap_t.size and snap_t[-1] == t_stop:
            snap_t, snap_v = snap_t[:-1], snap_v[:-1]
        all_times += [snap_t, np.array([t_stop])]
        all_values += [snap_v, y[None, :].copy()]
        t0 = t_stop
    return Trajectory(
        grid=grid,
        times=np.concatenate(all_times),
        values=np.concatenate(all_values),
        controls={"u": prob.u, "v0": prob.v0, "v1": prob.v1},
        meta={
            "scheme": "godunov-backward-euler",
            "params": {"viscosity": prob.params.viscosity, "H": prob.params.H, "T": T},
            "dt": dt,
            "dt_schedule": [list(w) for w in windows],
            "stride": stride,
        },
    )


def steady_residual(f: Field, nu: float, u_const: float = 0.0) -> Field:
    """Discrete residual f f_x - nu f_xx - u at interior nodes, zero at the ends."""
    if f.grid.layout is not Layout.NODE:
        raise ValidationError("steady_residual needs a node-centered field")
    v, dx = f.values, f.grid.dx
    res = np.zeros_like(v)
    fx = (v[2:] - v[:-2]) / (2 * dx)
    fxx = (v[2:] - 2 * v[1:-1] + v[:-2]) / dx**2
    res[1:-1] = v[1:-1] * fx - nu * fxx - u_const
    return Field(f.grid, res)


def zero_problem(y0: Field, params: Params) -> ViscousProblem:
    """Uncontrolled problem: u = v0 = v1 = 0."""
    z = ControlSignal.zero(params.T)
    return ViscousProblem(params, y0, z, z, z)
