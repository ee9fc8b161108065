r"""Godunov finite-volume solver for the inviscid limit

.. math::

    y_t + (y^2/2)_x = u(t), \quad y(t, 0^+) \in E(v(t)), \quad y(t, 1^-) \ge 0,

and the two-step null control of that system.

Weak (BLN) boundary conditions are realized by ghost cells: the left ghost
holds the desired trace v(t) and the right ghost holds 0.  The Godunov flux
at the boundary interface then admits exactly the traces allowed by E(v)
and by the sign condition at x = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    CFLError,
    ControlSignal,
    Field,
    Grid,
    Interpolation,
    Layout,
    NumericalError,
    PiecewiseSignal,
    ValidationError,
)
from .viscous import Trajectory, godunov_flux


def e_set_contains(alpha: float, trace: float, tol: float = 0.0) -> bool:
    """Membership in E(alpha): (-inf, 0] if alpha <= 0, else (-inf, -alpha] U {alpha}."""
    return e_set_distance(alpha, trace) <= tol


@dataclass(frozen=True, eq=False)
class InviscidProblem:
    y0: Field
    u: object
    v: object
    T: float

    def __post_init__(self):
        if self.y0.grid.layout is not Layout.CELL:
            raise ValidationError("inviscid problems use cell averages")
        if not self.T > 0:
            raise ValidationError("T must be positive")
        for name in ("u", "v"):
            if getattr(self, name).t_end < self.T * (1 - 1e-12):
                raise ValidationError(f"control {name} does not cover [0, T]")


@njit(cache=True, nogil=True)
def _godunov_update(y, dt, dx, left, U):
    n = y.shape[0]
    out = np.empty(n)
    lam = dt / dx
    f_prev = godunov_flux(left, y[0])
    for j in range(n):
        f_next = godunov_flux(y[j], y[j + 1]) if j < n - 1 else godunov_flux(y[j], 0.0)
        out[j] = y[j] - lam * (f_next - f_prev) + U
        f_prev = f_next
    return out


def _max_speed(y: np.ndarray, left: float) -> float:
    return max(float(np.max(np.abs(y))), abs(left))


def solve_inviscid(prob: InviscidProblem, grid: Grid, cfl: float = 0.9, dt: float | None = None,
                   stops=(), stride: int = 1, speed_floor: float = 1e-12) -> Trajectory:
    """March the Godunov scheme to T.

    The step is ``cfl * dx / max|y|`` unless a fixed ``dt`` is given, and is
    shortened so that every time in ``stops`` (and T) is hit exactly.
    """
    if grid != prob.y0.grid:
        raise ValidationError("grid does not match the initial state's grid")
    if not 0 < cfl <= 1:
        raise ValidationError("cfl must lie in (0, 1]")
    T, dx = prob.T, grid.dx
    marks = sorted({float(s) for s in stops if 0 < s < T} | {T})
    breaks = _breakpoints(prob.u) + _breakpoints(prob.v)
    marks = sorted(set(marks) | {b for b in breaks if 0 < b < T})
    y = prob.y0.values.copy()
    t = 0.0
    times, snaps = [0.0], [y.copy()]
    k = 0
    for mark in marks:
        while t < mark:
            left = float(prob.v(t))
            speed = max(_max_speed(y, left), speed_floor)
            if dt is None:
                h = cfl * dx / speed
            else:
                h = dt
                if h * speed > dx * (1 + 1e-12):
                    raise CFLError(f"dt = {h:.3g} violates the CFL bound at t = {t:.6g}")
            if t + h >= mark * (1 - 1e-14):
                h = mark - t
            U = prob.u.integral(t, t + h)
            y = _godunov_update(y, h, dx, left, U)
            t = mark if t + h >= mark else t + h
            k += 1
            if not np.all(np.isfinite(y)):
                raise NumericalError(f"non-finite state at t = {t:.6g}")
            if t == mark or k % stride == 0:
                times.append(t)
                snaps.append(y.copy())
    return Trajectory(
        grid=grid,
        times=np.array(times),
        values=np.array(snaps),
        controls={"u": prob.u, "v": prob.v},
        meta={"scheme": "godunov", "T": T, "cfl": cfl, "dt": dt, "steps": k},
    )


def _breakpoints(sig) -> list:
    if isinstance(sig, PiecewiseSignal):
        return sig.breakpoints
    if sig.interpolation is Interpolation.CONSTANT:
        return list(sig.times[1:])
    return []


def hyperbolic_null_control(y0_linf: float, T: float):
    """Controls steering any state with sup norm <= y0_linf to 0 at time T.

    H is the smallest height with (H - y0_linf) / 2 >= 2 / T, i.e. the
    entering shock crosses [0, 1] by T/2.  Then v = H, u = 0 on [0, T/2]
    and v = 2H(1 - t/T), u = -2H/T on [T/2, T].
    """
    if not T > 0:
        raise ValidationError("T must be positive")
    if y0_linf < 0:
        raise ValidationError("y0_linf must be nonnegative")
    H = y0_linf + 4.0 / T
    half = T / 2
    u = ControlSignal(np.array([0.0, half, T]), np.array([0.0, -2 * H / T, -2 * H / T]),
                      Interpolation.CONSTANT)
    v = ControlSignal(np.array([0.0, half, T]), np.array([H, H, 0.0]), Interpolation.LINEAR)
    return H, u, v


def left_trace(traj: Trajectory) -> np.ndarray:
    """y(t, 0+) taken as the first cell average."""
    return traj.values[:, 0]


def right_trace(traj: Trajectory) -> np.ndarray:
    """y(t, 1-) taken as the last cell average."""
    return traj.values[:, -1]


def e_set_distance(alpha: float, trace: float) -> float:
    """Distance from ``trace`` to E(alpha)."""
    if alpha <= 0:
        return max(trace, 0.0)
    return min(max(trace + alpha, 0.0), abs(trace - alpha))


def trace_violations(traj: Trajectory, v, entry_cells: float = 10.0, tol: float | None = None):
    """Snapshot times where the left trace is farther than ``tol`` from E(v(t)).

    The first cell needs a few steps to take up the boundary state, so times
    before the boundary wave has crossed ``entry_cells`` cells are skipped.
    The default tolerance is dx * max|y|.
    """
    dx = traj.grid.dx
    t_entry = entry_cells * dx / max(abs(float(v(0.0))), 1e-12)
    bad = []
    for t, row in zip(traj.times, traj.values):
        if t < t_entry:
            continue
        limit = dx * float(np.max(np.abs(row))) if tol is None else tol
        if e_set_distance(float(v(t)), float(row[0])) > limit:
            bad.append(t)
    return np.array(bad)


def front_position(f: Field, level: float) -> float:
    """Right-most x where f crosses ``level`` from above, linearly interpolated."""
    x, y = f.x, f.values
    above = np.nonzero(y >= level)[0]
    if above.size == 0:
        return 0.0
    j = above[-1]
    if j == y.size - 1:
        return 1.0
    return float(x[j] + (y[j] - level) / (y[j] - y[j + 1]) * (x[j + 1] - x[j]))


def l1_distance(a: Field, b: Field) -> float:
    return float(a.grid.dx * np.sum(np.abs(a.values - b.values)))


def override_time(y0_linf: float, H: float) -> float:
    """Time for the H-shock to cross [0, 1] against states bounded by y0_linf."""
    speed = 0.5 * (H - y0_linf)
    return math.inf if speed <= 0 else 1.0 / speed
