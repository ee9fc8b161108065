"""Stage controls and the four-phase approximate null-control pipeline.

Fast time: for a small eps the rescaled state ybar(t, x) = eps y(eps t, x)
obeys Burgers with viscosity eps and controls ubar(t) = eps^2 u(eps t),
vbar(t) = eps v(eps t).  Settling and push-down controls are designed in
fast time and mapped back to physical time before concatenation.

Physical schedule on [0, T]:

=============  ===================  ======================================
phase          window               controls
=============  ===================  ======================================
smoothing      [0, T/3]             u = v = 0
settling       [t1, t1 + eps]       u = 0, v from the Cole-Hopf design
push-down      [t2, t2 + eps^4]     u = -H / eps^5, v linear down to 0
passive        [t3, T]              u = v = 0
=============  ===================  ======================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import colehopf, viscous
from .core import (
    ControlSignal,
    Field,
    Grid,
    Interpolation,
    Layout,
    Params,
    PiecewiseSignal,
    ValidationError,
    h1_norm,
    l2_norm,
    linf_norm,
    signal_from_dict,
)

CFL = 0.9
SNAPSHOTS_PER_PHASE = 200


def scale_to_fast(y: Field, eps: float) -> Field:
    return Field(y.grid, eps * y.values)


def scale_from_fast(ybar: Field, eps: float) -> Field:
    return Field(ybar.grid, ybar.values / eps)


def _rescale(sig, time_factor: float, value_factor: float):
    if isinstance(sig, PiecewiseSignal):
        return PiecewiseSignal(
            tuple(s * time_factor for s in sig.starts),
            tuple(_rescale(p, time_factor, value_factor) for p in sig.signals),
        )
    return ControlSignal(sig.times * time_factor, sig.samples * value_factor, sig.interpolation)


def scale_controls(u, v, eps: float):
    """(u, v) -> (ubar, vbar) with ubar(t) = eps^2 u(eps t), vbar(t) = eps v(eps t)."""
    return _rescale(u, 1 / eps, eps**2), _rescale(v, 1 / eps, eps)


def unscale_controls(ubar, vbar, eps: float):
    """Inverse of :func:`scale_controls`."""
    return _rescale(ubar, eps, eps**-2), _rescale(vbar, eps, 1 / eps)


def settling_gap_bound(H: float, eps: float, duration: float, Z0_h1: float) -> float:
    """Explicit L2 bound on ybar(duration) - h_eps after settling."""
    C = math.sqrt(16 + Z0_h1**2)
    return (2 * eps + H) * C * math.exp(-H * (H * duration - 2) / (4 * eps)) / math.sqrt(eps)


def settling_control(y0: Field, H: float, eps: float, duration: float = 1.0,
                     n_modes: int = 1024):
    """Fast-time boundary control driving eps * y0 to h_eps.

    The control is read off the Cole-Hopf side: Z solves the settling heat
    system from Z0 = exp(-1/2 int_0^x y0) and vbar(t) = -2 eps Z_x(t, 0).
    Z0 is spline-resampled to 2 * n_modes cells if y0's grid is coarser.

    Returns ``(vbar, predicted_gap)``.
    """
    Z0 = _refine(colehopf.forward_transform(y0, 1.0), 2 * n_modes)
    _, slope = colehopf.settle_heat_solve(Z0, H, eps, duration, n_modes)
    vbar = ControlSignal(slope.times, -2 * eps * slope.samples, Interpolation.LINEAR)
    return vbar, settling_gap_bound(H, eps, duration, h1_norm(Z0))


def _refine(f: Field, n_cells: int) -> Field:
    """Cubic-spline resample onto a finer node grid when f's grid is too coarse."""
    if f.grid.n_cells >= n_cells:
        return f
    fine = Grid(n_cells, Layout.NODE)
    return Field(fine, CubicSpline(f.grid.x, f.values)(fine.x))


def pushdown_controls(H: float, duration: float):
    """ubar = -H / duration and vbar(t) = H + int_0^t ubar = H (1 - t / duration)."""
    if not duration > 0:
        raise ValidationError("duration must be positive")
    ubar = ControlSignal.constant(-H / duration, duration)
    vbar = ControlSignal(np.array([0.0, duration]), np.array([H, 0.0]), Interpolation.LINEAR)
    return ubar, vbar


def pushdown_delta_bound(H: float, eps: float, duration: float, start_gap: float) -> float:
    """Gronwall bound on ||delta(duration)||_L2 for the push-down comparison system."""
    return (math.exp(H**2 * duration / (4 * eps)) * start_gap
            + 2 * H * (math.exp(H**2 * duration / (2 * eps)) - 1))


@dataclass(frozen=True)
class PhaseSchedule:
    T: float
    eps: float

    def __post_init__(self):
        if not (self.T > 0 and self.eps > 0):
            raise ValidationError("T and eps must be positive")
        if self.eps + self.eps**4 >= 2 * self.T / 3:
            raise ValidationError(
                f"eps = {self.eps} too large for T = {self.T}: need eps + eps^4 < 2T/3"
            )

    @property
    def t1(self) -> float:
        return self.T / 3

    @property
    def t2(self) -> float:
        return self.t1 + self.eps

    @property
    def t3(self) -> float:
        return self.t2 + self.eps**4

    @property
    def lengths(self) -> tuple:
        return (self.t1, self.eps, self.eps**4, self.T - self.t3)

    def to_dict(self) -> dict:
        return {"T": self.T, "eps": self.eps, "t1": self.t1, "t2": self.t2, "t3": self.t3}


PHASES = ("smoothing", "settling", "pushdown", "passive")


@dataclass(frozen=True, eq=False)
class ControlPlan:
    u: PiecewiseSignal
    v: PiecewiseSignal
    schedule: PhaseSchedule
    H: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "schedule": self.schedule.to_dict(),
            "phases": list(PHASES),
            "u": self.u.to_dict(),
            "v": self.v.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlPlan":
        sched = PhaseSchedule(d["schedule"]["T"], d["schedule"]["eps"])
        return cls(signal_from_dict(d["u"]), signal_from_dict(d["v"]), sched, d["H"],
                   d.get("meta", {}))


def default_H(y0: Field) -> float:
    return max(3.0, linf_norm(y0) + 1.0)


def _zero_phase(state: Field, length: float, cfl: float):
    """Uncontrolled solve; the maximum principle bounds |y| by ||state||_inf."""
    S = max(linf_norm(state), 1e-12)
    params = Params(1.0, max(S, 1.0), length)
    z = ControlSignal.zero(length)
    prob = viscous.ViscousProblem(params, state, z, z, z)
    return prob, min(cfl * state.grid.dx / S, length)


def smooth(y0: Field, length: float, cfl: float = CFL, stride: int | None = None):
    prob, dt = _zero_phase(y0, length, cfl)
    n_steps = math.ceil(length / dt)
    stride = stride or max(1, n_steps // SNAPSHOTS_PER_PHASE)
    return viscous.solve(prob, y0.grid, dt, stride=stride)


def build_pipeline(y0: Field, T: float, eps: float, H: float | None = None,
                   n_modes: int = 1024, cfl: float = CFL) -> ControlPlan:
    """Assemble the four-phase controls for initial state y0.

    The settling control depends on y(T/3), so the smoothing phase is
    simulated here on y0's grid.
    """
    sched = PhaseSchedule(T, eps)
    H = default_H(y0) if H is None else float(H)
    if not H > 2:
        raise ValidationError(f"H must exceed 2, got {H}")
    y1 = smooth(y0, sched.t1, cfl).final
    vbar_settle, gap = settling_control(y1, H, eps, 1.0, n_modes)
    _, v_settle = unscale_controls(ControlSignal.zero(1.0), vbar_settle, eps)
    ubar_push, vbar_push = pushdown_controls(H, eps**3)
    u_push, v_push = unscale_controls(ubar_push, vbar_push, eps)
    t1, _, _, t_passive = sched.lengths
    u = PiecewiseSignal.concatenate([
        ControlSignal.zero(t1), ControlSignal.zero(eps), u_push, ControlSignal.zero(t_passive),
    ])
    v = PiecewiseSignal.concatenate([
        ControlSignal.zero(t1), v_settle, v_push, ControlSignal.zero(t_passive),
    ])
    meta = {
        "predicted_settling_gap": gap,
        "y_t1_l2": l2_norm(y1),
        "n_modes": n_modes,
    }
    return ControlPlan(u, v, sched, H, meta)


def _phase_dt(state: Field, u_k, v_k, length: float, cfl: float, cap: float) -> float:
    v_max = float(np.max(np.abs(v_k.samples)))
    u_abs = float(np.sum(np.abs(np.diff(u_k.primitive(u_k.times)))))
    S = max(linf_norm(state), v_max) + u_abs
    return min(cfl * state.grid.dx / max(S, 1e-12), cap, length)


def run_pipeline(plan: ControlPlan, y0: Field, grid: Grid | None = None, dt: float | None = None,
                 perturbation: Field | None = None, cfl: float = CFL):
    """Simulate the plan in physical time with viscosity 1.

    Each phase gets its own step: the smaller of ``dt`` (if given) and a
    CFL step from a maximum-principle bound on |y|; the push-down phase is
    further capped at eps^4 / 64.  ``perturbation`` is added to the state
    right after the push-down.

    Returns ``(trajectory, final_l2, summary)``.
    """
    grid = grid or y0.grid
    if grid != y0.grid:
        raise ValidationError("grid does not match y0")
    sched, H, eps = plan.schedule, plan.H, plan.schedule.eps
    frame = Params(1.0, H / eps, sched.T)
    viscous.check_resolution(grid, frame)
    state = y0
    times, values = [], []
    phase_norms = {}
    caps = (math.inf, math.inf, eps**4 / 64, math.inf)
    for k, (name, start, u_k, v_k) in enumerate(
        zip(PHASES, plan.u.starts, plan.u.signals, plan.v.signals)
    ):
        length = u_k.t_end
        h = _phase_dt(state, u_k, v_k, length, cfl, caps[k])
        if dt is not None:
            h = min(h, dt)
        params = Params(1.0, H / eps if k else max(linf_norm(state), 1.0), length)
        prob = viscous.ViscousProblem(params, state, u_k, v_k, ControlSignal.zero(length))
        stride = max(1, math.ceil(length / h) // SNAPSHOTS_PER_PHASE)
        traj = viscous.solve(prob, grid, h, stride=stride)
        state = traj.final
        if name == "pushdown" and perturbation is not None:
            state = state + perturbation
        skip = 1 if k else 0
        times.append(traj.times[skip:] + start)
        values.append(traj.values[skip:])
        if name == "pushdown" and perturbation is not None:
            values[-1] = values[-1].copy()
            values[-1][-1] = state.values
        phase_norms[name] = {"t_end": start + length, "l2": l2_norm(state),
                             "linf": linf_norm(state), "dt": h}
    final_l2 = l2_norm(state)
    traj = viscous.Trajectory(
        grid=grid,
        times=np.concatenate(times),
        values=np.concatenate(values),
        controls={"u": plan.u, "v": plan.v},
        meta={"scheme": "godunov-backward-euler", "pipeline": plan.schedule.to_dict(), "H": H},
    )
    summary = {"final_l2": final_l2, "phases": phase_norms, "H": H,
               "schedule": sched.to_dict(), **plan.meta}
    return traj, final_l2, summary
