"""Runnable checks for the solvers and the quantitative estimates.

Each acceptance check returns a :class:`CheckResult`; :func:`run_suite`
runs the checks named in a config and gathers them into a JSON-ready report.
Failures (including exceptions) are recorded, never raised.

Config files are ``key = value`` lines; ``#`` starts a comment and lists are
comma separated.  Recognized keys:

``checks``
    IDs to run, e.g. ``A1, A4, A10``.  Absent or empty: nothing runs.
``seed``
    Seed for the random data of A1.
``<id>.<name>``
    Per-check parameter override, e.g. ``A1.trials = 20``,
    ``A4.eps = 0.1, 0.2, 0.3`` or ``A2.n_cells = 4000``.  Names must match
    the check's defaults in :data:`CHECK_DEFAULTS`.
"""

from __future__ import annotations

import math
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from . import colehopf, control, entropy, parabolic, viscous
from .core import (
    ControlSignal,
    Field,
    Grid,
    Interpolation,
    Layout,
    Params,
    ValidationError,
    h1_norm,
    l2_norm,
    linf_norm,
)

# ------------------------------------------------------------------ fitting


@dataclass(frozen=True)
class DecayFit:
    xs: np.ndarray
    ys: np.ndarray
    slope: float
    intercept: float
    kind: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "xs": list(map(float, self.xs)),
                "ys": list(map(float, self.ys)), "slope": self.slope,
                "intercept": self.intercept}


def fit_decay(eps, ys, kind: str = "power") -> DecayFit:
    """Least-squares rate of ``ys`` against ``eps``.

    ``kind="power"`` fits log y against log eps; ``kind="exponential"`` fits
    log y against 1/eps, so y ~ exp(-c / eps) gives slope -c.
    """
    eps = np.asarray(eps, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if eps.shape != ys.shape or eps.size < 3:
        raise ValidationError("need at least three (eps, y) pairs")
    if np.any(ys <= 0) or np.any(eps <= 0):
        raise ValidationError("decay fits need positive eps and y")
    if kind == "power":
        xs = np.log(eps)
    elif kind == "exponential":
        xs = 1.0 / eps
    else:
        raise ValidationError(f"unknown fit kind {kind!r}")
    slope, intercept = np.polyfit(xs, np.log(ys), 1)
    return DecayFit(xs, ys, float(slope), float(intercept), kind)


# -------------------------------------------------------- comparison check


def _fourier(rng, n_modes: int, n_points: np.ndarray, period: float = 1.0) -> np.ndarray:
    k = rng.integers(1, n_modes + 1)
    a = rng.uniform(-1, 1, size=k)
    b = rng.uniform(-1, 1, size=k)
    c0 = rng.uniform(-1, 1)
    m = np.arange(1, k + 1)
    arg = 2 * np.pi * np.outer(n_points / period, m)
    return c0 + np.cos(arg) @ a + np.sin(arg) @ b


def _ordered_pair(rng, pts, period=1.0):
    low = _fourier(rng, 8, pts, period)
    return low, low + np.abs(_fourier(rng, 8, pts, period))


def _pair_violation(trajs) -> float:
    lo, hi = trajs
    return float(max(np.max(lo.values - hi.values), 0.0))


def check_comparison(seed: int, trials: int, n_cells: int = 400, solver: str = "viscous",
                     T: float = 0.05, n_times: int = 64) -> dict:
    """Maximum ordering violation over ``trials`` random ordered data tuples.

    Each trial draws y0, u, v0 (and v1 for the viscous solver) as pairs
    low <= high of Fourier polynomials with at most 8 modes and runs both
    members with a shared step.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    times = np.linspace(0.0, T, n_times)
    layout = Layout.NODE if solver == "viscous" else Layout.CELL
    grid = Grid(n_cells, layout)
    for _ in range(trials):
        y0 = _ordered_pair(rng, grid.x)
        u = _ordered_pair(rng, times, T)
        v0 = _ordered_pair(rng, times, T)
        v1 = _ordered_pair(rng, times, T)
        bound = max(np.max(np.abs(y0)), np.max(np.abs(v0)), np.max(np.abs(v1)))
        bound += T * np.max(np.abs(u))
        dt = 0.9 * grid.dx / bound
        runs = []
        for i in (0, 1):
            us = ControlSignal(times, u[i], Interpolation.LINEAR)
            v0s = ControlSignal(times, v0[i], Interpolation.LINEAR)
            if solver == "viscous":
                v1s = ControlSignal(times, v1[i], Interpolation.LINEAR)
                params = Params(1.0, max(bound, 1.0), T)
                prob = viscous.ViscousProblem(params, Field(grid, y0[i]), us, v0s, v1s)
                runs.append(viscous.solve(prob, grid, dt, stride=1))
            elif solver == "inviscid":
                prob = entropy.InviscidProblem(Field(grid, y0[i]), us, v0s, T)
                runs.append(entropy.solve_inviscid(prob, grid, dt=dt, stride=1))
            else:
                raise ValidationError(f"unknown solver {solver!r}")
        worst = max(worst, _pair_violation(runs))
    return {"solver": solver, "trials": trials, "n_cells": n_cells, "max_violation": worst}


# ------------------------------------------------------------- FD oracle


def settle_fd(Z0: Field, H: float, eps: float, T: float, dt: float) -> Field:
    """Backward-Euler finite differences for the settling heat system.

    Z_t - eps Z_xx + (H^2 / 4 eps) Z = 0, Z(t, 0) = 1, Z_x(t, 1) = 0 (ghost
    node reflection), banded LU at every step.
    """
    n = Z0.grid.n_cells
    dx = Z0.grid.dx
    steps = max(1, math.ceil(T / dt - 1e-9))
    h = T / steps
    r = eps * h / dx**2
    diag = 1.0 + 2.0 * r + h * H**2 / (4 * eps)
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = diag
    ab[2, :-1] = -r
    ab[2, n - 2] = -2.0 * r
    z = Z0.values[1:].copy()
    for _ in range(steps):
        rhs = z.copy()
        rhs[0] += r * 1.0
        z = solve_banded((1, 1), ab, rhs, check_finite=False)
    return Field(Z0.grid, np.concatenate([[1.0], z]))


# ------------------------------------------------------------ checks


@dataclass
class CheckResult:
    id: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    runtime_limit_s: float = math.inf
    error: str | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        extra = f" [{self.error}]" if self.error else ""
        return f"{self.id} {status} ({self.runtime_s:.1f}s) {self.title}: {shown}{extra}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def check_a1(seed=0, trials=100, n_cells=400):
    vis = check_comparison(seed, trials, n_cells, "viscous")
    inv = check_comparison(seed + 1, trials, n_cells, "inviscid")
    worst = max(vis["max_violation"], inv["max_violation"])
    return worst <= 1e-12, {"viscous_violation": vis["max_violation"],
                            "inviscid_violation": inv["max_violation"]}, {"max_violation": 1e-12}


def check_a2(H=1.0, eps=0.1, T=0.5, n_cells=4000):
    grid = Grid(n_cells, Layout.NODE)
    h = colehopf.h_eps(H, eps, grid)
    v0 = ControlSignal.constant(float(h.values[0]), T)
    zero = ControlSignal.zero(T)
    prob = viscous.ViscousProblem(Params(eps, H, T), h, zero, v0, zero)
    traj = viscous.solve(prob, grid, 0.9 * grid.dx / H, stride=10**9)
    drift = linf_norm(traj.final - h)
    return drift <= 1e-3, {"linf_drift": drift}, {"linf_drift": 1e-3}


def check_a3(H=1.0, eps=(0.1, 0.15, 0.2), n_cells=4000):
    grid = Grid(n_cells, Layout.NODE)
    ratios = []
    for e in eps:
        gap = linf_norm(colehopf.k_eps(H, e, grid) - colehopf.h_eps(H, e, grid))
        ratios.append(gap / (2 * H * math.exp(-H / e)))
    return max(ratios) <= 1.0, {"ratios": ratios}, {"ratio": 1.0}


def settling_bound(H, eps, T):
    return math.sqrt(17) * math.exp(-H**2 * T / (4 * eps)) / math.sqrt(eps)


def check_a4(H=1.0, T=1.0, eps=(0.1, 0.15, 0.2, 0.3), n_cells=4000, n_modes=1024):
    grid = Grid(n_cells, Layout.NODE)
    gaps, ratios = [], []
    for e in eps:
        ZT, _ = colehopf.settle_heat_solve(Field.constant(grid, 1.0), H, e, T, n_modes)
        gap = h1_norm(ZT - colehopf.H_eps(H, e, grid))
        gaps.append(gap)
        ratios.append(gap / settling_bound(H, e, T))
    fit = fit_decay(eps, gaps, "exponential")
    slope_limit = -H**2 * T / 4 * 0.95
    ok = max(ratios) <= 1.0 and fit.slope <= slope_limit
    return ok, {"bound_ratios": ratios, "semilog_slope": fit.slope}, \
        {"bound_ratio": 1.0, "semilog_slope_max": slope_limit}


def check_a5(H=1.0, eps=0.2, T=1.0, n_cells=4000, dt=2e-5, n_modes=1024):
    grid = Grid(n_cells, Layout.NODE)
    Z0 = Field.constant(grid, 1.0)
    ZT, _ = colehopf.settle_heat_solve(Z0, H, eps, T, n_modes)
    diff = linf_norm(ZT - settle_fd(Z0, H, eps, T, dt))
    return diff <= 1e-4, {"linf_difference": diff}, {"linf_difference": 1e-4}


def pushdown_run(H=1.0, eps=0.1, duration=1e-3, n_cells=2000, steps=2000):
    """Fast-time push-down from h_eps and its comparison system.

    Returns ``(ybar(T), delta(T), bound)`` where z = k_eps - H + delta solves
    the comparison system with z(t, 1) = vbar(t) - H.
    """
    grid = Grid(n_cells, Layout.NODE)
    y1 = colehopf.h_eps(H, eps, grid)
    k = colehopf.k_eps(H, eps, grid)
    ubar, vbar = control.pushdown_controls(H, duration)
    right = ControlSignal(vbar.times, vbar.samples - H, Interpolation.LINEAR)
    params = Params(eps, H, duration)
    dt = duration / steps
    zero = ControlSignal.zero(duration)
    ybar = viscous.solve(viscous.ViscousProblem(params, y1, ubar, vbar, zero), grid, dt,
                         stride=10**9).final
    z = viscous.solve(viscous.ViscousProblem(params, y1, ubar, vbar, right), grid, dt,
                      stride=10**9).final
    delta = Field(grid, z.values - k.values + H)
    bound = control.pushdown_delta_bound(H, eps, duration, l2_norm(y1 - k))
    return ybar, delta, k, bound


def check_a6(H=1.0, eps=0.1, duration=1e-3, n_cells=2000):
    ybar, delta, k, bound = pushdown_run(H, eps, duration, n_cells)
    ratio = l2_norm(delta) / bound
    sandwich = float(np.max(delta.values - (ybar.values - k.values + H)))
    ok = ratio <= 1.2 and sandwich <= 1e-12
    return ok, {"delta_l2": l2_norm(delta), "bound": bound, "ratio": ratio,
                "sandwich_violation": sandwich}, {"ratio": 1.2, "sandwich_violation": 1e-12}


def w_bound(H, eps, T, eta=0.25):
    """Explicit bound on ||w(T)||^2 with N = floor(eps^-eta)."""
    return (8 * math.pi**2 / (3 * H**2) * eps ** (2 - 3 * eta)
            + 4 * math.exp(-2 * eps ** (-2 * eta) * math.pi**2 * T))


def check_a7(H=1.0, T=1.0, eps=(0.1, 0.05, 0.025), n_cells=8000, n_modes=256):
    grid = Grid(n_cells, Layout.NODE)
    norms, w_ratios = [], []
    for e in eps:
        norms.append(l2_norm(colehopf.dissipated_residue(H, e, T, grid, n_modes)))
        _, wT = colehopf.dissipate_heat_solve(H, e, T, n_modes, grid)
        w_ratios.append(l2_norm(wT) ** 2 / w_bound(H, e, T))
    fit = fit_decay(eps, norms, "power")
    e0 = eps[0]
    phi0 = colehopf.phi_eps(H, e0, grid)
    speed = H / e0
    traj = viscous.solve(viscous.zero_problem(phi0, Params(1.0, speed, T)), grid,
                         0.9 * grid.dx / speed, stride=10**9)
    cross = l2_norm(traj.final - colehopf.dissipated_residue(H, e0, T, grid, n_modes))
    ok = max(w_ratios) <= 1.0 and fit.slope >= 0.85 and cross <= 5e-3
    return ok, {"phi_l2": norms, "w_bound_ratios": w_ratios, "loglog_slope": fit.slope,
                "viscous_cross_check": cross}, \
        {"w_bound_ratio": 1.0, "loglog_slope_min": 0.85, "viscous_cross_check": 5e-3}


def check_a8(y0_linf=1.0, T=1.0, n_cells=800):
    grid = Grid(n_cells, Layout.CELL)
    y0 = Field.from_function(grid, lambda x: y0_linf * np.sin(2 * np.pi * x))
    H, u, v = entropy.hyperbolic_null_control(y0_linf, T)
    traj = entropy.solve_inviscid(entropy.InviscidProblem(y0, u, v, T), grid, stops=(T / 2,))
    half = traj.values[int(np.argmin(np.abs(traj.times - T / 2)))]
    inner = (grid.x >= 2 * grid.dx) & (grid.x <= 1 - 2 * grid.dx)
    plateau = float(np.max(np.abs(half[inner] - H)))
    final = linf_norm(traj.final)
    ok = final <= 5e-2 and plateau <= 1e-6 * H
    return ok, {"H": H, "final_linf": final, "half_time_plateau_error": plateau}, \
        {"final_linf": 5e-2, "half_time_plateau_error": 1e-6 * H}


def check_a9(T=1.0, n_modes=8, y0_l2=0.05, n_cells=1000):
    grid = Grid(n_cells, Layout.NODE)
    y0 = Field.from_function(grid, lambda x: y0_l2 * math.sqrt(2) * np.sin(np.pi * x))
    _, rep, _ = parabolic.local_exact_control(y0, T, n_modes)
    ok = rep["alpha_linf"] < 1 and rep["residual_l2"] <= 1e-4 and rep["burgers_final_l2"] <= 1e-3
    return ok, {"alpha_linf": rep["alpha_linf"], "heat_residual_l2": rep["residual_l2"],
                "burgers_final_l2": rep["burgers_final_l2"], "gram_cond": rep["gram_cond"]}, \
        {"alpha_linf": 1.0, "heat_residual_l2": 1e-4, "burgers_final_l2": 1e-3}


def check_a10(T=3.0, H=3.0, eps=(0.2, 0.1, 0.05), n_cells=480):
    grid = Grid(n_cells, Layout.NODE)
    y0 = Field.from_function(grid, lambda x: np.sin(2 * np.pi * x))
    finals = []
    for e in eps:
        plan = control.build_pipeline(y0, T, e, H)
        finals.append(control.run_pipeline(plan, y0)[1])
    decreasing = all(b < a for a, b in zip(finals, finals[1:]))
    ratio = finals[-1] / finals[0]
    return decreasing and ratio <= 0.2, {"final_l2": finals, "ratio_last_first": ratio}, \
        {"strictly_decreasing": True, "ratio_last_first": 0.2}


CHECKS = {
    "A1": ("comparison principle", check_a1, 30),
    "A2": ("steady-state stationarity", check_a2, 10),
    "A3": ("steady-state gap", check_a3, 1),
    "A4": ("settling decay", check_a4, 10),
    "A5": ("spectral vs finite differences", check_a5, 60),
    "A6": ("push-down sandwich", check_a6, 60),
    "A7": ("dissipation rate", check_a7, 120),
    "A8": ("hyperbolic null control", check_a8, 20),
    "A9": ("exact parabolic stage", check_a9, 60),
    "A10": ("full pipeline", check_a10, 600),
}


def _defaults(fn) -> dict:
    import inspect

    return {k: p.default for k, p in inspect.signature(fn).parameters.items()}


CHECK_DEFAULTS = {cid: _defaults(fn) for cid, (_, fn, _) in CHECKS.items()}


def run_check(cid: str, overrides: dict | None = None) -> CheckResult:
    title, fn, limit = CHECKS[cid]
    kwargs = dict(CHECK_DEFAULTS[cid])
    kwargs.update(overrides or {})
    t0 = time.perf_counter()
    try:
        ok, measured, tol = fn(**kwargs)
        result = CheckResult(cid, title, bool(ok), measured, tol)
    except Exception as exc:  # recorded, not raised
        result = CheckResult(cid, title, False, error=f"{type(exc).__name__}: {exc}")
        result.measured["traceback"] = traceback.format_exc(limit=3)
    result.runtime_s = time.perf_counter() - t0
    result.runtime_limit_s = limit
    if result.runtime_s > limit:
        result.passed = False
        result.error = (result.error or "") + f" runtime {result.runtime_s:.1f}s > {limit}s"
    return result


# ------------------------------------------------------------- config


DEFAULT_CONFIG = {"checks": list(CHECKS), "seed": 0}


def _parse_value(text: str):
    items = [s.strip() for s in text.split(",") if s.strip()]
    parsed = []
    for s in items:
        for conv in (int, float):
            try:
                parsed.append(conv(s))
                break
            except ValueError:
                continue
        else:
            parsed.append(s)
    if "," in text:
        return parsed
    return parsed[0] if parsed else ""


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into a config dict, validating keys."""
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key] = _parse_value(value)
    validate_config(cfg)
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def validate_config(cfg: dict):
    for key, value in cfg.items():
        if key in ("checks", "seed"):
            continue
        cid, _, name = key.partition(".")
        if cid not in CHECKS or name not in CHECK_DEFAULTS[cid]:
            raise ValidationError(f"unknown config key {key!r}")
    checks = cfg.get("checks", [])
    checks = [checks] if isinstance(checks, str) else checks
    for cid in checks:
        if cid not in CHECKS:
            raise ValidationError(f"unknown check {cid!r}")


def _overrides(cfg: dict, cid: str) -> dict:
    out = {}
    for key, value in cfg.items():
        c, _, name = key.partition(".")
        if c == cid and name:
            default = CHECK_DEFAULTS[cid][name]
            if isinstance(default, tuple) and not isinstance(value, list):
                value = [value]
            out[name] = tuple(value) if isinstance(value, list) else value
    if cid == "A1" and "seed" in cfg:
        out.setdefault("seed", int(cfg["seed"]))
    return out


def max_workers() -> int:
    env = os.environ.get("BLC_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def run_suite(config: dict | None = None) -> dict:
    """Run the configured checks; the report lists one entry per check."""
    cfg = DEFAULT_CONFIG if config is None else config
    validate_config(cfg)
    checks = cfg.get("checks", [])
    checks = [checks] if isinstance(checks, str) else list(checks)
    warnings = [] if checks else ["no checks configured"]
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        results = list(pool.map(lambda c: run_check(c, _overrides(cfg, c)), checks))
    return {
        "config": cfg,
        "checks": [asdict(r) for r in results],
        "passed": all(r.passed for r in results),
        "n_checks": len(results),
        "warnings": warnings,
        "wall_time_s": time.perf_counter() - t0,
        "lines": [r.line() for r in results],
    }
