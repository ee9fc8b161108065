"""Command-line front end: ``blcontrol <command> [flags]``.

Every command writes CSV data plus a JSON sidecar with the resolved config,
library versions and wall time.  Exit status is 0 on success, 1 on invalid
input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import colehopf, control, entropy, io, parabolic, verify, viscous
from .core import (
    ControlSignal,
    Field,
    Grid,
    Layout,
    NumericalError,
    Params,
    ValidationError,
    l2_norm,
    linf_norm,
)

PROFILES = {
    "zero": lambda x: np.zeros_like(x),
    "sin2pi": lambda x: np.sin(2 * np.pi * x),
    "sinpi": lambda x: np.sin(np.pi * x),
    "hump": lambda x: 4 * x * (1 - x),
}

STEADY_KINDS = ("h", "k", "Phi", "Z", "H")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _common(p, **defaults):
    p.add_argument("--grid", type=int, default=defaults.get("grid"), help="number of cells")
    p.add_argument("--dt", type=float, default=None, help="time step (default: CFL-based)")
    p.add_argument("--eps", type=float, default=defaults.get("eps"))
    p.add_argument("--H", type=float, default=defaults.get("H"))
    p.add_argument("--T", type=float, default=defaults.get("T"))
    p.add_argument("--out", type=Path, default=defaults.get("out"))
    p.add_argument("--config", type=Path, default=None, help="key = value file of flag defaults")
    p.add_argument("--seed", type=int, default=0)


def _y0_flags(p, default="sin2pi", amp=1.0):
    p.add_argument("--y0", default=default,
                   help=f"profile ({', '.join(PROFILES)}) or a CSV written by this tool")
    p.add_argument("--amp", type=float, default=amp, help="amplitude multiplying the profile")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blcontrol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate-viscous", help="uncontrolled or steady-controlled viscous solve")
    _common(p, grid=400, T=0.5, out=Path("viscous.csv"))
    _y0_flags(p)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--v0", type=float, default=0.0, help="constant left boundary value")
    p.add_argument("--u", type=float, default=0.0, help="constant interior control")

    p = sub.add_parser("simulate-inviscid", help="Godunov solve of the hyperbolic limit")
    _common(p, grid=800, T=1.0, out=Path("inviscid.csv"))
    _y0_flags(p)
    p.add_argument("--preset", choices=["override", "free"], default="override")
    p.add_argument("--y0-linf", type=float, default=1.0,
                   help="sup norm the override controls are designed for")

    p = sub.add_parser("settle", help="settling control towards h_eps (fast time)")
    _common(p, grid=2000, eps=0.1, H=1.0, T=1.0, out=Path("settle.csv"))
    _y0_flags(p, default="zero")
    p.add_argument("--modes", type=int, default=1024)

    p = sub.add_parser("pushdown", help="push-down from h_eps with its comparison system")
    _common(p, grid=2000, eps=0.1, H=1.0, T=1e-3, out=Path("pushdown.csv"))

    p = sub.add_parser("dissipate", help="passive dissipation of the boundary residue")
    _common(p, grid=4000, eps=0.1, H=1.0, T=1.0, out=Path("dissipate.csv"))
    p.add_argument("--modes", type=int, default=256)

    p = sub.add_parser("steady", help="closed-form steady profiles")
    _common(p, grid=1000, eps=0.1, H=1.0, out=Path("steady.csv"))
    p.add_argument("--kind", choices=STEADY_KINDS, default="h")

    p = sub.add_parser("exact", help="moments-method exact control of a small state")
    _common(p, grid=1000, T=1.0, out=Path("exact.csv"))
    _y0_flags(p, default="sinpi", amp=0.05 * math.sqrt(2))
    p.add_argument("--modes", type=int, default=8)

    p = sub.add_parser("pipeline", help="four-phase approximate null control")
    _common(p, T=3.0, eps=0.1, out=Path("pipeline.csv"))
    _y0_flags(p)
    p.add_argument("--modes", type=int, default=1024)

    p = sub.add_parser("verify", help="acceptance checks")
    vsub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    r = vsub.add_parser("run", help="run the suite and write a JSON report")
    r.add_argument("--config", type=Path, default=None)
    r.add_argument("--out", type=Path, default=Path("report.json"))
    return parser


# ------------------------------------------------------------- helpers


def _apply_config(args, parser_defaults: dict):
    """Fill flags left at their defaults from ``--config``; unknown keys are rejected."""
    if getattr(args, "config", None) is None or args.command == "verify":
        return
    text = Path(args.config).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{args.config}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        attr = key.replace("-", "_")
        if attr not in parser_defaults or attr in ("command", "config", "out"):
            raise ValidationError(f"{args.config}:{lineno}: unknown key {key!r}")
        if getattr(args, attr) == parser_defaults[attr]:
            default = parser_defaults[attr]
            conv = type(default) if default is not None else float
            if isinstance(default, Path):
                conv = Path
            setattr(args, attr, conv(value))


def _resolved(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}


def _initial(args, layout: Layout) -> Field:
    if args.y0 in PROFILES:
        grid = Grid(args.grid, layout)
        return Field.from_function(grid, lambda x: args.amp * PROFILES[args.y0](x))
    f = io.read_field(args.y0)
    if f.grid.layout is not layout:
        raise ValidationError(f"{args.y0}: expected a {layout.value} field")
    return f * args.amp


def _cfl_dt(args, dx: float, speed: float) -> float:
    return args.dt if args.dt is not None else 0.9 * dx / max(speed, 1e-12)


def _stride(T: float, dt: float, frames: int = 200) -> int:
    return max(1, math.ceil(T / dt) // frames)


def _sibling(path: Path, tag: str, suffix: str = ".csv") -> Path:
    return path.with_name(f"{path.stem}_{tag}{suffix}")


def _pair_sidecar(path: Path, config: dict, wall: float, command: str, result: dict):
    """Write ``path``'s JSON sidecar, keeping fields a writer already put there."""
    side = io.sidecar_path(path)
    written = io.read_json(side) if side.exists() else {}
    extra = {k: written[k] for k in ("grid", "controls", "meta") if k in written}
    extra.update(command=command, result=result)
    io.write_sidecar(path, config, wall, **extra)


def _require(**kw):
    for name, value in kw.items():
        if value is None or not value > 0:
            raise ValidationError(f"--{name} must be positive")


# ------------------------------------------------------------- commands


def cmd_simulate_viscous(args) -> tuple:
    _require(T=args.T, nu=args.nu, grid=args.grid)
    y0 = _initial(args, Layout.NODE)
    speed = max(linf_norm(y0), abs(args.v0)) + abs(args.u) * args.T
    params = Params(args.nu, max(speed, 1.0), args.T)
    u = ControlSignal.constant(args.u, args.T)
    prob = viscous.ViscousProblem(params, y0, u, ControlSignal.constant(args.v0, args.T),
                                  ControlSignal.zero(args.T))
    dt = _cfl_dt(args, y0.grid.dx, speed)
    traj = viscous.solve(prob, y0.grid, dt, stride=_stride(args.T, dt))
    io.write_trajectory(args.out, traj)
    return {"final_l2": l2_norm(traj.final), "final_linf": linf_norm(traj.final), "dt": dt}, \
        [args.out]


def cmd_simulate_inviscid(args) -> tuple:
    _require(T=args.T, grid=args.grid)
    y0 = _initial(args, Layout.CELL)
    if args.preset == "override":
        H, u, v = entropy.hyperbolic_null_control(args.y0_linf, args.T)
    else:
        H, u, v = None, ControlSignal.zero(args.T), ControlSignal.zero(args.T)
    if linf_norm(y0) > args.y0_linf * (1 + 1e-12) and args.preset == "override":
        raise ValidationError(f"||y0||_inf = {linf_norm(y0):.4g} exceeds --y0-linf")
    prob = entropy.InviscidProblem(y0, u, v, args.T)
    traj = entropy.solve_inviscid(prob, y0.grid, dt=args.dt, stops=(args.T / 2,), stride=4)
    io.write_trajectory(args.out, traj)
    half = traj.at(args.T / 2)
    return {"H": H, "final_linf": linf_norm(traj.final),
            "half_time_min": float(np.min(half.values)),
            "half_time_max": float(np.max(half.values)),
            "trace_violations": int(entropy.trace_violations(traj, v).size)}, [args.out]


def cmd_settle(args) -> tuple:
    _require(T=args.T, eps=args.eps, H=args.H, grid=args.grid)
    y0 = _initial(args, Layout.NODE)
    vbar, predicted = control.settling_control(y0, args.H, args.eps, args.T, args.modes)
    io.write_signal(args.out, vbar)
    ybar0 = control.scale_to_fast(y0, args.eps)
    speed = max(linf_norm(ybar0), float(np.max(np.abs(vbar.samples))))
    params = Params(args.eps, max(args.H, speed), args.T)
    zero = ControlSignal.zero(args.T)
    prob = viscous.ViscousProblem(params, ybar0, zero, vbar, zero)
    dt = _cfl_dt(args, y0.grid.dx, speed)
    traj = viscous.solve(prob, y0.grid, dt, stride=_stride(args.T, dt))
    traj_path = _sibling(args.out, "trajectory")
    io.write_trajectory(traj_path, traj)
    gap = l2_norm(traj.final - colehopf.h_eps(args.H, args.eps, y0.grid))
    return {"predicted_gap": predicted, "simulated_gap": gap,
            "vbar_max": float(np.max(vbar.samples)), "vbar_end": float(vbar.samples[-1]),
            "steady_control": args.H * math.tanh(args.H / (2 * args.eps))}, [args.out, traj_path]


def cmd_pushdown(args) -> tuple:
    _require(T=args.T, eps=args.eps, H=args.H, grid=args.grid)
    steps = args.dt and math.ceil(args.T / args.dt) or 2000
    ybar, delta, k, bound = verify.pushdown_run(args.H, args.eps, args.T, args.grid, steps)
    delta_path = _sibling(args.out, "delta")
    io.write_field(args.out, ybar)
    io.write_field(delta_path, delta)
    return {"delta_l2": l2_norm(delta), "delta_bound": bound,
            "sandwich_violation": float(np.max(delta.values - (ybar - k).values - args.H))}, \
        [args.out, delta_path]


def cmd_dissipate(args) -> tuple:
    _require(T=args.T, eps=args.eps, H=args.H, grid=args.grid)
    grid = Grid(args.grid, Layout.NODE)
    phi0 = colehopf.phi_eps(args.H, args.eps, grid)
    phiT = colehopf.dissipated_residue(args.H, args.eps, args.T, grid, args.modes)
    initial_path = _sibling(args.out, "initial")
    io.write_field(args.out, phiT)
    io.write_field(initial_path, phi0)
    return {"phi0_l2": l2_norm(phi0), "phiT_l2": l2_norm(phiT)}, [args.out, initial_path]


def cmd_steady(args) -> tuple:
    _require(eps=args.eps, H=args.H, grid=args.grid)
    grid = Grid(args.grid, Layout.NODE)
    make = {"h": colehopf.h_eps, "k": colehopf.k_eps, "Phi": colehopf.phi_eps,
            "Z": colehopf.z_eps, "H": colehopf.H_eps}[args.kind]
    f = make(args.H, args.eps, grid)
    io.write_field(args.out, f)
    out = {"kind": args.kind, "value_at_0": float(f.values[0]), "value_at_1": float(f.values[-1])}
    if args.kind == "k":
        out["K"] = colehopf.k_eps_solve(args.H, args.eps).K
    return out, [args.out]


def cmd_exact(args) -> tuple:
    _require(T=args.T, grid=args.grid)
    y0 = _initial(args, Layout.NODE)
    v, report, traj = parabolic.local_exact_control(y0, args.T, args.modes, dt=args.dt)
    io.write_signal(args.out, v)
    Z0 = colehopf.forward_transform(y0, 1.0)
    alpha, _ = parabolic.heat_null_control_moments(Field(y0.grid, Z0.values - 1.0), args.T,
                                                   args.modes)
    alpha_path, traj_path = _sibling(args.out, "alpha"), _sibling(args.out, "trajectory")
    io.write_signal(alpha_path, alpha)
    io.write_trajectory(traj_path, traj)
    return report, [args.out, alpha_path, traj_path]


def cmd_pipeline(args) -> tuple:
    _require(T=args.T, eps=args.eps)
    H = args.H
    if args.grid is None:
        h_est = H if H is not None else 3.0
        args.grid = max(240, math.ceil(8 * h_est / args.eps))
    y0 = _initial(args, Layout.NODE)
    plan = control.build_pipeline(y0, args.T, args.eps, H, args.modes)
    traj, final_l2, summary = control.run_pipeline(plan, y0, dt=args.dt)
    io.write_trajectory(args.out, traj)
    io.write_plan(_sibling(args.out, "plan", ".json"), plan)
    return summary, [args.out]


def cmd_verify(args) -> tuple:
    cfg = verify.load_config(args.config) if args.config else None
    report = verify.run_suite(cfg)
    io.write_json(args.out, report)
    for line in report["lines"]:
        print(line)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return report, []


COMMANDS = {
    "simulate-viscous": cmd_simulate_viscous,
    "simulate-inviscid": cmd_simulate_inviscid,
    "settle": cmd_settle,
    "pushdown": cmd_pushdown,
    "dissipate": cmd_dissipate,
    "steady": cmd_steady,
    "exact": cmd_exact,
    "pipeline": cmd_pipeline,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(args, {a.dest: a.default for a in sub._actions})
        t0 = time.perf_counter()
        result, written = COMMANDS[args.command](args)
        wall = time.perf_counter() - t0
        for path in written:
            _pair_sidecar(path, _resolved(args), wall, args.command, result)
        if written:
            print(io.sidecar_path(written[0]))
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
