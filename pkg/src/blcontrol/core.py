"""Grids, fields, norms and time-dependent control signals.

Everything here is immutable after construction; solvers build new
objects instead of mutating old ones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Input data violates a documented precondition."""


class ResolutionError(ValidationError):
    """Grid too coarse to resolve the boundary layer."""


class CFLError(ValidationError):
    """Time step exceeds the advective stability bound."""


class NumericalError(ArithmeticError):
    """A computation failed or produced non-finite values."""


class RangeError(NumericalError):
    """An exponent left the representable double range."""


class Layout(str, enum.Enum):
    NODE = "node_centered"
    CELL = "cell_centered"


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of [0, 1]."""

    n_cells: int
    layout: Layout = Layout.NODE

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValidationError(f"n_cells must be an integer >= 4, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "layout", Layout(self.layout))

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def size(self) -> int:
        return self.n_cells + 1 if self.layout is Layout.NODE else self.n_cells

    @property
    def x(self) -> np.ndarray:
        if self.layout is Layout.NODE:
            return np.linspace(0.0, 1.0, self.n_cells + 1)
        return (np.arange(self.n_cells) + 0.5) / self.n_cells

    def nodes(self) -> "Grid":
        return Grid(self.n_cells, Layout.NODE)

    def cells(self) -> "Grid":
        return Grid(self.n_cells, Layout.CELL)


@dataclass(frozen=True, eq=False)
class Field:
    """Spatial profile sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != self.grid.size:
            raise ValidationError(
                f"expected {self.grid.size} samples for {self.grid.layout.value} "
                f"grid with {self.grid.n_cells} cells, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise NumericalError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return cls(grid, np.broadcast_to(f(grid.x), (grid.size,)))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.size, float(c)))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


def _check_same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise ValidationError("fields live on different grids")


def integrate(f: Field) -> float:
    """Integral over [0, 1]: trapezoid on nodes, midpoint on cells."""
    if f.grid.layout is Layout.NODE:
        v = f.values
        return float(f.grid.dx * (np.sum(v[1:-1]) + 0.5 * (v[0] + v[-1])))
    return float(f.grid.dx * np.sum(f.values))


def derivative(f: Field) -> np.ndarray:
    """Centered differences inside, second-order one-sided at both ends."""
    if f.grid.layout is not Layout.NODE:
        raise ValidationError("derivatives are only defined on node-centered fields")
    return np.gradient(f.values, f.grid.dx, edge_order=2)


def l2_norm(f: Field) -> float:
    return math.sqrt(integrate(f.with_values(f.values**2)))


def h1_norm(f: Field) -> float:
    if f.grid.layout is not Layout.NODE:
        raise ValidationError("h1_norm needs a node-centered field")
    df = f.with_values(derivative(f))
    return math.sqrt(l2_norm(f) ** 2 + l2_norm(df) ** 2)


def linf_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


@dataclass(frozen=True)
class Params:
    """Viscosity, plateau height and horizon of one solve."""

    viscosity: float
    H: float
    T: float

    def __post_init__(self):
        for name in ("viscosity", "H", "T"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be positive, got {value}")


class Interpolation(str, enum.Enum):
    CONSTANT = "piecewise_constant_left"
    LINEAR = "piecewise_linear"


# relative slack when checking that t lies inside the signal's window
_T_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Scalar control sampled in time.

    ``piecewise_constant_left`` holds each sample until the next sample time;
    ``piecewise_linear`` interpolates linearly between samples.
    """

    times: np.ndarray
    samples: np.ndarray
    interpolation: Interpolation = Interpolation.LINEAR

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        samples = np.array(self.samples, dtype=float)
        if times.ndim != 1 or times.shape != samples.shape or times.size == 0:
            raise ValidationError("times and samples must be equal-length 1-D arrays")
        if times[0] != 0.0:
            raise ValidationError("control signals must start at t = 0")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("control times must be strictly increasing")
        if not np.all(np.isfinite(samples)):
            raise NumericalError("control samples must be finite")
        times.setflags(write=False)
        samples.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))
        # running integral at the sample times
        dt = np.diff(times)
        if self.interpolation is Interpolation.LINEAR:
            pieces = 0.5 * dt * (samples[1:] + samples[:-1])
        else:
            pieces = dt * samples[:-1]
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        cum.setflags(write=False)
        object.__setattr__(self, "_cumulative", cum)

    @classmethod
    def constant(cls, value: float, t_end: float) -> "ControlSignal":
        return cls(np.array([0.0, t_end]), np.array([value, value]), Interpolation.CONSTANT)

    @classmethod
    def zero(cls, t_end: float) -> "ControlSignal":
        return cls.constant(0.0, t_end)

    @classmethod
    def from_function(cls, f, t_end: float, n_samples: int = 2048,
                      interpolation=Interpolation.LINEAR) -> "ControlSignal":
        t = np.linspace(0.0, t_end, n_samples)
        return cls(t, np.array([f(s) for s in t], dtype=float), interpolation)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def _check_range(self, t):
        t = np.asarray(t, dtype=float)
        slack = _T_SLACK * max(1.0, self.t_end)
        if np.any(t < -slack) or np.any(t > self.t_end + slack):
            raise ValidationError(f"time {t} outside control window [0, {self.t_end}]")
        return np.clip(t, 0.0, self.t_end)

    def __call__(self, t):
        t = self._check_range(t)
        if self.times.size == 1:
            return np.full_like(t, self.samples[0]) if t.ndim else float(self.samples[0])
        if self.interpolation is Interpolation.LINEAR:
            out = np.interp(t, self.times, self.samples)
        else:
            idx = np.searchsorted(self.times, t, side="right") - 1
            out = self.samples[np.clip(idx, 0, self.samples.size - 1)]
        return float(out) if np.ndim(out) == 0 else out

    def primitive(self, t):
        """Running integral from 0 to t (vectorized)."""
        t = self._check_range(t)
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 1)
        tau = t - self.times[k]
        out = self._cumulative[k] + tau * self.samples[k]
        if self.interpolation is Interpolation.LINEAR and self.times.size > 1:
            kk = np.minimum(k, self.times.size - 2)
            slope = (self.samples[kk + 1] - self.samples[kk]) / (self.times[kk + 1] - self.times[kk])
            out = out + 0.5 * slope * tau**2
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the interpolant over [a, b]."""
        return self.primitive(b) - self.primitive(a)

    def to_dict(self) -> dict:
        return {
            "kind": "samples",
            "interpolation": self.interpolation.value,
            "times": self.times.tolist(),
            "samples": self.samples.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PiecewiseSignal:
    """Concatenation of signals over consecutive windows.

    Phase k covers (starts[k], starts[k+1]] in global time and is evaluated
    as ``signals[k](t - starts[k])``.  At a joint the left phase wins.
    """

    starts: tuple
    signals: tuple
    t_end_: float = field(default=0.0)

    def __post_init__(self):
        starts = tuple(float(s) for s in self.starts)
        if len(starts) != len(self.signals) or not starts or starts[0] != 0.0:
            raise ValidationError("need one start time per phase, beginning at 0")
        ends = [s + sig.t_end for s, sig in zip(starts, self.signals)]
        for k in range(len(starts) - 1):
            if not math.isclose(ends[k], starts[k + 1], rel_tol=1e-12, abs_tol=1e-15):
                raise ValidationError(f"phase {k} ends at {ends[k]} but phase {k + 1} "
                                      f"starts at {starts[k + 1]}")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "t_end_", ends[-1])

    @classmethod
    def concatenate(cls, signals: Sequence) -> "PiecewiseSignal":
        starts = [0.0]
        for sig in signals[:-1]:
            starts.append(starts[-1] + sig.t_end)
        return cls(tuple(starts), tuple(signals))

    @property
    def t_end(self) -> float:
        return self.t_end_

    @property
    def breakpoints(self) -> list:
        return list(self.starts[1:])

    def _check_range(self, t):
        t = np.asarray(t, dtype=float)
        slack = _T_SLACK * max(1.0, self.t_end)
        if np.any(t < -slack) or np.any(t > self.t_end + slack):
            raise ValidationError(f"time {t} outside control window [0, {self.t_end}]")
        return np.clip(t, 0.0, self.t_end)

    def __call__(self, t):
        t = self._check_range(t)
        out = np.zeros_like(t)
        for k, (s, sig) in enumerate(zip(self.starts, self.signals)):
            mask = (t > s) & (t <= s + sig.t_end) if k else (t <= sig.t_end)
            if np.any(mask):
                out = np.where(mask, sig(np.clip(t - s, 0.0, sig.t_end)), out)
        return float(out) if np.ndim(out) == 0 else out

    def primitive(self, t):
        t = self._check_range(t)
        out = np.zeros_like(t)
        for s, sig in zip(self.starts, self.signals):
            out = out + sig.primitive(np.clip(t - s, 0.0, sig.t_end))
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a: float, b: float) -> float:
        return self.primitive(b) - self.primitive(a)

    def to_dict(self) -> dict:
        return {
            "kind": "piecewise",
            "starts": list(self.starts),
            "phases": [sig.to_dict() for sig in self.signals],
        }


def signal_from_dict(d: dict):
    if d["kind"] == "piecewise":
        return PiecewiseSignal(tuple(d["starts"]), tuple(signal_from_dict(p) for p in d["phases"]))
    return ControlSignal(np.array(d["times"]), np.array(d["samples"]), d["interpolation"])


def eval_control(c, t: float) -> float:
    return c(t)
