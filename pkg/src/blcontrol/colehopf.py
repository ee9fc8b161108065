"""Cole-Hopf transforms, closed-form steady states and spectral heat solvers.

Two sine bases appear:

* ``f_basis``: f_n(x) = sqrt(2) sin((n + 1/2) pi x), n >= 0, eigenfunctions
  of -d^2/dx^2 with f(0) = 0, f'(1) = 0 (settling problem, Dirichlet at 0
  and Neumann at 1);
* ``e_basis``: e_n(x) = sqrt(2) sin(n pi x), n >= 1, Dirichlet at both ends
  (dissipation problem).

Projections use trapezoid quadrature on the caller's grid unless a
closed-form coefficient is known.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .core import (
    ControlSignal,
    Field,
    Grid,
    Interpolation,
    Layout,
    NumericalError,
    RangeError,
    ValidationError,
    derivative,
    h1_norm,
    integrate,
)

EXP_LIMIT = 700.0
SQRT2 = math.sqrt(2.0)
# entries per block when evaluating mode sums on a grid
_BLOCK = 1 << 22


class Basis(str, enum.Enum):
    F = "f_basis"
    E = "e_basis"


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Truncated coefficients on one of the two sine bases."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ValidationError("coeffs must be a non-empty 1-D array")
        if not np.all(np.isfinite(coeffs)):
            raise NumericalError("spectral coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "basis", Basis(self.basis))

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    @property
    def indices(self) -> np.ndarray:
        start = 0 if self.basis is Basis.F else 1
        return np.arange(start, start + self.n_modes)

    @property
    def frequencies(self) -> np.ndarray:
        return frequencies(self.basis, self.n_modes)

    def evaluate(self, grid: Grid) -> Field:
        return Field(grid, synthesize(self.coeffs, self.frequencies, grid.x))


def frequencies(basis: Basis, n_modes: int) -> np.ndarray:
    """lambda_n = (n + 1/2) pi for f_basis, n pi for e_basis."""
    n = np.arange(n_modes, dtype=float)
    if Basis(basis) is Basis.F:
        return (n + 0.5) * np.pi
    return (n + 1.0) * np.pi


def synthesize(coeffs: np.ndarray, freqs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sum_n c_n sqrt(2) sin(k_n x) at every x, summed pairwise per point."""
    return _mode_sum(coeffs, freqs, x, np.sin)


def _mode_sum(coeffs, freqs, x, fn):
    out = np.empty(x.size)
    rows = max(1, _BLOCK // max(1, freqs.size))
    for i in range(0, x.size, rows):
        xs = x[i:i + rows]
        out[i:i + rows] = np.sum(coeffs[None, :] * fn(np.outer(xs, freqs)), axis=1)
    return SQRT2 * out


def project(f: Field, basis: Basis, n_modes: int) -> SpectralState:
    """Trapezoid-rule coefficients <f | basis_n> for the first n_modes functions."""
    if f.grid.layout is not Layout.NODE:
        raise ValidationError("projection needs a node-centered field")
    freqs = frequencies(basis, n_modes)
    if freqs[-1] > np.pi * f.grid.n_cells / 2:
        raise ValidationError(
            f"{n_modes} modes are not resolved by {f.grid.n_cells} cells; "
            f"use n_modes <= {f.grid.n_cells // 2}"
        )
    w = np.full(f.grid.size, f.grid.dx)
    w[0] = w[-1] = 0.5 * f.grid.dx
    g = w * f.values
    x = f.grid.x
    coeffs = np.empty(n_modes)
    cols = max(1, _BLOCK // x.size)
    for j in range(0, n_modes, cols):
        block = np.sin(np.outer(freqs[j:j + cols], x))
        coeffs[j:j + cols] = SQRT2 * np.sum(block * g[None, :], axis=1)
    return SpectralState(basis, coeffs)


# ---------------------------------------------------------------- transforms


def forward_transform(y: Field, nu: float) -> Field:
    """z(x) = exp(-(1 / 2 nu) int_0^x y), so z(0) = 1 and z > 0."""
    if y.grid.layout is not Layout.NODE:
        raise ValidationError("forward_transform needs a node-centered field")
    if not nu > 0:
        raise ValidationError("nu must be positive")
    expo = -cumulative_trapezoid(y.values, dx=y.grid.dx, initial=0.0) / (2.0 * nu)
    if np.max(np.abs(expo)) > EXP_LIMIT:
        raise RangeError(f"Cole-Hopf exponent reaches {np.max(np.abs(expo)):.4g} > {EXP_LIMIT}")
    return Field(y.grid, np.exp(expo))


def inverse_transform(z: Field, nu: float) -> Field:
    """y = -2 nu z_x / z."""
    if z.grid.layout is not Layout.NODE:
        raise ValidationError("inverse_transform needs a node-centered field")
    if np.any(z.values <= 0):
        raise ValidationError("inverse Cole-Hopf transform needs z > 0")
    return Field(z.grid, -2.0 * nu * derivative(z) / z.values)


# ------------------------------------------------------------- steady states


def _check_positive(**kw):
    for name, value in kw.items():
        if not (np.isfinite(value) and value > 0):
            raise ValidationError(f"{name} must be positive, got {value}")


def h_eps(H: float, eps: float, grid: Grid) -> Field:
    """Steady state H tanh(H (1 - x) / 2 eps) with left trace H tanh(H / 2 eps)."""
    _check_positive(H=H, eps=eps)
    return Field(grid, H * np.tanh(H / (2 * eps) * (1 - grid.x)))


@dataclass(frozen=True)
class SteadySpec:
    """Steady state with left trace exactly H: K tanh(K / 2 eps) = H."""

    H: float
    eps: float
    K: float

    def profile(self, grid: Grid) -> Field:
        return Field(grid, self.K * np.tanh(self.K / (2 * self.eps) * (1 - grid.x)))


def k_eps_solve(H: float, eps: float, max_expansions: int = 200) -> SteadySpec:
    _check_positive(H=H, eps=eps)

    def g(K):
        return K * math.tanh(K / (2 * eps)) - H

    lo, hi = H, 2 * H
    for _ in range(max_expansions):
        if g(hi) >= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise NumericalError(f"could not bracket K for H = {H}, eps = {eps}")
    if g(lo) >= 0:
        K = lo
    else:
        K = brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return SteadySpec(H, eps, K)


def k_eps(H: float, eps: float, grid: Grid) -> Field:
    return k_eps_solve(H, eps).profile(grid)


def H_eps(H: float, eps: float, grid: Grid) -> Field:
    """Cole-Hopf image of h_eps: cosh(a (1 - x)) / cosh(a), a = H / 2 eps."""
    _check_positive(H=H, eps=eps)
    if H / eps > 2 * EXP_LIMIT:
        raise RangeError(f"H/eps = {H / eps:.4g} exceeds {2 * EXP_LIMIT}")
    a = H / (2 * eps)
    x = grid.x
    # cosh(a(1-x))/cosh(a) = e^{-ax} (1 + e^{-2a(1-x)}) / (1 + e^{-2a})
    return Field(grid, np.exp(-a * x) * (1 + np.exp(-2 * a * (1 - x))) / (1 + np.exp(-2 * a)))


def phi_eps(H: float, eps: float, grid: Grid) -> Field:
    """Boundary residue (H / eps)(tanh(H (1 - x) / 2 eps) - 1) <= 0."""
    _check_positive(H=H, eps=eps)
    return Field(grid, H / eps * (np.tanh(H / (2 * eps) * (1 - grid.x)) - 1.0))


def z_eps(H: float, eps: float, grid: Grid) -> Field:
    """Cole-Hopf image of phi_eps: (1 + e^{(H/eps)(x-1)}) / (1 + e^{-H/eps})."""
    _check_positive(H=H, eps=eps)
    r = H / eps
    return Field(grid, (1 + np.exp(r * (grid.x - 1))) / (1 + np.exp(-r)))


# ------------------------------------------------------------ settling system


class SettlingSolution:
    """Closed-form modal solution of

        Z_t - eps Z_xx = -(H^2 / 4 eps) Z,  Z(t, 0) = 1,  Z_x(t, 1) = 0.

    Z(t) = H_eps + sum_n alpha_n exp(-kappa_n t) f_n with
    kappa_n = eps (lambda_n^2 + H^2 / 4 eps^2).
    """

    def __init__(self, Z0: Field, H: float, eps: float, n_modes: int):
        _check_positive(H=H, eps=eps)
        if n_modes < 8:
            raise ValidationError("settling solve needs n_modes >= 8")
        if abs(Z0.values[0] - 1.0) > 1e-8:
            raise ValidationError(f"Z0(0) must be 1, got {Z0.values[0]!r}")
        self.H, self.eps, self.grid = H, eps, Z0.grid
        self.a = H / (2 * eps)
        self.steady = H_eps(H, eps, Z0.grid)
        self.lambdas = frequencies(Basis.F, n_modes)
        self.kappa = eps * (self.lambdas**2 + self.a**2)
        self.alpha = project(Z0 - self.steady, Basis.F, n_modes).coeffs
        self.Z0 = Z0
        self.Z0_slope = float(derivative(Z0)[0])
        self.Z0_h1 = h1_norm(Z0)

    @staticmethod
    def steady_coefficients(H: float, eps: float, n_modes: int) -> np.ndarray:
        """<H_eps | f_n> = sqrt(2) lambda_n / (H^2 / 4 eps^2 + lambda_n^2)."""
        lam = frequencies(Basis.F, n_modes)
        return SQRT2 * lam / ((H / (2 * eps)) ** 2 + lam**2)

    @staticmethod
    def one_coefficients(n_modes: int) -> np.ndarray:
        """<1 | f_n> = sqrt(2) / lambda_n."""
        return SQRT2 / frequencies(Basis.F, n_modes)

    def tail_bound(self, t: float) -> float:
        """Upper bound on the truncated part of Z_x(t, 0).

        Uses |alpha_n| <= (sqrt(2) / lambda_n)(2 + ||Z0||_H1 / 2), which
        follows from the closed-form <H_eps | f_n> and the integration-by-parts
        bound on <Z0 | f_n>.
        """
        if t <= 0:
            return math.inf
        N = self.lambdas.size
        lam_N = (N + 0.5) * np.pi
        ratio = math.exp(-2 * self.eps * np.pi**2 * N * t)
        if ratio >= 1.0:
            return math.inf
        head = math.exp(-self.eps * (lam_N**2 + self.a**2) * t)
        return 2 * (2 + 0.5 * self.Z0_h1) * head / (1 - ratio)

    def state(self, t: float) -> SpectralState:
        """Coefficients of Z(t) - H_eps."""
        return SpectralState(Basis.F, self.alpha * np.exp(-self.kappa * t))

    def profile(self, t: float) -> Field:
        w = synthesize(self.alpha * np.exp(-self.kappa * t), self.lambdas, self.grid.x)
        return Field(self.grid, self.steady.values + w)

    def left_slope(self, t):
        """Z_x(t, 0) = -a tanh(a) + sum_n alpha_n e^{-kappa_n t} sqrt(2) lambda_n."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.size)
        steady = -self.a * math.tanh(self.a)
        for i, s in enumerate(t):
            if s <= 0:
                out[i] = self.Z0_slope
            else:
                out[i] = steady + SQRT2 * np.sum(self.alpha * self.lambdas * np.exp(-self.kappa * s))
        return out


SLOPE_SAMPLES = 2048
TAIL_TOL = 1e-10


def settle_heat_solve(Z0: Field, H: float, eps: float, T: float, n_modes: int = 1024,
                      n_samples: int = SLOPE_SAMPLES):
    """Spectral solve of the settling heat system over [0, T].

    Returns ``(ZT, left_slope)`` where ``left_slope`` samples Z_x(t, 0) on a
    uniform mesh (piecewise linear).
    """
    _check_positive(T=T)
    sol = SettlingSolution(Z0, H, eps, n_modes)
    times = np.linspace(0.0, T, n_samples)
    tail = sol.tail_bound(times[1])
    scale = 1.0 + sol.a
    if tail > TAIL_TOL * scale:
        raise NumericalError(
            f"{n_modes} modes leave a slope tail of {tail:.3g} at t = {times[1]:.3g}; "
            "increase n_modes"
        )
    slope = ControlSignal(times, sol.left_slope(times), Interpolation.LINEAR)
    return sol.profile(T), slope


# --------------------------------------------------------- dissipation system


def residue_coefficients(H: float, eps: float, n_modes: int) -> np.ndarray:
    """Closed-form <w(0) | e_n> for w(0, x) = (H / eps) e^{(H / eps)(x - 1)}."""
    _check_positive(H=H, eps=eps)
    n = np.arange(1, n_modes + 1, dtype=float)
    q = eps * n * np.pi / H
    sign = np.where(n % 2 == 1, 1.0, -1.0)
    return SQRT2 * (q / (1 + q**2)) * (sign + math.exp(-H / eps))


def residue_tail_bound(H: float, eps: float, T: float, n_modes: int) -> float:
    """L2 bound on the modes n > n_modes of w(T).

    |c_n| <= sqrt(2)(1 + e^{-H/eps}) / 2 and the Gaussian factors are summed as
    a geometric series.
    """
    if T <= 0:
        return math.inf
    M = n_modes + 1
    ratio = math.exp(-4 * M * np.pi**2 * T)
    head = math.exp(-2 * M**2 * np.pi**2 * T)
    amp = SQRT2 * (1 + math.exp(-H / eps)) / 2
    return amp * math.sqrt(head / (1 - ratio))


def residue_mean(H: float, eps: float) -> float:
    """Integral of z_eps over [0, 1], conserved by the Neumann heat flow."""
    r = H / eps
    return (1 + (1 - math.exp(-r)) / r) / (1 + math.exp(-r))


def dissipate_heat_solve(H: float, eps: float, T: float, n_modes: int, grid: Grid,
                         tail_tol: float = 1e-12):
    """Heat flow of the Cole-Hopf image of the boundary residue.

    Returns ``(zT, wT)`` with w = (1 + e^{-H/eps}) z_x expanded on e_basis.
    ``zT`` is fixed up to a constant by keeping the integral of z equal to
    that of z_eps.
    """
    if T < 0:
        raise ValidationError("T must be nonnegative")
    if grid.layout is not Layout.NODE:
        raise ValidationError("dissipation solve needs a node-centered grid")
    tail = residue_tail_bound(H, eps, T, n_modes)
    if tail > tail_tol:
        raise NumericalError(f"{n_modes} modes leave an L2 tail bound of {tail:.3g} > {tail_tol:.3g}")
    c = residue_coefficients(H, eps, n_modes)
    n = np.arange(1, n_modes + 1, dtype=float)
    cT = c * np.exp(-(n * np.pi) ** 2 * T)
    keep = np.nonzero(cT)[0]
    m = keep[-1] + 1 if keep.size else 1
    wT = synthesize(cT[:m], frequencies(Basis.E, m), grid.x)
    zx = wT / (1 + math.exp(-H / eps))
    z = cumulative_trapezoid(zx, dx=grid.dx, initial=0.0)
    z += residue_mean(H, eps) - integrate(Field(grid, z))
    return Field(grid, z), Field(grid, wT)


def dissipated_residue(H: float, eps: float, T: float, grid: Grid, n_modes: int = 256) -> Field:
    """phi(T) = -2 z_x / z, where z solves the dissipation system."""
    zT, wT = dissipate_heat_solve(H, eps, T, n_modes, grid)
    if np.any(zT.values < 1.0 - 1e-12):
        raise NumericalError("dissipated Cole-Hopf variable dropped below 1")
    return Field(grid, -2.0 * wT.values / ((1 + math.exp(-H / eps)) * zT.values))
