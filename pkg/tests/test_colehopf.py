import math

import numpy as np
import pytest
from scipy.integrate import quad

from blcontrol import colehopf
from blcontrol.colehopf import Basis
from blcontrol.core import (
    Field,
    Grid,
    Layout,
    NumericalError,
    ValidationError,
    h1_norm,
    l2_norm,
    linf_norm,
)
from blcontrol.verify import check_a3, settling_bound, w_bound


@pytest.fixture(scope="module")
def fine():
    return Grid(4000, Layout.NODE)


@pytest.mark.parametrize("basis", list(Basis))
def test_orthonormal(fine, basis):
    n = 32
    freqs = colehopf.frequencies(basis, n)
    gram = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        f = Field(fine, colehopf.synthesize(e, freqs, fine.x))
        gram[j] = colehopf.project(f, basis, n).coeffs
    assert np.allclose(gram, np.eye(n), atol=1e-6)


def test_project_needs_resolution():
    with pytest.raises(ValidationError):
        colehopf.project(Field.constant(Grid(20), 1.0), Basis.F, 11)


def test_transform_roundtrip(fine):
    y = Field.from_function(fine, lambda x: 3 * np.sin(2 * np.pi * x) + x)
    z = colehopf.forward_transform(y, 0.5)
    assert z.values[0] == 1.0 and np.all(z.values > 0)
    back = colehopf.inverse_transform(z, 0.5)
    assert linf_norm(back - y) <= 1e-4


def test_transform_validation():
    with pytest.raises(ValidationError):
        colehopf.forward_transform(Field.constant(Grid(10, Layout.CELL), 0.0), 1.0)
    with pytest.raises(ValidationError):
        colehopf.inverse_transform(Field.constant(Grid(10), -1.0), 1.0)


def test_steady_closed_forms():
    g = Grid(100)
    assert colehopf.h_eps(1.0, 0.1, g).values[0] == pytest.approx(math.tanh(5.0), rel=1e-15)
    assert colehopf.h_eps(1.0, 0.1, g).values[-1] == 0.0
    K = colehopf.k_eps_solve(1.0, 0.1).K
    assert K == pytest.approx(1.000091, abs=1e-6)
    assert K * math.tanh(K / 0.2) == pytest.approx(1.0, rel=1e-14)
    assert colehopf.k_eps(1.0, 0.1, g).values[0] == pytest.approx(1.0, rel=1e-14)
    Hs = colehopf.H_eps(1.0, 0.1, g)
    assert Hs.values[0] == pytest.approx(1.0) and Hs.values[-1] == pytest.approx(0.013476, abs=1e-6)
    assert colehopf.phi_eps(1.0, 0.1, g).values[0] == pytest.approx(-9.08e-4, rel=1e-3)
    z = colehopf.z_eps(1.0, 0.5, g)
    assert z.values[0] == pytest.approx(1.0) and z.values[-1] == pytest.approx(1.76159, abs=1e-5)
    with pytest.raises(ValidationError):
        colehopf.h_eps(-1.0, 0.1, g)


def test_steady_images_under_transform(fine):
    H, eps = 1.0, 0.1
    Hz = colehopf.forward_transform(colehopf.h_eps(H, eps, fine), eps)
    assert linf_norm(Hz - colehopf.H_eps(H, eps, fine)) <= 1e-6
    z = colehopf.forward_transform(colehopf.phi_eps(H, eps, fine), 1.0)
    assert linf_norm(z - colehopf.z_eps(H, eps, fine)) <= 1e-5


def test_h_eps_is_steady(fine):
    from blcontrol.viscous import steady_residual

    assert linf_norm(steady_residual(colehopf.k_eps(1.0, 0.1, fine), 0.1)) <= 1e-3


def test_settling_steady_start_is_fixed(fine):
    sol = colehopf.SettlingSolution(colehopf.H_eps(1.0, 0.2, fine), 1.0, 0.2, 256)
    assert np.max(np.abs(sol.alpha)) <= 1e-6
    assert linf_norm(sol.profile(0.5) - sol.steady) <= 1e-5


def test_settling_slope_limit(fine):
    H, eps = 1.0, 0.2
    sol = colehopf.SettlingSolution(Field.constant(fine, 1.0), H, eps, 1024)
    a = H / (2 * eps)
    assert sol.left_slope(30.0)[0] == pytest.approx(-a * math.tanh(a), rel=1e-9)
    assert sol.left_slope(0.0)[0] == 0.0


def test_settling_bound(fine):
    H, T = 1.0, 1.0
    for eps in (0.2, 0.3):
        ZT, _ = colehopf.settle_heat_solve(Field.constant(fine, 1.0), H, eps, T)
        assert h1_norm(ZT - colehopf.H_eps(H, eps, fine)) <= settling_bound(H, eps, T)


def test_settling_needs_modes(fine):
    with pytest.raises(NumericalError, match="modes"):
        colehopf.settle_heat_solve(Field.constant(fine, 1.0), 1.0, 0.2, 1.0, n_modes=16)


def test_settling_rejects_bad_trace(fine):
    with pytest.raises(ValidationError):
        colehopf.SettlingSolution(Field.constant(fine, 2.0), 1.0, 0.2, 64)


def test_residue_coefficient_oracle():
    H, eps = 1.0, 0.5
    r = H / eps
    c = colehopf.residue_coefficients(H, eps, 6)
    assert c[0] == pytest.approx(0.72737, abs=1e-5)
    for n in range(1, 7):
        ref, _ = quad(lambda x: r * math.exp(r * (x - 1)) * math.sqrt(2) * math.sin(n * math.pi * x),
                      0, 1, limit=200)
        assert c[n - 1] == pytest.approx(ref, rel=1e-10)


def _w0(H, eps, x):
    r = H / eps
    return r * np.exp(r * (x - 1))


def test_dissipation_start(fine):
    H, eps, n = 1.0, 0.1, 4096
    _, w = colehopf.dissipate_heat_solve(H, eps, 0.0, n, fine, tail_tol=np.inf)
    c = colehopf.residue_coefficients(H, eps, n)
    exact_sq, _ = quad(lambda x: _w0(H, eps, x) ** 2, 0, 1)
    assert exact_sq - np.sum(c**2) <= 1e-3 * exact_sq
    inner = (fine.x > 0.1) & (fine.x < 0.9)
    assert np.max(np.abs(w.values[inner] - _w0(H, eps, fine.x[inner]))) <= 2e-3 * H / eps


@pytest.mark.xfail(strict=True, reason="sine series of a profile with w(1) != 0 converges slowly")
def test_dissipation_start_l2(fine):
    H, eps = 1.0, 0.1
    _, w = colehopf.dissipate_heat_solve(H, eps, 0.0, 4096, fine, tail_tol=np.inf)
    assert l2_norm(w - Field(fine, _w0(H, eps, fine.x))) <= 1e-3


def test_dissipation_tail_guard(fine):
    with pytest.raises(NumericalError):
        colehopf.dissipate_heat_solve(1.0, 0.1, 1e-6, 8, fine)


def test_dissipation_properties(fine):
    H, T = 1.0, 1.0
    norms = []
    for eps in (0.1, 0.05):
        zT, wT = colehopf.dissipate_heat_solve(H, eps, T, 256, fine)
        assert l2_norm(wT) ** 2 <= w_bound(H, eps, T)
        assert zT.values.min() >= 1.0 - 1e-12
        phi = colehopf.dissipated_residue(H, eps, T, fine)
        zx = wT.values / (1 + math.exp(-H / eps))
        assert np.all(np.abs(phi.values) <= 2 * np.abs(zx) + 1e-15)
        norms.append(l2_norm(phi))
    assert norms[1] < norms[0]
    ws = [l2_norm(colehopf.dissipate_heat_solve(H, 0.1, T, 256, fine)[1]) for T in (0.2, 0.5, 1.0)]
    assert ws[0] > ws[1] > ws[2]


def test_residue_mean_conserved(fine):
    zT, _ = colehopf.dissipate_heat_solve(1.0, 0.1, 0.3, 256, fine)
    ref, _ = quad(lambda x: (1 + math.exp(10 * (x - 1))) / (1 + math.exp(-10)), 0, 1)
    assert colehopf.residue_mean(1.0, 0.1) == pytest.approx(ref, rel=1e-12)
    assert float(np.sum(zT.values[1:] + zT.values[:-1]) * fine.dx / 2) == pytest.approx(ref, rel=1e-10)


def test_steady_gap_corrected_factor():
    _, measured, _ = check_a3()
    assert max(measured["ratios"]) <= 1.2
    s = np.linspace(0, 5, 200001)
    limit = np.max(np.tanh(s) + s / np.cosh(s) ** 2)
    assert max(measured["ratios"]) <= limit + 1e-9


@pytest.mark.xfail(strict=True, reason="gap exceeds 2H exp(-H/eps) by up to a factor 1.2")
def test_steady_gap_literal():
    assert check_a3()[0]
