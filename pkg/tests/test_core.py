import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.integrate import quad, trapezoid
from hypothesis import strategies as st

from blcontrol.core import (
    ControlSignal,
    Field,
    Grid,
    Interpolation,
    Layout,
    NumericalError,
    Params,
    PiecewiseSignal,
    ValidationError,
    eval_control,
    h1_norm,
    integrate,
    l2_norm,
    linf_norm,
    signal_from_dict,
)


@pytest.mark.parametrize("layout", list(Layout))
def test_grid_spacing(layout):
    for n in (4, 7, 1000, 4096):
        g = Grid(n, layout)
        assert abs(g.dx * n - 1.0) <= 2 * np.finfo(float).eps
        assert g.x.size == g.size == (n + 1 if layout is Layout.NODE else n)


def test_grid_rejects_small():
    with pytest.raises(ValidationError):
        Grid(3)


def test_field_length_and_finiteness():
    g = Grid(10, Layout.CELL)
    with pytest.raises(ValidationError):
        Field(g, np.zeros(11))
    with pytest.raises(NumericalError):
        Field(g, np.full(10, np.nan))
    f = Field(g, np.zeros(10))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


@pytest.mark.parametrize("layout", list(Layout))
def test_l2_basic(layout):
    g = Grid(1000, layout)
    assert l2_norm(Field.constant(g, 0.0)) == 0.0
    assert math.isclose(l2_norm(Field.constant(g, 1.0)), 1.0, rel_tol=1e-14)
    s = Field.from_function(g, lambda x: np.sin(np.pi * x))
    assert abs(l2_norm(s) - 1 / math.sqrt(2)) <= 1e-4


def test_h1_basic():
    g = Grid(1000)
    assert h1_norm(Field.constant(g, 0.0)) == 0.0
    assert math.isclose(h1_norm(Field.constant(g, -3.5)), 3.5, rel_tol=1e-14)
    s = Field.from_function(g, lambda x: np.sin(np.pi * x))
    assert abs(h1_norm(s) - math.sqrt(0.5 + np.pi**2 / 2)) <= 1e-3


def test_linf_basic():
    g = Grid(200)
    assert linf_norm(Field.constant(g, 0.0)) == 0.0
    v = np.zeros(g.size)
    v[17] = -3.0
    assert linf_norm(Field(g, v)) == 3.0
    f = Field.from_function(g, lambda x: x * (1 - x))
    assert abs(linf_norm(f) - 0.25) <= g.dx


def test_l2_refinement_order():
    errs = []
    for n in (16, 32, 64, 128):
        f = Field.from_function(Grid(n), lambda x: np.exp(x) * np.sin(3 * x))
        exact = math.sqrt(quad_exact())
        errs.append(abs(l2_norm(f) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 2 - 0.05)


def quad_exact():
    return quad(lambda x: (np.exp(x) * np.sin(3 * x)) ** 2, 0, 1, epsabs=1e-14)[0]


def test_midpoint_on_cells():
    g = Grid(100, Layout.CELL)
    f = Field.from_function(g, lambda x: x)
    assert math.isclose(integrate(f), 0.5, rel_tol=1e-14)


values = st.lists(st.floats(-1e3, 1e3), min_size=17, max_size=17)


@settings(max_examples=50, deadline=None)
@given(values, st.floats(-50, 50))
def test_norm_homogeneity(v, c):
    f = Field(Grid(16), np.array(v))
    for norm in (l2_norm, linf_norm, h1_norm):
        assert math.isclose(norm(f * c), abs(c) * norm(f), rel_tol=1e-12, abs_tol=1e-9)


@settings(max_examples=50, deadline=None)
@given(values, values)
def test_triangle_inequality(a, b):
    fa, fb = Field(Grid(16), np.array(a)), Field(Grid(16), np.array(b))
    for norm in (l2_norm, linf_norm, h1_norm):
        assert norm(fa + fb) <= norm(fa) + norm(fb) + 1e-9


def test_params_positive():
    with pytest.raises(ValidationError):
        Params(0.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        Params(1.0, 1.0, float("inf"))


def test_eval_control_examples():
    assert eval_control(ControlSignal.constant(5.0, 3.0), 2.2) == 5.0
    lin = ControlSignal([0.0, 1.0], [0.0, 2.0], Interpolation.LINEAR)
    assert eval_control(lin, 0.5) == 1.0
    const = ControlSignal([0.0, 1.0], [1.0, 3.0], Interpolation.CONSTANT)
    assert eval_control(const, 0.999) == 1.0


def test_signal_validation():
    with pytest.raises(ValidationError):
        ControlSignal([0.1, 1.0], [0.0, 0.0])
    with pytest.raises(ValidationError):
        ControlSignal([0.0, 1.0, 1.0], [0.0, 0.0, 0.0])
    with pytest.raises(NumericalError):
        ControlSignal([0.0, 1.0], [0.0, np.inf])
    with pytest.raises(ValidationError):
        ControlSignal.constant(1.0, 1.0)(1.5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=12),
       st.sampled_from(list(Interpolation)), st.floats(0, 1), st.floats(0, 1))
def test_primitive_matches_quadrature(samples, interp, a, b):
    t = np.linspace(0.0, 2.0, len(samples))
    sig = ControlSignal(t, samples, interp)
    a, b = sorted((2 * a, 2 * b))
    fine = np.linspace(a, b, 20001)
    if interp is Interpolation.LINEAR:
        ref = trapezoid(sig(fine), fine)
        assert math.isclose(sig.integral(a, b), ref, abs_tol=1e-6)
    else:
        edges = np.concatenate([[a], t[(t > a) & (t < b)], [b]])
        ref = sum(sig(lo) * (hi - lo) for lo, hi in zip(edges[:-1], edges[1:]))
        assert math.isclose(sig.integral(a, b), ref, abs_tol=1e-9)


def test_piecewise_left_joint_rule():
    a = ControlSignal.constant(1.0, 1.0)
    b = ControlSignal.constant(2.0, 0.5)
    pw = PiecewiseSignal.concatenate([a, b])
    assert pw.t_end == 1.5
    assert pw(1.0) == 1.0
    assert pw(1.0 + 1e-9) == 2.0
    assert math.isclose(pw.integral(0.0, 1.5), 2.0)
    assert pw.breakpoints == [1.0]


def test_signal_dict_roundtrip():
    pw = PiecewiseSignal.concatenate([
        ControlSignal.constant(1.0, 1.0),
        ControlSignal([0.0, 0.5, 1.0], [0.0, 3.0, -1.0], Interpolation.LINEAR),
    ])
    back = signal_from_dict(pw.to_dict())
    t = np.linspace(0, 2, 101)
    assert np.array_equal(back(t), pw(t))
