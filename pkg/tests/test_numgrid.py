import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracnoether.errors import GammaPoleError, GridTooSmallError, OutOfRangeError
from fracnoether.numgrid import (
    Grid,
    SampledFn,
    derivative,
    finite_diff,
    gamma,
    read_csv,
    resample,
    trapezoid,
)


def test_grid_nodes_hit_both_end_points():
    g = Grid(0.1, 0.7, 3)
    assert g.node(0) == 0.1
    assert g.node(3) == 0.7
    assert g.t[0] == 0.1 and g.t[-1] == 0.7
    assert math.isclose(g.h * g.n, g.b - g.a, rel_tol=1e-15)


@pytest.mark.parametrize("a,b,n", [(1.0, 1.0, 4), (1.0, 0.0, 4)])
def test_grid_rejects_empty_interval(a, b, n):
    with pytest.raises(ValueError):
        Grid(a, b, n)


def test_grid_too_small():
    with pytest.raises(GridTooSmallError):
        Grid(0.0, 1.0, 1)


def test_sampled_fn_is_read_only_and_checks_length():
    g = Grid(0.0, 1.0, 4)
    x = g.sample(np.sin)
    with pytest.raises(ValueError):
        x.values[0] = 1.0
    with pytest.raises(ValueError):
        SampledFn(g, np.zeros(3))


def test_mask_flags_nan_nodes():
    g = Grid(0.0, 1.0, 4)
    x = SampledFn(g, [np.nan, 1, 2, 3, 4])
    assert x.masked
    assert x.mask.tolist() == [True, False, False, False, False]


@pytest.mark.parametrize("x", [1.0, 0.5, 2.5, 3.7, -0.5, 1e-3])
def test_gamma_matches_mpmath(x):
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-12)


def test_gamma_known_values():
    assert gamma(1.0) == 1.0
    assert gamma(0.5) == pytest.approx(1.7724538509, abs=1e-10)
    assert gamma(2.5) == pytest.approx(1.3293403882, abs=1e-10)


@pytest.mark.parametrize("x", [0.0, -1.0, -2.0])
def test_gamma_poles(x):
    with pytest.raises(GammaPoleError):
        gamma(x)


def test_finite_diff_constant_is_zero():
    g = Grid(0.0, 1.0, 20)
    for k in (1, 2, 3):
        assert np.max(np.abs(finite_diff(g.sample(lambda t: np.full_like(t, 3.0)), k).values)) < 1e-9


def test_finite_diff_exact_on_quadratics():
    g = Grid(0.0, 1.0, 100)
    d = finite_diff(g.sample(lambda t: t**2), 1)
    assert np.max(np.abs(d.values - 2 * g.t)) < 1e-10


def test_finite_diff_second_derivative_of_sin():
    g = Grid(0.0, math.pi, 1024)
    d = finite_diff(g.sample(np.sin), 2)
    assert np.max(np.abs(d.values + np.sin(g.t))) < 1e-4


def test_finite_diff_third_derivative_of_cubic():
    g = Grid(-1.0, 2.0, 60)
    d = finite_diff(g.sample(lambda t: t**3 - t), 3)
    assert np.max(np.abs(d.values - 6.0)) < 1e-7


def test_finite_diff_grid_too_small():
    with pytest.raises(GridTooSmallError):
        finite_diff(Grid(0.0, 1.0, 3).sample(np.sin), 3)


def test_finite_diff_twice_matches_second_order():
    for n in (128, 256):
        g = Grid(0.0, 2.0, n)
        x = g.sample(np.exp)
        err = np.max(np.abs(finite_diff(finite_diff(x, 1), 1).values - finite_diff(x, 2).values)[5:-5])
        assert err < 10 * g.h**2


def test_derivative_chains_high_orders():
    g = Grid(0.0, 1.0, 400)
    d4 = derivative(g.sample(lambda t: t**4), 4)
    assert np.max(np.abs(d4.values - 24.0)[6:-6]) < 1e-3
    assert derivative(g.sample(np.sin), 0).values.tolist() == g.sample(np.sin).values.tolist()


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-5, 5, allow_nan=False),
    st.floats(-5, 5, allow_nan=False),
    st.integers(1, 3),
)
def test_finite_diff_is_linear(alpha, beta, k):
    g = Grid(0.0, 1.0, 50)
    x, y = g.sample(np.sin), g.sample(lambda t: t**3)
    lhs = finite_diff(alpha * x + beta * y, k).values
    rhs = alpha * finite_diff(x, k).values + beta * finite_diff(y, k).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9 * (1 + abs(alpha) + abs(beta)))


def test_trapezoid_examples():
    assert trapezoid(Grid(0.0, 1.0, 4).sample(np.ones_like)) == pytest.approx(1.0, abs=1e-15)
    assert trapezoid(Grid(0.0, 1.0, 10).sample(lambda t: t)) == pytest.approx(0.5, abs=1e-15)
    assert trapezoid(Grid(0.0, 1.0, 1000).sample(lambda t: t**2)) == pytest.approx(1 / 3, abs=1e-6)


def test_trapezoid_of_derivative_telescopes():
    g = Grid(0.0, 1.5, 500)
    x = g.sample(np.exp)
    assert trapezoid(finite_diff(x, 1)) == pytest.approx(math.exp(1.5) - 1.0, abs=1e-4)


def test_resample_identity_and_cubic_exactness():
    g = Grid(0.0, 1.0, 16)
    x = g.sample(lambda t: t**3 - 2 * t)
    assert np.array_equal(resample(x, g).values, x.values)
    fine = g.refine(2)
    assert np.max(np.abs(resample(x, fine).values - (fine.t**3 - 2 * fine.t))) < 1e-12


def test_resample_smooth_accuracy():
    src = Grid(0.0, 1.0, 256)
    dst = Grid(0.0, 1.0, 512)
    assert np.max(np.abs(resample(src.sample(np.sin), dst).values - np.sin(dst.t))) < 1e-8


def test_resample_out_of_range():
    with pytest.raises(OutOfRangeError):
        resample(Grid(0.0, 1.0, 8).sample(np.sin), Grid(-0.5, 1.0, 8))


def test_csv_round_trip_is_exact(tmp_path):
    g = Grid(0.0, 1.0, 7)
    x = g.sample(lambda t: np.exp(t) / 3)
    y = read_csv(x.to_csv(tmp_path / "x.csv"))
    assert y.grid == g
    assert np.array_equal(y.values, x.values)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "t,value"
