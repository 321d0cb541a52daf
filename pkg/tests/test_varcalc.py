import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracnoether.errors import HypothesisError, InvalidOrderError, OutOfRangeError
from fracnoether.fracops import caputo_left, rl_deriv_right
from fracnoether.jerklab import JerkSystem, SystemId, constant_g, harmonic_spec, lagrangian_for
from fracnoether.numgrid import Grid
from fracnoether.varcalc import (
    LagrangianSpec,
    action,
    audit_partials,
    el_residual,
    el_terms,
    gateaux_defect,
    gateaux_variation,
    midpoint_limit,
    richardson,
    windowed_el_residual,
    zero,
)

# composition of right RL and left Caputo of order 1/2 at the centre of a
# symmetric window, applied to a linear function of unit slope
LINEAR_LIMIT = (2.0 / math.pi) * (math.sqrt(2.0) - math.asinh(1.0))


def kinetic(alpha=1.0):
    return LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * qd**2,
        d2L=zero,
        d3L=lambda t, q, qd, u, v: qd,
        alpha=alpha,
    )


def pure_fractional(alpha=0.5):
    return LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * u**2,
        d2L=zero,
        d3L=zero,
        d4L=lambda t, q, qd, u, v: u,
        alpha=alpha,
        f=lambda q: np.asarray(q, dtype=float),
        fprime=lambda q: np.ones_like(np.asarray(q, dtype=float)),
    )


def c5_spec(A=1.0, c=0.0):
    return lagrangian_for(JerkSystem(SystemId.C5, A, *constant_g(c)))


def test_action_classical_kinetic():
    g = Grid(0.0, 1.0, 64)
    assert action(kinetic(), g.sample(lambda t: t)) == pytest.approx(0.5, rel=1e-12)


def test_action_pure_fractional_is_one_over_pi():
    g = Grid(0.0, 1.0, 1024)
    assert action(pure_fractional(), g.sample(lambda t: t)) == pytest.approx(1 / math.pi, rel=1e-2)


def test_action_c6_constant_trajectory_vanishes():
    g = Grid(0.0, 1.0, 64)
    assert action(c5_spec(), g.sample(lambda t: np.full_like(t, 0.7))) == pytest.approx(0.0, abs=1e-15)


def test_el_residual_harmonic_on_shell():
    g = Grid(0.0, 2.0, 1024)
    res = el_residual(harmonic_spec(1.0), g.sample(np.sin)).values
    assert np.max(np.abs(res[5:-5])) < 1e-3


def test_el_residual_harmonic_off_shell():
    g = Grid(0.0, 1.0, 1024)
    res = el_residual(harmonic_spec(1.0), g.sample(lambda t: t**2)).values
    assert np.max(np.abs(res - (-(g.t**2 + 2.0)))[5:-5]) < 1e-3


def test_el_residual_pure_fractional_is_composition():
    g = Grid(0.0, 1.0, 256)
    q = g.sample(lambda t: t * (1 - t))
    res = el_residual(pure_fractional(), q).values
    direct = rl_deriv_right(caputo_left(q, 0.5), 0.5).values
    ok = np.isfinite(direct)
    assert np.array_equal(ok, np.isfinite(res))
    assert np.max(np.abs(res[ok] - direct[ok])) <= 1e-6 * np.max(np.abs(direct[ok]))


def test_el_residual_alpha_one_is_classical():
    spec = LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * qd**2 - q**4 / 4,
        d2L=lambda t, q, qd, u, v: -(q**3),
        d3L=lambda t, q, qd, u, v: qd,
        alpha=1.0,
    )
    g = Grid(0.0, 1.0, 512)
    res = el_residual(spec, g.sample(np.exp)).values
    classical = -np.exp(3 * g.t) - np.exp(g.t)
    assert np.max(np.abs(res - classical)[5:-5]) < 1e-3


@settings(max_examples=10, deadline=None)
@given(st.floats(-100, 100))
def test_el_residual_ignores_constant_shift_of_L(c):
    base = harmonic_spec(1.0)
    shifted = LagrangianSpec(
        L=lambda t, q, qd, u, v: base.L(t, q, qd, u, v) + c,
        d2L=base.d2L,
        d3L=base.d3L,
        alpha=1.0,
    )
    g = Grid(0.0, 1.0, 64)
    q = g.sample(np.cos)
    assert np.array_equal(el_residual(base, q).values, el_residual(shifted, q).values)


def test_el_terms_keys():
    g = Grid(0.0, 1.0, 64)
    assert set(el_terms(c5_spec(), g.sample(np.sin))) == {"d2L", "d3L", "d4L", "d5L"}


def test_audit_passes_for_registered_lagrangians():
    for sid in SystemId:
        errors = audit_partials(lagrangian_for(JerkSystem(sid, 1.5)))
        assert all(e <= 1e-6 for e in errors.values())


def test_audit_catches_wrong_partial():
    spec = LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * qd**2,
        d2L=zero,
        d3L=lambda t, q, qd, u, v: 2 * qd,
        alpha=1.0,
    )
    with pytest.raises(ValueError):
        audit_partials(spec)


def test_spec_validation():
    with pytest.raises(InvalidOrderError):
        kinetic(alpha=1.5)
    with pytest.raises(ValueError):
        LagrangianSpec(L=zero, d2L=zero, d3L=zero, n=4)


def test_gateaux_zero_variation():
    g = Grid(0.0, 1.0, 64)
    assert gateaux_defect(harmonic_spec(1.0), g.sample(np.sin), g.sample(np.zeros_like)) == 0.0


def test_gateaux_classical_harmonic():
    g = Grid(0.0, 1.0, 1024)
    q, eta = g.sample(lambda t: t * (1 - t)), g.sample(lambda t: t**2 * (1 - t) ** 2)
    num, _ = gateaux_variation(harmonic_spec(1.0), q, eta)
    assert gateaux_defect(harmonic_spec(1.0), q, eta) < 1e-4 * abs(num)


def test_gateaux_c6_decreases_with_refinement():
    rel = []
    for n in (256, 512, 1024):
        g = Grid(0.0, 1.0, n)
        q, eta = g.sample(lambda t: t * (1 - t)), g.sample(lambda t: np.sin(np.pi * t) ** 2)
        num, ana = gateaux_variation(c5_spec(), q, eta)
        rel.append(abs(num - ana) / abs(num))
    assert rel[-1] < 1e-2
    assert rel[0] > rel[1] > rel[2]


def test_gateaux_rejects_bad_variation():
    g = Grid(0.0, 1.0, 64)
    with pytest.raises(HypothesisError):
        gateaux_variation(harmonic_spec(1.0), g.sample(np.sin), g.sample(lambda t: t))


def test_midpoint_limit_of_constant_is_zero():
    g = Grid(0.0, 2.0, 1024)
    res = midpoint_limit(g.sample(np.ones_like), 0.5, (0.4, 0.2, 0.1), t0=1.0)
    assert np.max(np.abs(res.values)) < 1e-12


def test_midpoint_limit_linear_response():
    # on x = t the composition is the same for every window width
    g = Grid(0.0, 1.0, 4096)
    res = midpoint_limit(g.sample(lambda t: t), 0.5, (0.4, 0.2, 0.1, 0.05), t0=0.5)
    assert np.ptp(res.values) < 1e-10
    assert res.extrapolated == pytest.approx(LINEAR_LIMIT, rel=1e-3)


def test_midpoint_limit_sin_tracks_first_derivative():
    g = Grid(0.5, 1.5, 8192)
    res = midpoint_limit(g.sample(np.sin), 0.5, (0.4, 0.2, 0.1, 0.05), t0=1.0)
    errs = [abs(v - LINEAR_LIMIT * math.cos(1.0)) for v in res.values]
    assert errs[-3] > errs[-2] > errs[-1]
    assert res.extrapolated == pytest.approx(LINEAR_LIMIT * math.cos(1.0), rel=5e-3)


def test_midpoint_limit_validation():
    g = Grid(0.0, 1.0, 256)
    x = g.sample(np.sin)
    with pytest.raises(ValueError):
        midpoint_limit(x, 0.5, (0.1, 0.2))
    with pytest.raises(OutOfRangeError):
        midpoint_limit(x, 0.5, (0.4, 0.2), t0=0.05)


def test_richardson_first_order_sequence():
    w = (0.4, 0.2, 0.1)
    extrap, order = richardson(w, [3.0 + 2 * d for d in w])
    assert extrap == pytest.approx(3.0, abs=1e-12)
    assert order == pytest.approx(1.0, abs=1e-9)


def test_windowed_residual_classical_limit_of_kinetic_term():
    # at alpha = 1 the window limit is exact and the residual is -x''
    g = Grid(0.0, 2.0, 4096)
    res = windowed_el_residual(kinetic(1.0), g.sample(np.sin), 1.0, 0.05)
    assert res.residual == pytest.approx(math.sin(1.0), rel=1e-4)
    assert res.scale >= abs(res.terms["d3L"])
