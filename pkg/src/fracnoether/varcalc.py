"""Actions with fractional derivatives of functions, and their Euler-Lagrange residual.

A Lagrangian is ``L(t, q, q^(n), u, v)`` where ``u = C_a D^alpha f(q)`` and
``v = C_a D^alpha g(q^(n))``. The partials ``d2L .. d5L`` are supplied by
the caller (see :func:`audit_partials` for a consistency check).

Several Lagrangians of interest contain more than one fractional derivative
of a function of ``q`` (e.g. both ``C D^alpha x`` and ``C D^alpha x^2``).
For those, ``f`` and ``fprime`` may be tuples; ``L`` then receives ``u`` as a
tuple of arrays and ``d4L`` must return a tuple of partials, one per entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HypothesisError, OutOfRangeError
from .fracops import caputo_left, check_derivative_order, rl_deriv_right
from .numgrid import Grid, SampledFn, derivative, resample, stencil_weights, trapezoid

__all__ = [
    "LagrangianSpec",
    "action",
    "audit_partials",
    "el_residual",
    "el_terms",
    "evaluate",
    "gateaux_defect",
    "gateaux_variation",
    "midpoint_limit",
    "windowed_el_residual",
]


def zero(t, q, qn, u, v):
    """A partial that vanishes identically."""
    return np.zeros_like(np.asarray(q, dtype=float))


def _zero_slot(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class LagrangianSpec:
    L: Callable
    d2L: Callable
    d3L: Callable
    d4L: Callable = zero
    d5L: Callable = zero
    alpha: float = 0.5
    n: int = 1
    f: Callable | tuple = _zero_slot
    fprime: Callable | tuple = _zero_slot
    g: Callable = _zero_slot
    gprime: Callable = _zero_slot
    time_dependent: bool = False
    name: str = ""
    # (lo, hi) ranges for (t, q, qn, u, v) used by audit_partials
    probe_box: tuple = ((0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))

    def __post_init__(self) -> None:
        check_derivative_order(self.alpha)
        if self.n not in (1, 2, 3):
            raise ValueError(f"derivative order n must be 1, 2 or 3, got {self.n}")
        if isinstance(self.f, tuple) != isinstance(self.fprime, tuple):
            raise ValueError("f and fprime must both be callables or both tuples")
        if isinstance(self.f, tuple) and len(self.f) != len(self.fprime):
            raise ValueError("f and fprime must have the same length")

    @property
    def multi_f(self) -> bool:
        return isinstance(self.f, tuple)

    @property
    def fs(self) -> tuple:
        return self.f if self.multi_f else (self.f,)

    @property
    def fprimes(self) -> tuple:
        return self.fprime if self.multi_f else (self.fprime,)

    def pack_u(self, us):
        return tuple(us) if self.multi_f else us[0]

    def unpack_d4(self, d4):
        return tuple(d4) if self.multi_f else (d4,)


def _arr(value, size: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (size,)).copy()


@dataclass(frozen=True, eq=False)
class Evaluation:
    """A Lagrangian and its partials sampled along a trajectory."""

    spec: LagrangianSpec
    q: SampledFn
    qn: SampledFn
    u: tuple  # SampledFn per f slot
    v: SampledFn
    L: SampledFn
    d2: SampledFn
    d3: SampledFn
    d4: tuple  # SampledFn per f slot
    d5: SampledFn

    @property
    def grid(self) -> Grid:
        return self.q.grid


def evaluate(spec: LagrangianSpec, q: SampledFn, qn: SampledFn | None = None) -> Evaluation:
    """Sample ``L`` and its partials along ``q``.

    ``qn`` overrides the finite-difference ``q^(n)`` (use it when an
    integrator already provides the derivative).
    """
    grid, size = q.grid, q.grid.size
    if qn is None:
        qn = derivative(q, spec.n)
    elif qn.grid != grid:
        raise ValueError("qn must live on the grid of q")
    t = grid.t
    us = tuple(
        caputo_left(SampledFn(grid, _arr(fi(q.values), size)), spec.alpha) for fi in spec.fs
    )
    v = caputo_left(SampledFn(grid, _arr(spec.g(qn.values), size)), spec.alpha)
    args = (t, q.values, qn.values, spec.pack_u([ui.values for ui in us]), v.values)

    def sample(fn):
        return SampledFn(grid, _arr(fn(*args), size))

    d4 = spec.unpack_d4(spec.d4L(*args))
    if len(d4) != len(us):
        raise ValueError("d4L must return one partial per f slot")
    return Evaluation(
        spec=spec,
        q=q,
        qn=qn,
        u=us,
        v=v,
        L=sample(spec.L),
        d2=sample(spec.d2L),
        d3=sample(spec.d3L),
        d4=tuple(SampledFn(grid, _arr(d, size)) for d in d4),
        d5=sample(spec.d5L),
    )


def audit_partials(
    spec: LagrangianSpec, probes: int = 16, rtol: float = 1e-6, seed: int = 0
) -> dict:
    """Compare each supplied partial with a central difference of ``L``.

    Returns ``{slot: max relative error}``; raises :class:`ValueError` if any
    slot exceeds ``rtol``.
    """
    rng = np.random.default_rng(seed)
    box = np.asarray(spec.probe_box, dtype=float)
    nf = len(spec.fs)
    errors = {}
    for _ in range(probes):
        t, q, qn = (rng.uniform(*box[i]) for i in range(3))
        u = list(rng.uniform(*box[3], size=nf))
        v = rng.uniform(*box[4])

        def call(fn, t=t, q=q, qn=qn, u=u, v=v):
            return fn(t, q, qn, spec.pack_u([np.float64(x) for x in u]), v)

        checks = [("d2L", 1, spec.d2L), ("d3L", 2, spec.d3L), ("d5L", 4, spec.d5L)]
        for name, slot, fn in checks:
            base = [t, q, qn, u, v]

            def shifted(delta, slot=slot, base=base):
                b = list(base)
                b[slot] = b[slot] + delta
                return call(spec.L, *b)

            x0 = base[slot]
            step = 1e-5 * max(1.0, abs(x0))
            fd = (shifted(step) - shifted(-step)) / (2 * step)
            exact = float(call(fn))
            err = abs(fd - exact) / max(1.0, abs(exact))
            errors[name] = max(errors.get(name, 0.0), err)
        d4 = spec.unpack_d4(call(spec.d4L))
        for i in range(nf):
            step = 1e-5 * max(1.0, abs(u[i]))
            up, um = list(u), list(u)
            up[i] += step
            um[i] -= step
            fd = (call(spec.L, u=up) - call(spec.L, u=um)) / (2 * step)
            err = abs(fd - float(d4[i])) / max(1.0, abs(float(d4[i])))
            key = "d4L" if nf == 1 else f"d4L[{i}]"
            errors[key] = max(errors.get(key, 0.0), err)
    bad = {k: e for k, e in errors.items() if not e <= rtol}
    if bad:
        raise ValueError(f"partials inconsistent with L: {bad}")
    return errors


def action(spec: LagrangianSpec, q: SampledFn, qn: SampledFn | None = None) -> float:
    return trapezoid(evaluate(spec, q, qn).L)


def el_terms(spec: LagrangianSpec, q: SampledFn, qn: SampledFn | None = None) -> dict:
    """The separate terms of the fractional Euler-Lagrange expression.

    Keys: ``"d2L"``, ``"d3L"`` (the ``(-1)^n D^n d3L`` term), ``"d4L"`` (sum of
    ``f'(q) D_b^alpha d4L`` over f slots) and ``"d5L"``.
    """
    ev = evaluate(spec, q, qn)
    return _terms(ev)


def _terms(ev: Evaluation) -> dict:
    spec, grid = ev.spec, ev.grid
    n, alpha = spec.n, spec.alpha
    sign = (-1.0) ** n
    t4 = np.zeros(grid.size)
    for fp, d4 in zip(spec.fprimes, ev.d4):
        t4 = t4 + _arr(fp(ev.q.values), grid.size) * rl_deriv_right(d4, alpha).values
    inner = SampledFn(
        grid, _arr(spec.gprime(ev.qn.values), grid.size) * rl_deriv_right(ev.d5, alpha).values
    )
    return {
        "d2L": ev.d2,
        "d3L": sign * derivative(ev.d3, n),
        "d4L": SampledFn(grid, t4),
        "d5L": sign * derivative(inner, n),
    }


def el_residual(spec: LagrangianSpec, q: SampledFn, qn: SampledFn | None = None) -> SampledFn:
    """Pointwise fractional Euler-Lagrange expression along ``q``.

    Vanishes on extremals. Nodes that depend on a singular end point value
    are masked (NaN).
    """
    terms = el_terms(spec, q, qn)
    total = terms["d2L"].values + terms["d3L"].values + terms["d4L"].values + terms["d5L"].values
    return SampledFn(q.grid, total)


def gateaux_variation(
    spec: LagrangianSpec, q: SampledFn, eta: SampledFn, bc_tol: float = 1e-3
) -> tuple[float, float]:
    """First variation along ``eta`` two ways.

    Returns ``(numeric, analytic)``: the symmetric difference quotient of the
    discrete action, and ``int eta * el_residual``. Masked residual nodes
    contribute nothing (``eta`` and its first ``n`` derivatives vanish there).
    """
    if eta.grid != q.grid:
        raise ValueError("eta must live on the grid of q")
    for i in range(spec.n + 1):
        d = derivative(eta, i).values
        scale = float(np.max(np.abs(d)))
        if scale > 0 and max(abs(d[0]), abs(d[-1])) > bc_tol * scale:
            raise HypothesisError(
                f"variation violates the boundary conditions: derivative {i} "
                f"is {d[0]:.3g} at a and {d[-1]:.3g} at b"
            )
    if not np.any(eta.values):
        return 0.0, 0.0
    eps = 1e-5 * max(1.0, float(np.max(np.abs(q.values))))
    numeric = (action(spec, q + eps * eta) - action(spec, q - eps * eta)) / (2 * eps)
    integrand = eta.values * el_residual(spec, q).values
    integrand = np.where(np.isfinite(integrand), integrand, 0.0)
    analytic = trapezoid(SampledFn(q.grid, integrand))
    return numeric, analytic


def gateaux_defect(spec: LagrangianSpec, q: SampledFn, eta: SampledFn) -> float:
    numeric, analytic = gateaux_variation(spec, q, eta)
    return abs(numeric - analytic)


# {{{ shrinking windows


def _window(x: SampledFn, center: float, delta: float, nodes: int) -> SampledFn:
    if nodes % 2:
        raise ValueError("nodes per window must be even so the centre is a node")
    lo, hi = center - 0.5 * delta, center + 0.5 * delta
    src = x.grid
    tol = 1e-12 * (src.b - src.a)
    if lo < src.a - tol or hi > src.b + tol:
        raise OutOfRangeError(
            f"window [{lo:.6g}, {hi:.6g}] does not fit in [{src.a:.6g}, {src.b:.6g}]"
        )
    return resample(x, Grid(max(lo, src.a), min(hi, src.b), nodes))


def composed_at_center(x: SampledFn, alpha: float) -> float:
    """``(D_b^alpha C_a D^alpha x)`` at the centre node of ``x``'s grid."""
    inner = caputo_left(x, alpha)
    return float(rl_deriv_right(inner, alpha).values[x.grid.n // 2])


@dataclass(frozen=True)
class MidpointLimit:
    windows: tuple
    values: tuple
    extrapolated: float
    order: float


def richardson(windows, values, default_order: float = 1.0) -> tuple[float, float]:
    """Extrapolate ``values(window) -> window = 0``.

    The convergence order is measured from the last three values and used if
    it lies in ``[0.5, 4]``; otherwise ``default_order`` is assumed.
    """
    w = np.asarray(windows, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise ValueError("need at least two windows to extrapolate")
    r = w[-2] / w[-1]
    p = default_order
    if len(v) >= 3:
        d1, d2 = v[-3] - v[-2], v[-2] - v[-1]
        r1 = w[-3] / w[-2]
        if d2 != 0 and d1 != 0 and np.sign(d1) == np.sign(d2) and math.isclose(r1, r):
            measured = math.log(abs(d1 / d2)) / math.log(r)
            if 0.5 <= measured <= 4.0:
                p = measured
    return float(v[-1] + (v[-1] - v[-2]) / (r**p - 1.0)), float(p)


def midpoint_limit(
    x: SampledFn,
    alpha: float,
    windows,
    t0: float | None = None,
    nodes: int = 256,
) -> MidpointLimit:
    """Evaluate ``D_b^alpha C_a D^alpha x`` at the centre of shrinking windows.

    Each window ``[t0 - d/2, t0 + d/2]`` carries ``nodes`` subintervals;
    ``x`` is resampled onto it by local cubic interpolation.
    """
    alpha = check_derivative_order(alpha)
    windows = tuple(float(d) for d in windows)
    if any(d <= 0 for d in windows) or any(
        b >= a for a, b in zip(windows, windows[1:])
    ):
        raise ValueError("windows must be positive and strictly decreasing")
    if t0 is None:
        t0 = 0.5 * (x.grid.a + x.grid.b)
    values = tuple(composed_at_center(_window(x, t0, d, nodes), alpha) for d in windows)
    extrap, order = richardson(windows, values)
    return MidpointLimit(windows=windows, values=values, extrapolated=extrap, order=order)


@dataclass(frozen=True)
class WindowedResidual:
    t0: float
    delta: float
    residual: float
    terms: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return max(abs(v) for v in self.terms.values())


def windowed_el_residual(
    spec: LagrangianSpec,
    x: SampledFn,
    t0: float,
    delta: float,
    nodes: int = 256,
    step: float | None = None,
) -> WindowedResidual:
    """Euler-Lagrange expression with every fractional operator taken in the window limit.

    Each right-RL term ``D_b^alpha dkL`` is evaluated at the centre ``s`` of
    its own window ``[s - delta/2, s + delta/2]`` (the Caputo derivatives
    inside ``dkL`` use ``s - delta/2`` as lower terminal). The outer
    ``d^n/dt^n`` of the ``d3L`` and ``d5L`` terms is then a finite difference
    in the centre ``s`` with spacing ``step`` (default ``delta/4``).
    """
    n = spec.n
    step = 0.25 * delta if step is None else step
    width = n + 1 if n < 3 else 5
    offsets = tuple(range(-(width // 2), width // 2 + 1))
    w = stencil_weights(offsets, n)
    mid = nodes // 2

    def local(s):
        xw = _window(x, s, delta, nodes)
        ev = evaluate(spec, xw)
        terms = _terms(ev)
        j = mid
        inner = float(
            spec.gprime(np.asarray(ev.qn.values[j])) * rl_deriv_right(ev.d5, spec.alpha).values[j]
        )
        return {
            "d2L": float(ev.d2.values[j]),
            "d3": float(ev.d3.values[j]),
            "d4L": float(terms["d4L"].values[j]),
            "inner5": inner,
        }

    samples = {o: local(t0 + o * step) for o in offsets}
    sign = (-1.0) ** n
    terms = {
        "d2L": samples[0]["d2L"],
        "d3L": sign * sum(wi * samples[o]["d3"] for o, wi in zip(offsets, w)) / step**n,
        "d4L": samples[0]["d4L"],
        "d5L": sign * sum(wi * samples[o]["inner5"] for o, wi in zip(offsets, w)) / step**n,
    }
    return WindowedResidual(
        t0=float(t0), delta=float(delta), residual=float(sum(terms.values())), terms=terms
    )


# }}}
