"""Jerk systems, their fractional Lagrangians and conserved quantities.

The third-order ODEs are integrated with classical RK4 on the state
``(x, x', x'')``. Each system id has an order-1/2 Lagrangian whose
fractional Euler-Lagrange equation reduces to the ODE in the short-window
limit, and autonomous or scale-symmetric systems carry a bracket that is a
candidate conserved quantity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import BlowUpError, DomainExitError, OutOfRangeError, PreconditionError
from .fracops import caputo_left, rl_deriv_right
from .noether import Drift, SymmetryGenerator, drift, invariant_no_time
from .numgrid import Grid, SampledFn, grid_from_nodes, resample
from .varcalc import LagrangianSpec, zero

__all__ = [
    "JerkSystem",
    "SystemId",
    "Trajectory",
    "conserved_c13",
    "conserved_c17_c18_c19",
    "constant_g",
    "free_particle_spec",
    "harmonic_spec",
    "hamiltonian_c5",
    "integrate",
    "integrate_classical",
    "lagrangian_for",
    "quadratic_g",
    "scale_invariant_c22",
    "scale_invariant_c22_noether",
    "subwindow_drift",
    "window_energy_approx",
]

BLOW_UP = 1e12
HALF = 0.5


class SystemId(str, enum.Enum):
    C5 = "c5"
    C14 = "c14"
    C15 = "c15"
    C16 = "c16"
    C21 = "c21"


def quadratic_g(B: float) -> tuple[Callable, Callable]:
    """``G(x) = x^2 - B`` and its antiderivative ``x^3/3 - B x``."""
    return (lambda x: x * x - B), (lambda x: x**3 / 3.0 - B * x)


def constant_g(c: float) -> tuple[Callable, Callable]:
    return (lambda x: np.full_like(np.asarray(x, dtype=float), c)), (lambda x: c * x)


@dataclass(frozen=True)
class JerkSystem:
    """One third-order ODE ``x''' = J(x, x', x'')`` from the catalogue.

    ``G``/``Gint`` only matter for ``C5``; the default is ``x^2 - 1``.
    """

    id: SystemId
    A: float = 0.0
    G: Callable | None = None
    Gint: Callable | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", SystemId(self.id))
        if self.id is SystemId.C5 and self.G is None:
            G, Gint = quadratic_g(1.0)
            object.__setattr__(self, "G", G)
            object.__setattr__(self, "Gint", Gint)
        if (self.G is None) != (self.Gint is None):
            raise ValueError("G and its antiderivative Gint must be given together")

    def jerk(self, x, v, a):
        A = self.A
        if self.id is SystemId.C5:
            return self.G(x) - A * a - v
        if self.id is SystemId.C14:
            return -A * a + v * v - x
        if self.id is SystemId.C15:
            return -A * a + x * v - x
        if self.id is SystemId.C16:
            return -A * x * a + v * v - x
        return 2.0 * a * a / v + v * v / x

    def in_domain(self, x, v) -> bool:
        if self.id is SystemId.C21:
            return x > 0.0 and v > 0.0
        return True


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: Grid
    x: SampledFn
    v: SampledFn
    acc: SampledFn

    @classmethod
    def from_arrays(cls, grid: Grid, x, v, acc) -> "Trajectory":
        return cls(grid, SampledFn(grid, x), SampledFn(grid, v), SampledFn(grid, acc))

    @classmethod
    def from_functions(cls, grid: Grid, x, v, acc) -> "Trajectory":
        """Tabulate an analytic trajectory given ``x``, ``x'`` and ``x''``."""
        return cls(grid, grid.sample(x), grid.sample(v), grid.sample(acc))

    def restrict(self, lo: int, hi: int) -> "Trajectory":
        """The nodes ``lo..hi`` (inclusive) as a trajectory on their own grid."""
        sub = Grid(self.grid.node(lo), self.grid.node(hi), hi - lo)
        sl = slice(lo, hi + 1)
        return Trajectory.from_arrays(sub, self.x.values[sl], self.v.values[sl], self.acc.values[sl])

    def scaled(self, c: float) -> "Trajectory":
        return Trajectory.from_arrays(self.grid, c * self.x.values, c * self.v.values, c * self.acc.values)

    def to_csv(self, path) -> Path:
        path = Path(path)
        data = np.column_stack([self.grid.t, self.x.values, self.v.values, self.acc.values])
        np.savetxt(path, data, delimiter=",", header="t,x,v,acc", comments="", fmt="%.17g")
        return path

    @classmethod
    def read_csv(cls, path) -> "Trajectory":
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip().replace(" ", "")
        if header != "t,x,v,acc":
            raise ValueError(f"{path}: expected header 't,x,v,acc', got {header!r}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        grid = grid_from_nodes(data[:, 0])
        return cls.from_arrays(grid, data[:, 1], data[:, 2], data[:, 3])


def _partial(grid: Grid, states: list) -> Trajectory | None:
    if len(states) < 3:
        return None
    arr = np.asarray(states)
    sub = Grid(grid.a, grid.node(len(states) - 1), len(states) - 1)
    return Trajectory.from_arrays(sub, arr[:, 0], arr[:, 1], arr[:, 2])


def integrate(
    sys: JerkSystem,
    x0: float,
    v0: float,
    a0: float,
    grid: Grid,
    truncate: bool = False,
) -> Trajectory:
    """Classical fourth-order Runge-Kutta with one step per grid interval.

    Leaving the domain of ``C21`` raises :class:`DomainExitError` unless
    ``truncate`` is set, in which case the valid prefix is returned. Both
    errors carry the valid prefix in ``.trajectory``.
    """
    if not sys.in_domain(x0, v0):
        raise PreconditionError(f"{sys.id.value} needs x0 > 0 and v0 > 0")
    h = grid.h

    def rhs(s):
        return np.array([s[1], s[2], sys.jerk(s[0], s[1], s[2])])

    s = np.array([x0, v0, a0], dtype=float)
    states = [s.copy()]
    for j in range(grid.n):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = grid.node(j + 1)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s)) > BLOW_UP:
            raise BlowUpError(f"{sys.id.value} blew up near t={t:.6g}", _partial(grid, states))
        if not sys.in_domain(s[0], s[1]):
            prefix = _partial(grid, states)
            if truncate and prefix is not None:
                return prefix
            raise DomainExitError(f"{sys.id.value} left x > 0, x' > 0 near t={t:.6g}", prefix)
        states.append(s.copy())
    arr = np.asarray(states)
    return Trajectory.from_arrays(grid, arr[:, 0], arr[:, 1], arr[:, 2])


# {{{ Lagrangians


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _identity(x):
    return np.asarray(x, dtype=float)


def _square(x):
    return np.asarray(x, dtype=float) ** 2


def _twice(x):
    return 2.0 * np.asarray(x, dtype=float)


def lagrangian_for(sys: JerkSystem) -> LagrangianSpec:
    """The order-1/2 Lagrangian whose short-window equation of motion is ``sys``."""
    A = float(sys.A)
    sid = sys.id
    if sid is SystemId.C5:
        G, Gint = sys.G, sys.Gint
        return LagrangianSpec(
            L=lambda t, q, qd, u, v: 0.5 * A * qd**2 - 0.5 * v**2 + 0.5 * u**2 + Gint(q),
            d2L=lambda t, q, qd, u, v: G(q),
            d3L=lambda t, q, qd, u, v: A * qd,
            d4L=lambda t, q, qd, u, v: u,
            d5L=lambda t, q, qd, u, v: -v,
            alpha=HALF,
            f=_identity,
            fprime=_ones,
            g=_identity,
            gprime=_ones,
            name="c5",
        )
    if sid is SystemId.C14:
        return LagrangianSpec(
            L=lambda t, q, qd, u, v: 0.5 * A * qd**2 - 0.5 * v**2 + 0.5 * u * v - 0.5 * q**2,
            d2L=lambda t, q, qd, u, v: -q,
            d3L=lambda t, q, qd, u, v: A * qd,
            d4L=lambda t, q, qd, u, v: 0.5 * v,
            d5L=lambda t, q, qd, u, v: -v + 0.5 * u,
            alpha=HALF,
            f=_square,
            fprime=_twice,
            g=_identity,
            gprime=_ones,
            name="c14",
        )
    if sid is SystemId.C15:
        # u = (C D x^2, C D x)
        return LagrangianSpec(
            L=lambda t, q, qd, u, v: 0.5 * A * qd**2 - 0.5 * v**2 - 0.25 * u[0] * u[1] - 0.5 * q**2,
            d2L=lambda t, q, qd, u, v: -q,
            d3L=lambda t, q, qd, u, v: A * qd,
            d4L=lambda t, q, qd, u, v: (-0.25 * u[1], -0.25 * u[0]),
            d5L=lambda t, q, qd, u, v: -v,
            alpha=HALF,
            f=(_square, _identity),
            fprime=(_twice, _ones),
            g=_identity,
            gprime=_ones,
            name="c15",
        )
    if sid is SystemId.C16:
        c = 0.25 * (A + 2.0)
        return LagrangianSpec(
            L=lambda t, q, qd, u, v: 0.5 * A * q * qd**2 - 0.5 * v**2 + c * u * v - 0.5 * q**2,
            d2L=lambda t, q, qd, u, v: 0.5 * A * qd**2 - q,
            d3L=lambda t, q, qd, u, v: A * q * qd,
            d4L=lambda t, q, qd, u, v: c * v,
            d5L=lambda t, q, qd, u, v: -v + c * u,
            alpha=HALF,
            f=_square,
            fprime=_twice,
            g=_identity,
            gprime=_ones,
            name="c16",
        )
    return LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * v**2 + t * qd / q,
        d2L=lambda t, q, qd, u, v: -t * qd / q**2,
        d3L=lambda t, q, qd, u, v: t / q,
        d4L=zero,
        d5L=lambda t, q, qd, u, v: v,
        alpha=HALF,
        g=np.log,
        gprime=lambda qd: 1.0 / np.asarray(qd, dtype=float),
        time_dependent=True,
        name="c21",
        probe_box=((0.0, 2.0), (0.5, 2.0), (0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0)),
    )


# }}}


# {{{ closed-form quantities


def _half_caputo(x: SampledFn) -> np.ndarray:
    return caputo_left(x, HALF).values


def hamiltonian_c5(traj: Trajectory, A: float, Gint: Callable) -> SampledFn:
    x, v = traj.x.values, traj.v.values
    cx, cv = _half_caputo(traj.x), _half_caputo(traj.v)
    out = 0.5 * A * v**2 - 0.5 * cv**2 + 0.5 * cx**2 - Gint(x)
    return SampledFn(traj.grid, out)


def conserved_c13(traj: Trajectory, A: float, Gint: Callable) -> SampledFn:
    x, v = traj.x.values, traj.v.values
    cv = _half_caputo(traj.v)
    return SampledFn(traj.grid, 0.5 * A * v**2 - cv**2 - Gint(x))


def conserved_c17_c18_c19(traj: Trajectory, id, A: float) -> SampledFn:
    """Time-translation quantity of the ``C14``, ``C15`` or ``C16`` Lagrangian."""
    sid = SystemId(id)
    x, v = traj.x.values, traj.v.values
    cv = _half_caputo(traj.v)
    cx2 = _half_caputo(traj.x.map(np.square))
    if sid is SystemId.C14:
        out = 0.5 * A * v**2 - cv**2 + 0.5 * cx2 * cv + 0.5 * x**2
    elif sid is SystemId.C15:
        out = 0.5 * A * v**2 - cv**2 + 0.5 * x**2
    elif sid is SystemId.C16:
        out = 0.5 * A * x * v**2 - cv**2 + 0.25 * (A + 2.0) * cx2 * cv + 0.5 * x**2
    else:
        raise PreconditionError(f"no time-translation quantity of this form for {sid.value}")
    return SampledFn(traj.grid, out)


def scale_invariant_c22(traj: Trajectory) -> SampledFn:
    """``t + (x/x') D_b^{1/2} C D^{1/2} ln x'``, the scaling bracket of ``C21``."""
    v = traj.v.values
    if np.any(v <= 0.0):
        raise DomainExitError("scale-invariant quantity needs x' > 0 everywhere")
    w = caputo_left(traj.v.map(np.log), HALF)
    return SampledFn(traj.grid, traj.grid.t + traj.x.values / v * rl_deriv_right(w, HALF).values)


def scale_invariant_c22_noether(traj: Trajectory) -> SampledFn:
    """The same quantity through the general spatial-symmetry bracket."""
    spec = lagrangian_for(JerkSystem(SystemId.C21))
    return invariant_no_time(spec, traj.x, SymmetryGenerator.scaling(), qdot=traj.v)


# }}}


def subwindow_drift(
    traj: Trajectory,
    quantity: Callable[[Trajectory], SampledFn],
    width: int,
    stride: int | None = None,
    burn_in: float = 0.05,
) -> list[dict]:
    """Drift of ``quantity`` recomputed on sliding node windows.

    Each window of ``width`` intervals is treated as its own interval
    ``[a, b]``, so every fractional operator restarts at the window's left
    end point.
    """
    stride = width if stride is None else stride
    if width < 2 or width > traj.grid.n:
        raise OutOfRangeError(f"window width {width} does not fit {traj.grid.n} intervals")
    out = []
    for lo in range(0, traj.grid.n - width + 1, stride):
        sub = traj.restrict(lo, lo + width)
        d: Drift = drift(quantity(sub), burn_in)
        out.append(
            {
                "t_start": sub.grid.a,
                "t_end": sub.grid.b,
                "max_drift": d.max_drift,
                "rel_drift": d.rel_drift,
            }
        )
    return out


@dataclass(frozen=True)
class EnergyRatios:
    deltas: tuple
    ratios_c8: tuple
    ratios_c8b: tuple


def window_energy_approx(
    traj: Trajectory, t0: float, deltas, nodes: int = 512
) -> EnergyRatios:
    """Short-window energies of the fractional terms against their limit forms.

    For each ``delta``, ``1/2 (C_{t0} D^{1/2} x)^2`` at ``t0 + delta`` divided by
    ``(2/pi) x'(t0)^2 delta``, and the same with ``x'`` and ``x''``. A zero
    denominator gives a masked (NaN) ratio.
    """
    src = traj.grid
    tol = 1e-12 * (src.b - src.a)
    r8, r8b = [], []
    for d in deltas:
        d = float(d)
        if d <= 0 or t0 < src.a - tol or t0 + d > src.b + tol:
            raise OutOfRangeError(f"window [{t0}, {t0 + d}] is not inside [{src.a}, {src.b}]")
        win = Grid(max(t0, src.a), min(t0 + d, src.b), nodes)
        x, v = resample(traj.x, win), resample(traj.v, win)
        acc0 = float(resample(traj.acc, win).values[0])
        num8 = 0.5 * caputo_left(x, HALF).values[-1] ** 2
        num8b = 0.5 * caputo_left(v, HALF).values[-1] ** 2
        den8 = (2.0 / math.pi) * float(v.values[0]) ** 2 * d
        den8b = (2.0 / math.pi) * acc0**2 * d
        r8.append(num8 / den8 if den8 != 0.0 else math.nan)
        r8b.append(num8b / den8b if den8b != 0.0 else math.nan)
    return EnergyRatios(tuple(float(d) for d in deltas), tuple(r8), tuple(r8b))


# {{{ classical reference systems


def harmonic_spec(alpha: float = 1.0) -> LagrangianSpec:
    """``L = q'^2/2 - q^2/2`` with empty fractional slots."""
    return LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * qd**2 - 0.5 * q**2,
        d2L=lambda t, q, qd, u, v: -q,
        d3L=lambda t, q, qd, u, v: qd,
        alpha=alpha,
        name="harmonic",
    )


def free_particle_spec(alpha: float = 1.0) -> LagrangianSpec:
    return LagrangianSpec(
        L=lambda t, q, qd, u, v: 0.5 * qd**2,
        d2L=zero,
        d3L=lambda t, q, qd, u, v: qd,
        alpha=alpha,
        name="free",
    )


def integrate_classical(
    accel: Callable[[float], float], q0: float, v0: float, grid: Grid
) -> Trajectory:
    """RK4 for ``q'' = accel(q)``; ``acc`` holds ``accel(q)`` at the nodes."""
    h = grid.h

    def rhs(s):
        return np.array([s[1], accel(s[0])])

    s = np.array([q0, v0], dtype=float)
    states = np.empty((grid.size, 2))
    states[0] = s
    for j in range(grid.n):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[j + 1] = s
    if not np.all(np.isfinite(states)):
        raise BlowUpError("classical integration produced non-finite values")
    acc = np.array([accel(q) for q in states[:, 0]])
    return Trajectory.from_arrays(grid, states[:, 0], states[:, 1], acc)


# }}}
