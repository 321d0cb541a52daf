"""Conserved brackets of the fractional Noether-type theorems.

All brackets are sampled along a given trajectory; whether they are constant
is then measured with :func:`drift`. The infinite transfer series is
truncated (:class:`SeriesConfig`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InsufficientDataError, PreconditionError
from .fracops import caputo_left, rl_integral_left, rl_integral_right, rl_deriv_right
from .numgrid import SampledFn, derivative, finite_diff
from .varcalc import LagrangianSpec, Evaluation, el_residual, evaluate

__all__ = [
    "Drift",
    "SeriesConfig",
    "SymmetryGenerator",
    "TruncationWarning",
    "autonomous_bracket",
    "drift",
    "invariant_general",
    "invariant_no_time",
    "offshell_defect",
    "transfer_defect",
    "transfer_series",
]


class TruncationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SymmetryGenerator:
    """Infinitesimal generators: ``f2(t, q)`` in space, ``tau(t)`` in time."""

    f2: Callable
    tau: Callable

    @classmethod
    def time_translation(cls) -> "SymmetryGenerator":
        return cls(f2=lambda t, q: np.zeros_like(q), tau=lambda t: np.ones_like(t))

    @classmethod
    def space_translation(cls, c: float = 1.0) -> "SymmetryGenerator":
        return cls(f2=lambda t, q: np.full_like(q, c), tau=lambda t: np.zeros_like(t))

    @classmethod
    def scaling(cls, c: float = 1.0) -> "SymmetryGenerator":
        """Generator of ``q -> exp(eps c) q``."""
        return cls(f2=lambda t, q: c * q, tau=lambda t: np.zeros_like(t))

    def sample_f2(self, q: SampledFn) -> SampledFn:
        vals = np.broadcast_to(np.asarray(self.f2(q.t, q.values), float), (q.grid.size,))
        return SampledFn(q.grid, vals)

    def sample_tau(self, q: SampledFn) -> SampledFn:
        vals = np.broadcast_to(np.asarray(self.tau(q.t), float), (q.grid.size,))
        return SampledFn(q.grid, vals)


@dataclass(frozen=True)
class SeriesConfig:
    R: int = 2
    term_tol: float = 0.0
    divergence_guard: bool = True

    def __post_init__(self) -> None:
        if not 0 <= self.R <= 6:
            raise ValueError(f"series truncation R must be in 0..6, got {self.R}")


def _frac_integral(x: SampledFn, order: float, side: str) -> SampledFn:
    # order 0 appears at alpha = 1, r = 0
    if abs(order) < 1e-14:
        return x
    if side == "left":
        return rl_integral_left(x, order)
    return rl_integral_right(x, order)


def transfer_series(
    f: SampledFn, g: SampledFn, alpha: float, cfg: SeriesConfig = SeriesConfig()
) -> SampledFn:
    """Truncated transfer series whose time derivative is ``g C_a D^alpha f - f D_b^alpha g``.

    ``sum_{r=0}^{R} (-1)^r g^(r) J_a^{r+1-alpha}(f - f(a)) + f^(r) J_b^{r+1-alpha} g``
    """
    if f.grid != g.grid:
        raise ValueError("f and g must share a grid")
    shifted = f - f.values[0]
    total = np.zeros(f.grid.size)
    sizes: list[float] = []
    for r in range(cfg.R + 1):
        order = r + 1.0 - alpha
        left = derivative(g, r).values * _frac_integral(shifted, order, "left").values
        right = derivative(f, r).values * _frac_integral(g, order, "right").values
        term = (-1.0) ** r * left + right
        size = float(np.max(np.abs(term[np.isfinite(term)]), initial=0.0))
        if (
            cfg.divergence_guard
            and len(sizes) >= 2
            and size > sizes[-1] > sizes[-2]
        ):
            warnings.warn(
                f"transfer series terms grow at r={r}; truncated at R={r - 1}",
                TruncationWarning,
                stacklevel=2,
            )
            break
        total += term
        sizes.append(size)
        if size < cfg.term_tol:
            break
    return SampledFn(f.grid, total)


def transfer_defect(
    f: SampledFn,
    g: SampledFn,
    alpha: float,
    cfg: SeriesConfig = SeriesConfig(),
    burn_in: float = 0.05,
) -> float:
    """Interior mismatch between ``d/dt[transfer_series]`` and its target.

    The target ``g C_a D^alpha f - f D_b^alpha g`` is computed directly with
    the fractional operators; the result is normalized by its largest
    magnitude on the retained nodes.
    """
    rate = finite_diff(transfer_series(f, g, alpha, cfg), 1).values
    target = (g * caputo_left(f, alpha) - f * rl_deriv_right(g, alpha)).values
    keep = _retained(f.grid.size, burn_in)
    diff, target = (rate - target)[keep], target[keep]
    ok = np.isfinite(diff)
    scale = float(np.max(np.abs(target[ok]), initial=0.0))
    worst = float(np.max(np.abs(diff[ok]), initial=0.0))
    return worst / scale if scale > 0.0 else worst


def _require_first_order(spec: LagrangianSpec) -> None:
    if spec.n != 1:
        raise PreconditionError(f"Noether brackets need n = 1, got n = {spec.n}")


def _space_part(ev: Evaluation, f2: SampledFn, cfg: SeriesConfig) -> SampledFn:
    spec = ev.spec
    inner = ev.d3.values + spec.gprime(ev.qn.values) * rl_deriv_right(ev.d5, spec.alpha).values
    out = f2.values * inner
    for d4 in ev.d4:
        out = out + transfer_series(f2, d4, spec.alpha, cfg).values
    return SampledFn(ev.grid, out)


def _time_part(ev: Evaluation) -> SampledFn:
    spec = ev.spec
    qd = ev.qn.values
    frac = sum(d4.values * u.values for d4, u in zip(ev.d4, ev.u)) + ev.d5.values * ev.v.values
    chained = caputo_left(SampledFn(ev.grid, qd * spec.gprime(qd)), spec.alpha)
    out = ev.L.values - qd * ev.d3.values - spec.alpha * frac - ev.d5.values * chained.values
    return SampledFn(ev.grid, out)


def invariant_no_time(
    spec: LagrangianSpec,
    q: SampledFn,
    gen: SymmetryGenerator,
    cfg: SeriesConfig = SeriesConfig(),
    qdot: SampledFn | None = None,
) -> SampledFn:
    """Bracket conserved under a purely spatial symmetry (``tau = 0``)."""
    _require_first_order(spec)
    if np.any(gen.sample_tau(q).values != 0.0):
        raise PreconditionError("generator has a time component; use invariant_general")
    return _space_part(evaluate(spec, q, qdot), gen.sample_f2(q), cfg)


def invariant_general(
    spec: LagrangianSpec,
    q: SampledFn,
    gen: SymmetryGenerator,
    cfg: SeriesConfig = SeriesConfig(),
    qdot: SampledFn | None = None,
) -> SampledFn:
    """Bracket conserved under a combined space and time symmetry."""
    _require_first_order(spec)
    ev = evaluate(spec, q, qdot)
    f2, tau = gen.sample_f2(q), gen.sample_tau(q)
    out = np.zeros(q.grid.size)
    if np.any(f2.values != 0.0):
        out = out + _space_part(ev, f2, cfg).values
    if np.any(tau.values != 0.0):
        out = out + tau.values * _time_part(ev).values
    return SampledFn(q.grid, out)


def autonomous_bracket(
    spec: LagrangianSpec, q: SampledFn, qdot: SampledFn | None = None
) -> SampledFn:
    """Bracket conserved under time translation for an autonomous Lagrangian.

    ``L - q' d3L - alpha (d4L u + d5L v) - d5L C_a D^alpha (q' g'(q'))``
    """
    _require_first_order(spec)
    if spec.time_dependent:
        raise PreconditionError(f"{spec.name or 'Lagrangian'} depends explicitly on t")
    return _time_part(evaluate(spec, q, qdot))


def _retained(size: int, burn_in: float) -> slice:
    if not 0.0 <= burn_in < 0.5:
        raise ValueError(f"burn-in fraction must be in [0, 0.5), got {burn_in}")
    cut = int(math.floor(burn_in * size))
    return slice(cut, size - cut)


def offshell_defect(
    spec: LagrangianSpec,
    q: SampledFn,
    gen: SymmetryGenerator,
    cfg: SeriesConfig = SeriesConfig(),
    burn_in: float = 0.05,
    tol: float = 1e-10,
) -> float:
    """Relative size of ``d/dt[bracket] + f2 * el_residual`` on interior nodes.

    For a Lagrangian that does not depend on ``q`` directly and a constant
    spatial generator this combination vanishes for every ``q``, extremal or
    not. Normalized by the largest ``|d/dt[bracket]|`` on the retained nodes.
    """
    _require_first_order(spec)
    if np.any(gen.sample_tau(q).values != 0.0):
        raise PreconditionError("off-shell identity needs tau = 0")
    f2 = gen.sample_f2(q)
    if np.ptp(f2.values) > tol * max(1.0, float(np.max(np.abs(f2.values)))):
        raise PreconditionError("off-shell identity needs a constant spatial generator")
    ev = evaluate(spec, q)
    if np.max(np.abs(ev.d2.values)) > tol * max(1.0, float(np.max(np.abs(ev.L.values)))):
        raise PreconditionError("off-shell identity needs dL/dq = 0 along q")

    bracket = _space_part(ev, f2, cfg)
    rate = finite_diff(bracket, 1).values
    combo = rate + f2.values * el_residual(spec, q).values
    keep = _retained(q.grid.size, burn_in)
    rate, combo = rate[keep], combo[keep]
    ok = np.isfinite(combo)
    scale = float(np.max(np.abs(rate[ok]), initial=0.0))
    worst = float(np.max(np.abs(combo[ok]), initial=0.0))
    if scale == 0.0:
        return worst
    return worst / scale


@dataclass(frozen=True)
class Drift:
    max_drift: float
    rel_drift: float
    t_ref: float
    retained: int


def drift(series: SampledFn, burn_in: float = 0.05) -> Drift:
    """Largest deviation from the first retained value."""
    keep = _retained(series.grid.size, burn_in)
    t, v = series.t[keep], series.values[keep]
    ok = np.isfinite(v)
    t, v = t[ok], v[ok]
    if v.size < 10:
        raise InsufficientDataError(f"only {v.size} unmasked nodes after burn-in")
    ref = v[0]
    max_drift = float(np.max(np.abs(v - ref)))
    return Drift(
        max_drift=max_drift,
        rel_drift=max_drift / max(1.0, abs(float(ref))),
        t_ref=float(t[0]),
        retained=int(v.size),
    )
