"""Riemann-Liouville and Caputo operators on uniform grids.

Left operators are discrete convolutions with closed-form weights:

* fractional integral: product trapezoid rule (the kernel is integrated
  exactly against the piecewise-linear interpolant), ``O(h^2)``;
* Caputo derivative: the L1 scheme, ``O(h^{2-alpha})``;
* Riemann-Liouville derivative: Caputo plus the boundary term
  ``x(a) (t - a)^{-alpha} / Gamma(1 - alpha)``.

Right operators are obtained by reflecting the grid, so every left/right
pair is an exact mirror image. With this construction the right Caputo
derivative of a differentiable ``x`` equals ``-J_b^{1-alpha} x'`` and at
``alpha = 1`` reduces to ``-x'``.

:func:`gl_oracle` is an independent Grunwald-Letnikov discretization used
to cross-check the L1 route.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import HypothesisError, InvalidOrderError
from .numgrid import SampledFn, finite_diff, gamma, rgamma, trapezoid

__all__ = [
    "Scheme",
    "caputo_left",
    "caputo_right",
    "gl_oracle",
    "ibp_defect",
    "rl_deriv_left",
    "rl_deriv_right",
    "rl_integral_left",
    "rl_integral_right",
]


class Scheme(enum.Enum):
    PRODUCT_TRAPEZOID = "product-trapezoid"
    L1 = "l1"
    GRUNWALD_LETNIKOV = "grunwald-letnikov"


def check_integral_order(alpha: float) -> float:
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidOrderError(f"integral order must be positive, got {alpha}")
    return alpha


def check_derivative_order(alpha: float) -> float:
    alpha = float(alpha)
    if not (0 < alpha <= 1):
        raise InvalidOrderError(f"derivative order must be in (0, 1], got {alpha}")
    return alpha


def _powm1(p: float, x: np.ndarray) -> np.ndarray:
    """``(1 + x)^p - 1`` without cancellation."""
    return np.expm1(p * np.log1p(x))


def product_trapezoid_weights(alpha: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights of the left product-trapezoid fractional integral.

    Returns ``(w0, c)`` such that, up to the factor ``h^alpha/Gamma(alpha+2)``,
    ``J[j] = w0[j-1] x_0 + sum_{k=1}^{j} c[j-k] x_k`` for ``j = 1..n``.
    """
    p = alpha + 1.0
    c = np.empty(n)
    c[0] = 1.0
    if n > 1:
        c[1] = 2.0**p - 2.0
    # (m+1)^{p} - 2 m^{p} + (m-1)^{p}
    m = np.arange(2, n, dtype=float)
    c[2:] = m**p * (_powm1(p, 1.0 / m) + _powm1(p, -1.0 / m))

    w0 = np.empty(n)
    w0[0] = alpha
    # (j-1)^{p} - (j-1-alpha) j^{alpha} = j^{p} [(1-1/j)^{p} - 1 + p/j]
    j = np.arange(2, n + 1, dtype=float)
    w0[1:] = j**p * (_powm1(p, -1.0 / j) + p / j)
    return w0, c


def l1_weights(alpha: float, n: int) -> np.ndarray:
    """``b_m = (m+1)^{1-alpha} - m^{1-alpha}`` for ``m = 0..n-1``."""
    b = np.empty(n)
    b[0] = 1.0
    m = np.arange(1, n, dtype=float)
    b[1:] = m ** (1.0 - alpha) * _powm1(1.0 - alpha, 1.0 / m)
    return b


def gl_weights(alpha: float, n: int) -> np.ndarray:
    """``(-1)^k binom(alpha, k)`` for ``k = 0..n``."""
    k = np.arange(1, n + 1, dtype=float)
    g = np.empty(n + 1)
    g[0] = 1.0
    g[1:] = np.cumprod(1.0 - (alpha + 1.0) / k)
    return g


# {{{ left operators


def rl_integral_left(x: SampledFn, alpha: float) -> SampledFn:
    """Left Riemann-Liouville integral ``{}_a J_t^alpha x`` at every node."""
    alpha = check_integral_order(alpha)
    n, h = x.grid.n, x.grid.h
    v = x.values
    w0, c = product_trapezoid_weights(alpha, n)
    out = np.zeros(n + 1)
    out[1:] = w0 * v[0] + np.convolve(c, v[1:])[:n]
    out *= h**alpha / gamma(alpha + 2.0)
    return SampledFn(x.grid, out)


def caputo_left(x: SampledFn, alpha: float) -> SampledFn:
    """Left Caputo derivative ``{}^C_a D_t^alpha x`` (L1 scheme)."""
    alpha = check_derivative_order(alpha)
    if alpha == 1.0:
        return finite_diff(x, 1)
    n, h = x.grid.n, x.grid.h
    b = l1_weights(alpha, n)
    out = np.zeros(n + 1)
    out[1:] = np.convolve(b, np.diff(x.values))[:n]
    out *= h ** (-alpha) / gamma(2.0 - alpha)
    return SampledFn(x.grid, out)


def rl_deriv_left(x: SampledFn, alpha: float) -> SampledFn:
    """Left Riemann-Liouville derivative; node ``a`` is masked if ``x(a) != 0``."""
    alpha = check_derivative_order(alpha)
    cap = caputo_left(x, alpha)
    xa = x.values[0]
    if xa == 0.0 or alpha == 1.0:
        return cap
    out = cap.values.copy()
    tau = x.t[1:] - x.grid.a
    out[1:] += xa * tau ** (-alpha) * rgamma(1.0 - alpha)
    out[0] = np.nan
    return SampledFn(x.grid, out)


def gl_oracle_left(x: SampledFn, alpha: float) -> SampledFn:
    alpha = check_derivative_order(alpha)
    n, h = x.grid.n, x.grid.h
    g = gl_weights(alpha, n)
    out = np.convolve(g, x.values)[: n + 1] * h ** (-alpha)
    if x.values[0] != 0.0 and alpha < 1.0:
        out[0] = np.nan
    return SampledFn(x.grid, out)


# }}}


# {{{ right operators (reflections of the left ones)


def rl_integral_right(x: SampledFn, alpha: float) -> SampledFn:
    """Right Riemann-Liouville integral ``{}_t J_b^alpha x``."""
    return rl_integral_left(x.reflect(), alpha).reflect()


def caputo_right(x: SampledFn, alpha: float) -> SampledFn:
    """Right Caputo derivative ``{}^C_t D_b^alpha x``; vanishes at ``t = b``."""
    return caputo_left(x.reflect(), alpha).reflect()


def rl_deriv_right(x: SampledFn, alpha: float) -> SampledFn:
    """Right Riemann-Liouville derivative; node ``b`` is masked if ``x(b) != 0``."""
    return rl_deriv_left(x.reflect(), alpha).reflect()


def gl_oracle(x: SampledFn, alpha: float, side: str = "left") -> SampledFn:
    """Grunwald-Letnikov approximation of the Riemann-Liouville derivative.

    First order in ``h``. Only meant as an independent check on
    :func:`rl_deriv_left` / :func:`rl_deriv_right`.
    """
    if side == "left":
        return gl_oracle_left(x, alpha)
    if side == "right":
        return gl_oracle_left(x.reflect(), alpha).reflect()
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


# }}}


def ibp_sides(x: SampledFn, y: SampledFn, alpha: float, mirror: bool = False):
    """Both sides of the fractional integration-by-parts identity.

    ``mirror=False``: ``int y C_a D^alpha x`` and ``int x D_b^alpha y``;
    ``mirror=True``: ``int y C D_b^alpha x`` and ``int x D_a^alpha y``.

    The Riemann-Liouville side is split into Caputo part plus boundary term;
    the weakly singular boundary integral ``int x (b - t)^{-alpha} dt`` is
    itself a fractional integral of ``x`` evaluated at the far end point.
    """
    if x.grid != y.grid:
        raise ValueError("x and y must share a grid")
    alpha = check_derivative_order(alpha)
    if not mirror:
        lhs = trapezoid(y * caputo_left(x, alpha))
        rhs = trapezoid(x * caputo_right(y, alpha))
        if alpha < 1.0 and y.values[-1] != 0.0:
            rhs += y.values[-1] * rl_integral_left(x, 1.0 - alpha).values[-1]
    else:
        lhs = trapezoid(y * caputo_right(x, alpha))
        rhs = trapezoid(x * caputo_left(y, alpha))
        if alpha < 1.0 and y.values[0] != 0.0:
            rhs += y.values[0] * rl_integral_right(x, 1.0 - alpha).values[0]
    return lhs, rhs


def ibp_defect(
    x: SampledFn,
    y: SampledFn,
    alpha: float,
    mirror: bool = False,
    tol: float = 1e-10,
) -> float:
    """Relative defect of fractional integration by parts for ``x(a)=x(b)=0``."""
    scale = max(1.0, float(np.max(np.abs(x.values))))
    if abs(x.values[0]) > tol * scale or abs(x.values[-1]) > tol * scale:
        raise HypothesisError(
            f"integration by parts needs x(a) = x(b) = 0, "
            f"got x(a)={x.values[0]:.3g}, x(b)={x.values[-1]:.3g}"
        )
    lhs, rhs = ibp_sides(x, y, alpha, mirror=mirror)
    return abs(lhs - rhs) / max(1.0, abs(lhs))
