"""Fractional Noether-type conservation laws, numerically.

Modules, from the bottom up:

``numgrid``  uniform grids, sampled functions, finite differences
``fracops``  Riemann-Liouville and Caputo operators and their checks
``varcalc``  actions, Euler-Lagrange residuals, shrinking-window limits
``noether``  conserved brackets, transfer series, drift metrics
``jerklab``  jerk systems, their Lagrangians and conserved quantities
``cli``      the ``fracnoether`` command
"""

from .numgrid import Grid, SampledFn

__all__ = ["Grid", "SampledFn"]
