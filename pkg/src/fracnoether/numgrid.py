"""Uniform grids, sampled functions and the plain numerical substrate.

Everything above this module works on :class:`SampledFn` values tabulated
on a :class:`Grid`. Masked nodes (values that are undefined, e.g. at a
singular endpoint) are stored as NaN; :attr:`SampledFn.mask` exposes them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import GammaPoleError, GridTooSmallError, OutOfRangeError

__all__ = [
    "Grid",
    "SampledFn",
    "finite_diff",
    "gamma",
    "read_csv",
    "resample",
    "trapezoid",
]


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``a = t_0 < t_1 < ... < t_n = b``."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n:
            raise ValueError(f"subinterval count must be an integer: {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("grid end points must be finite")
        if not self.b > self.a:
            raise ValueError(f"expected b > a, got a={self.a}, b={self.b}")
        if self.n < 2:
            raise GridTooSmallError(f"need at least 2 subintervals, got {self.n}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def t(self) -> np.ndarray:
        return _nodes(self.a, self.b, self.n)

    def node(self, j: int) -> float:
        if j == self.n:
            return self.b
        return self.a + j * self.h

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledFn":
        return SampledFn(self, np.broadcast_to(fn(self.t), (self.size,)))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.a, self.b, self.n * factor)


@lru_cache(maxsize=64)
def _nodes(a: float, b: float, n: int) -> np.ndarray:
    t = a + np.arange(n + 1) * ((b - a) / n)
    t[-1] = b
    t.setflags(write=False)
    return t


@dataclass(frozen=True, eq=False)
class SampledFn:
    """A real function tabulated on every node of a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values for {self.grid}, got shape {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def mask(self) -> np.ndarray:
        """True where the value is undefined."""
        return ~np.isfinite(self.values)

    @property
    def masked(self) -> bool:
        return bool(self.mask.any())

    def __len__(self) -> int:
        return self.grid.size

    def __getitem__(self, j):
        return self.values[j]

    def with_values(self, values) -> "SampledFn":
        return SampledFn(self.grid, values)

    def reflect(self) -> "SampledFn":
        """Tabulate ``t -> x(a + b - t)`` on the same grid."""
        return SampledFn(self.grid, self.values[::-1])

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SampledFn":
        return SampledFn(self.grid, np.broadcast_to(fn(self.values), (self.grid.size,)))

    def _other(self, other):
        if isinstance(other, SampledFn):
            if other.grid != self.grid:
                raise ValueError("sampled functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return SampledFn(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledFn(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return SampledFn(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return SampledFn(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return SampledFn(self.grid, self.values / self._other(other))

    def __neg__(self):
        return SampledFn(self.grid, -self.values)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.t, self.values):
                w.writerow([f"{t:.17g}", f"{v:.17g}"])
        return path


def read_csv(path) -> SampledFn:
    """Read a ``t,value`` CSV written by :meth:`SampledFn.to_csv`."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise ValueError(f"{path}: expected header 't,value'")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    grid = grid_from_nodes(data[:, 0])
    return SampledFn(grid, data[:, 1])


def grid_from_nodes(t: np.ndarray, rtol: float = 1e-9) -> Grid:
    t = np.asarray(t, dtype=float)
    if t.size < 3:
        raise GridTooSmallError("need at least 3 nodes")
    grid = Grid(t[0], t[-1], t.size - 1)
    if np.max(np.abs(t - grid.t)) > rtol * (grid.b - grid.a):
        raise ValueError("nodes are not uniformly spaced")
    return grid


def gamma(x: float) -> float:
    """Euler's gamma function; raises at the poles 0, -1, -2, ..."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise GammaPoleError(f"gamma has a pole at {x}")
    return math.gamma(x)


def rgamma(x: float) -> float:
    """``1/gamma(x)``, zero at the poles."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        return 0.0
    return 1.0 / math.gamma(x)


# {{{ finite differences

# half-width of the central stencil for each derivative order
_CENTRAL = {1: (-1, 0, 1), 2: (-1, 0, 1), 3: (-2, -1, 0, 1, 2)}


@lru_cache(maxsize=None)
def stencil_weights(offsets: tuple, k: int) -> tuple:
    """Weights ``w`` with ``sum(w_i x(t + o_i h)) = h^k x^(k)(t) + ...``."""
    o = np.asarray(offsets, dtype=float)
    m = len(offsets)
    vander = np.vander(o, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[k] = math.factorial(k)
    return tuple(np.linalg.solve(vander, rhs))


def finite_diff(x: SampledFn, order: int = 1) -> SampledFn:
    """``order``-th derivative, second-order accurate at every node.

    Central stencils in the interior, one-sided ``order + 2`` point stencils
    at the boundary nodes that the central stencil cannot reach.
    """
    if order not in _CENTRAL:
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
    size = x.grid.size
    width = order + 2
    if size < width:
        raise GridTooSmallError(f"order {order} needs {width} nodes, grid has {size}")

    v = x.values
    out = np.empty(size)
    central = _CENTRAL[order]
    half = central[-1]
    w = stencil_weights(central, order)
    acc = np.zeros(size - 2 * half)
    for o, wi in zip(central, w):
        acc = acc + wi * v[half + o : size - half + o]
    out[half : size - half] = acc

    for j in range(half):
        offs = tuple(range(-j, -j + width))
        out[j] = np.dot(stencil_weights(offs, order), v[j + np.array(offs)])
        jr = size - 1 - j
        offs = tuple(range(j - width + 1, j + 1))
        out[jr] = np.dot(stencil_weights(offs, order), v[jr + np.array(offs)])

    return SampledFn(x.grid, out / x.grid.h**order)


def derivative(x: SampledFn, order: int) -> SampledFn:
    """Derivative of any order >= 0 by chaining the order-1..3 stencils."""
    if order < 0:
        raise ValueError("negative derivative order")
    while order > 3:
        x = finite_diff(x, 3)
        order -= 3
    return finite_diff(x, order) if order else x


# }}}


def trapezoid(x: SampledFn) -> float:
    v = x.values
    return float(x.grid.h * (np.sum(v) - 0.5 * (v[0] + v[-1])))


def resample(x: SampledFn, target: Grid) -> SampledFn:
    """Local cubic (four-node Lagrange) interpolation onto ``target``."""
    src = x.grid
    tol = 1e-12 * (src.b - src.a)
    if target.a < src.a - tol or target.b > src.b + tol:
        raise OutOfRangeError(
            f"[{target.a}, {target.b}] is not inside [{src.a}, {src.b}]"
        )
    if target == src:
        return SampledFn(target, x.values)

    s = np.clip((target.t - src.a) / src.h, 0.0, src.n)
    nearest = np.rint(s)
    exact = np.abs(s - nearest) < 1e-9
    i0 = np.clip(np.floor(s).astype(int) - 1, 0, src.n - 3)
    r = s - i0
    v = x.values
    out = np.zeros(target.size)
    for k in range(4):
        lk = np.ones(target.size)
        for m in range(4):
            if m != k:
                lk *= (r - m) / (k - m)
        out += lk * v[i0 + k]
    out[exact] = v[nearest[exact].astype(int)]
    return SampledFn(target, out)
