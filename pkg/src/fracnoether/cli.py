"""Command-line front end: ``fracnoether {fracop,simulate,noether,verify}``.

Every command builds a :class:`ReportDoc`. With ``--out DIR`` the report is
written to ``DIR/report.json`` next to any CSV artifacts; without it the
JSON goes to stdout and nothing is written to disk.

Exit codes: 0 when every thresholded verdict passes, 1 when one fails,
2 for usage errors, 3 when a numerical procedure fails (blow-up, ...).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from . import fracops
from .errors import BlowUpError, DomainExitError, NumericalError
from .jerklab import (
    JerkSystem,
    SystemId,
    Trajectory,
    conserved_c13,
    conserved_c17_c18_c19,
    constant_g,
    free_particle_spec,
    hamiltonian_c5,
    harmonic_spec,
    integrate,
    integrate_classical,
    lagrangian_for,
    quadratic_g,
    scale_invariant_c22,
    subwindow_drift,
    window_energy_approx,
)
from .noether import (
    SeriesConfig,
    SymmetryGenerator,
    autonomous_bracket,
    drift,
    invariant_no_time,
    offshell_defect,
    transfer_defect,
)
from .numgrid import Grid, SampledFn, gamma, read_csv, rgamma
from .varcalc import LagrangianSpec, gateaux_variation, midpoint_limit, zero

THRESHOLDS_VERSION = "1"

# One entry per thresholded verdict; ``--threshold NAME=VALUE`` overrides.
DEFAULT_THRESHOLDS = {
    "fracop_rel": 1e-3,
    "simulate_analytic_abs": 1e-6,
    "rk4_order_lo": 3.7,
    "rk4_order_hi": 4.3,
    "classical_energy_rel_drift": 1e-6,
    "momentum_rel_drift": 1e-8,
    "crosscheck_rel": 1e-6,
    "scale_invariance_abs": 1e-10,
    "ibp": 1e-2,
    "gateaux_rel": 1e-2,
    "limit_rel": 5e-2,
    "offshell_fractional": 5e-2,
    "offshell_classical": 1e-6,
    "transfer_rel": 1e-2,
    "c8_linear": 1e-2,
    "c8_smooth": 5e-2,
}

# (A, x0, v0, a0, t1) per system; chosen so the default runs stay bounded
SYSTEM_DEFAULTS = {
    "c5": (2.017, 0.0, 0.0, 0.0, 10.0),
    "c14": (2.017, -1.0, 0.0, 0.0, 10.0),
    "c15": (3.6, 0.001, 0.001, 0.0, 10.0),
    "c16": (2.0, -0.5, 0.0, 0.0, 10.0),
    "c21": (0.0, 1.0, 1.0, 1.0, 0.5),
    "harmonic": (0.0, 0.0, 1.0, 0.0, 20.0),
    "free": (0.0, 0.0, 1.0, 0.0, 20.0),
}

QUANTITY_SYSTEMS = {
    "c13": ("c5",),
    "c17": ("c14",),
    "c18": ("c15",),
    "c19": ("c16",),
    "c22": ("c21",),
    "att": ("c5", "c14", "c15", "c16", "harmonic", "free"),
    "tn": ("c21", "free"),
}

CLASSICAL = ("harmonic", "free")


class UsageError(ValueError):
    pass


# {{{ built-in functions


def _zeros(t):
    return np.zeros_like(t)


def _ones(t):
    return np.ones_like(t)


@dataclass(frozen=True)
class Builtin:
    x: Callable
    dx: Callable
    ddx: Callable
    poly: tuple | None = None


BUILTINS = {
    "t": Builtin(lambda t: t, _ones, _zeros, (0.0, 1.0)),
    "t2": Builtin(lambda t: t**2, lambda t: 2 * t, lambda t: 2 * _ones(t), (0.0, 0.0, 1.0)),
    "t3": Builtin(lambda t: t**3, lambda t: 3 * t**2, lambda t: 6 * t, (0.0, 0.0, 0.0, 1.0)),
    "sin": Builtin(np.sin, np.cos, lambda t: -np.sin(t)),
    "linear": Builtin(lambda t: 1 + 2 * t, lambda t: 2 * _ones(t), _zeros, (1.0, 2.0)),
    "const": Builtin(_ones, _zeros, _zeros, (1.0,)),
}


def _power_oracle(coef: np.ndarray, s: np.ndarray, op: str, alpha: float) -> np.ndarray:
    """Exact ``op`` of ``sum coef[k] s^k`` in the variable ``s`` measured from the terminal."""
    out = np.zeros_like(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, c in enumerate(coef):
            if c == 0.0:
                continue
            if op == "j":
                out = out + c * gamma(k + 1) / gamma(k + 1 + alpha) * s ** (k + alpha)
            elif op == "c" and k == 0:
                continue
            elif alpha == 1.0:
                if k >= 1:
                    out = out + c * k * s ** (k - 1)
            else:
                out = out + c * gamma(k + 1) * rgamma(k + 1 - alpha) * s ** (k - alpha)
    return np.where(np.isfinite(out), out, np.nan)


def oracle(name: str, op: str, alpha: float, grid: Grid) -> SampledFn | None:
    """Closed form of a fractional operator applied to a polynomial builtin.

    Right-sided operators act on ``x(b - s)`` exactly as the left ones act
    on a function of ``s``, so both sides share the power-law formulas.
    """
    fn = BUILTINS[name]
    if fn.poly is None:
        return None
    p = Polynomial(fn.poly)
    if op in ("jleft", "dleft", "cleft", "gl"):
        coef = p(Polynomial([grid.a, 1.0])).coef
        s = grid.t - grid.a
    else:
        coef = p(Polynomial([grid.b, -1.0])).coef
        s = grid.b - grid.t
    kind = {"jleft": "j", "jright": "j", "cleft": "c", "cright": "c"}.get(op, "d")
    return SampledFn(grid, _power_oracle(np.asarray(coef, dtype=float), s, kind, alpha))


# }}}


# {{{ report document


def _clean(value):
    """Make ``value`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class Verdict:
    check: str
    measured: float | None
    threshold: float | list | None = None
    relation: str = "<="
    passed: bool | None = None

    def __post_init__(self) -> None:
        if self.passed is not None or self.threshold is None:
            return
        m = self.measured
        if m is None or not math.isfinite(m):
            self.passed = False
        elif self.relation == "<=":
            self.passed = m <= self.threshold
        elif self.relation == "in":
            lo, hi = self.threshold
            self.passed = lo <= m <= hi
        else:
            raise ValueError(f"unknown relation {self.relation!r}")

    @property
    def thresholded(self) -> bool:
        return self.threshold is not None

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "measured": self.measured,
            "threshold": self.threshold,
            "relation": self.relation if self.thresholded else None,
            "pass": self.passed,
        }


@dataclass
class ReportDoc:
    command: str
    parameters: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    numeric_failure: str | None = None

    def table(self, name: str, rows) -> None:
        self.tables[name] = [dict(r) for r in rows]

    def verdict(self, check, measured, threshold=None, relation="<=", passed=None) -> Verdict:
        v = Verdict(check, None if measured is None else float(measured), threshold, relation, passed)
        self.verdicts.append(v)
        return v

    def exit_code(self) -> int:
        if self.numeric_failure:
            return 3
        if any(v.thresholded and not v.passed for v in self.verdicts):
            return 1
        return 0

    def to_dict(self, meta: bool = True) -> dict:
        tables = dict(self.tables)
        # mirror every verdict into a table so measured values are auditable
        tables["verdicts"] = [v.as_dict() for v in self.verdicts]
        doc = {
            "command": self.command,
            "parameters": self.parameters,
            "tables": tables,
            "artifacts": list(self.artifacts),
            "verdicts": [v.as_dict() for v in self.verdicts],
            "status": {"numeric_failure": self.numeric_failure, "exit_code": self.exit_code()},
        }
        if meta:
            doc["meta"] = _meta()
        return _clean(doc)

    def to_json(self, meta: bool = True) -> str:
        return json.dumps(self.to_dict(meta), sort_keys=True, indent=2) + "\n"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _meta() -> dict:
    return {
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "numpy": np.__version__,
        "package_version": _version(),
        "python": sys.version.split()[0],
        "thresholds_version": THRESHOLDS_VERSION,
    }


class Output:
    """Where artifacts go; ``None`` means write nothing."""

    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, report: ReportDoc, name: str, writer: Callable[[Path], object]) -> str | None:
        if self.dir is None:
            return None
        writer(self.dir / name)
        report.artifacts.append(name)
        return name

    def finish(self, report: ReportDoc) -> None:
        text = report.to_json()
        if self.dir is None:
            sys.stdout.write(text)
            return
        (self.dir / "report.json").write_text(text)
        print(self.dir / "report.json")


# }}}


# {{{ argument helpers


def parse_grid(text: str) -> Grid:
    try:
        a, b, n = text.split(",")
        return Grid(float(a), float(b), int(n))
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"expected 'a,b,n', got {text!r} ({exc})") from None


def parse_floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def thresholds(args) -> dict:
    out = dict(DEFAULT_THRESHOLDS)
    for item in args.threshold or ():
        name, sep, value = item.partition("=")
        if not sep or name not in out:
            raise UsageError(f"unknown threshold {name!r}; known: {', '.join(sorted(out))}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"threshold {name} needs a number, got {value!r}") from None
    return out


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    ok = np.isfinite(a) & np.isfinite(b)
    scale = max(1.0, float(np.max(np.abs(b[ok]), initial=0.0)))
    return float(np.max(np.abs(a[ok] - b[ok]), initial=0.0)) / scale


def fit_order(ns, errors) -> float | None:
    """Slope of ``-log(error)`` against ``log(n)``; ``None`` if errors are at roundoff."""
    e = np.asarray(errors, dtype=float)
    if len(e) < 2 or not np.all(np.isfinite(e)) or np.any(e <= 1e-13):
        return None
    slope = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(e), 1)[0]
    return float(-slope)


# }}}


# {{{ fracop

OPS = {
    "jleft": fracops.rl_integral_left,
    "jright": fracops.rl_integral_right,
    "dleft": fracops.rl_deriv_left,
    "dright": fracops.rl_deriv_right,
    "cleft": fracops.caputo_left,
    "cright": fracops.caputo_right,
    "gl": lambda x, a: fracops.gl_oracle(x, a, "left"),
}


def cmd_fracop(args) -> ReportDoc:
    th = thresholds(args)
    out = Output(args.out)
    if (args.input is None) == (args.fn is None):
        raise UsageError("give exactly one of --input and --fn")
    if args.input is not None and args.refine:
        raise UsageError("--refine needs --fn (a CSV fixes the grid)")
    op = OPS[args.op]
    report = ReportDoc("fracop")
    if args.input is not None:
        x = read_csv(args.input)
        grid = x.grid
    else:
        grid = args.grid
        x = grid.sample(BUILTINS[args.fn].x)
    report.parameters = {
        "op": args.op,
        "alpha": args.alpha,
        "grid": [grid.a, grid.b, grid.n],
        "input": args.input,
        "fn": args.fn,
        "refine": args.refine,
        "thresholds": th,
    }
    result = op(x, args.alpha)
    out.write(report, "result.csv", result.to_csv)

    # the far end point: t = b for left operators, t = a for right ones
    right = args.op in ("jright", "dright", "cright")
    far = 0 if right else grid.n
    row = {"t": float(grid.t[far]), "value": float(result.values[far])}
    exact = oracle(args.fn, args.op, args.alpha, grid) if args.fn else None
    if exact is not None:
        ex = float(exact.values[far])
        err = abs(row["value"] - ex) / (abs(ex) if ex != 0.0 else 1.0)
        row.update(exact=ex, rel_err=err)
        report.verdict("endpoint_rel_err", err, th["fracop_rel"])
    report.table("endpoint", [row])

    if args.refine:
        rows, ns, values, errs = [], [], [], []
        for k in range(args.refine + 1):
            g = Grid(grid.a, grid.b, grid.n * 2**k)
            j = 0 if right else g.n
            v = float(op(g.sample(BUILTINS[args.fn].x), args.alpha).values[j])
            r = {"n": g.n, "value": v}
            if exact is not None:
                ex = float(oracle(args.fn, args.op, args.alpha, g).values[j])
                r["abs_err"] = abs(v - ex)
                errs.append(r["abs_err"])
            ns.append(g.n)
            values.append(v)
            rows.append(r)
        if exact is None:
            errs = [abs(a - b) for a, b in zip(values, values[1:])]
            ns = ns[:-1]
        order = fit_order(ns, errs)
        report.table("convergence", rows)
        report.table("convergence_fit", [{"observed_order": order, "basis": "oracle" if exact is not None else "successive differences"}])
        report.verdict("observed_order", order)
    out.finish(report)
    return report


# }}}


# {{{ simulation helpers


def _system_params(args, name: str) -> dict:
    A, x0, v0, a0, t1 = SYSTEM_DEFAULTS[name]
    pick = lambda value, default: default if value is None else value  # noqa: E731
    return {
        "system": name,
        "A": pick(args.A, A),
        "B": args.B,
        "const_g": args.const_g,
        "x0": pick(args.x0, x0),
        "v0": pick(args.v0, v0),
        "a0": pick(args.a0, a0),
        "t1": pick(args.t1, t1),
        "dt": args.dt,
    }


def _jerk_system(p: dict) -> JerkSystem:
    if p["system"] == "c5":
        G, Gint = constant_g(p["const_g"]) if p["const_g"] is not None else quadratic_g(p["B"])
        return JerkSystem(SystemId.C5, p["A"], G, Gint)
    return JerkSystem(SystemId(p["system"]), p["A"])


def _grid(t1: float, dt: float) -> Grid:
    n = int(round(t1 / dt))
    if n < 2 or not math.isclose(n * dt, t1, rel_tol=1e-9):
        raise UsageError(f"--t1 {t1} is not a multiple of --dt {dt} with at least 2 steps")
    return Grid(0.0, t1, n)


def _simulate(p: dict, scale: float = 1.0) -> Trajectory:
    grid = _grid(p["t1"], p["dt"])
    x0, v0, a0 = (scale * p[k] for k in ("x0", "v0", "a0"))
    if p["system"] == "harmonic":
        return integrate_classical(lambda q: -q, x0, v0, grid)
    if p["system"] == "free":
        return integrate_classical(lambda q: 0.0, x0, v0, grid)
    return integrate(_jerk_system(p), x0, v0, a0, grid, truncate=p["system"] == "c21")


def _analytic_c5(p: dict):
    """``c (t - sin t)`` solves the zero-data problem when ``A = 0`` and ``G = c``."""
    if p["system"] != "c5" or p["A"] != 0.0 or p["const_g"] is None:
        return None
    if any(p[k] != 0.0 for k in ("x0", "v0", "a0")):
        return None
    c = p["const_g"]
    return lambda t: c * (t - np.sin(t))


# }}}


def cmd_simulate(args) -> ReportDoc:
    th = thresholds(args)
    out = Output(args.out)
    p = _system_params(args, args.system)
    report = ReportDoc("simulate", parameters={**p, "order_dt": args.order_dt, "order_t1": args.order_t1, "thresholds": th})

    status, traj = "completed", None
    try:
        traj = _simulate(p)
    except BlowUpError as exc:
        status, traj = f"blow-up: {exc}", exc.trajectory
        report.numeric_failure = str(exc)
    if traj is not None:
        out.write(report, "trajectory.csv", traj.to_csv)
        if traj.grid.b < p["t1"] and report.numeric_failure is None:
            status = f"domain exit: truncated at t={traj.grid.b:.6g}"
    summary = {"status": status}
    if traj is not None:
        summary.update(t_end=traj.grid.b, nodes=traj.grid.size, max_abs_x=float(np.max(np.abs(traj.x.values))))
    report.table("summary", [summary])
    report.verdict("status", 0.0 if report.numeric_failure is None else 1.0, passed=report.numeric_failure is None)

    exact = _analytic_c5(p)
    if exact is not None and traj is not None and report.numeric_failure is None:
        err = float(np.max(np.abs(traj.x.values - exact(traj.grid.t))))
        report.table("analytic", [{"solution": "c (t - sin t)", "max_abs_err": err}])
        report.verdict("analytic_max_abs_err", err, th["simulate_analytic_abs"])

    # order study on a coarser ladder: at the production step size the
    # global error is at roundoff level and no order can be read off
    horizon = min(args.order_t1, p["t1"] if traj is None else traj.grid.b)
    rows, ends = [], []
    for k in range(3):
        dt = args.order_dt / 2**k
        n = max(2, int(round(horizon / dt)))
        q = dict(p, t1=n * dt, dt=dt)
        try:
            tr = _simulate(q)
        except NumericalError:
            rows.append({"dt": dt, "x_end": None})
            ends.append(math.nan)
            continue
        x_end = float(tr.x.values[-1]) if tr.grid.n == n else math.nan
        row = {"dt": dt, "t_end": n * dt, "x_end": x_end}
        if exact is not None:
            row["abs_err"] = abs(x_end - float(exact(np.array([n * dt]))[0]))
        rows.append(row)
        ends.append(x_end)
    if exact is not None:
        errs = [r.get("abs_err", math.nan) for r in rows]
        order = math.log2(errs[0] / errs[1]) if errs[1] > 0 else math.nan
        order2 = math.log2(errs[1] / errs[2]) if errs[2] > 0 else math.nan
        measured = order2 if math.isfinite(order2) else order
    else:
        d1, d2 = abs(ends[0] - ends[1]), abs(ends[1] - ends[2])
        measured = math.log2(d1 / d2) if d2 > 0 and math.isfinite(d1) else math.nan
    report.table("order_study", rows + [{"observed_order": measured}])
    if report.numeric_failure is None:
        report.verdict("rk4_order", measured, [th["rk4_order_lo"], th["rk4_order_hi"]], relation="in")
    else:
        # near a blow-up the step-size ladder does not see the asymptotic regime
        report.verdict("rk4_order", measured)
    out.finish(report)
    return report


# {{{ noether


def _spec_for(name: str, p: dict, alpha: float) -> LagrangianSpec:
    if name == "harmonic":
        return harmonic_spec(alpha)
    if name == "free":
        return free_particle_spec(alpha)
    return lagrangian_for(_jerk_system(p))


def _closed_form(name: str, quantity: str, traj: Trajectory, p: dict) -> SampledFn:
    """The closed-form counterpart of ``att``/``tn`` used for cross-checks."""
    x, v = traj.x.values, traj.v.values
    if quantity == "tn":
        if name == "c21":
            return scale_invariant_c22(traj)
        return SampledFn(traj.grid, v)
    if name == "harmonic":
        return SampledFn(traj.grid, -0.5 * (v**2 + x**2))
    if name == "free":
        return SampledFn(traj.grid, -0.5 * v**2)
    if name == "c5":
        return -conserved_c13(traj, p["A"], _jerk_system(p).Gint)
    return -conserved_c17_c18_c19(traj, name, p["A"])


def _quantity(quantity: str, name: str, traj: Trajectory, p: dict, spec, cfg) -> SampledFn:
    if quantity == "c13":
        return conserved_c13(traj, p["A"], _jerk_system(p).Gint)
    if quantity in ("c17", "c18", "c19"):
        return conserved_c17_c18_c19(traj, name, p["A"])
    if quantity == "c22":
        return scale_invariant_c22(traj)
    if quantity == "att":
        return autonomous_bracket(spec, traj.x, qdot=traj.v)
    gen = SymmetryGenerator.scaling() if name == "c21" else SymmetryGenerator.space_translation()
    return invariant_no_time(spec, traj.x, gen, cfg, qdot=traj.v)


def _canonical_table(traj: Trajectory, A: float, Gint, rows: int = 11) -> list:
    cx = fracops.caputo_left(traj.x, 0.5).values
    cv = fracops.caputo_left(traj.v, 0.5).values
    H = hamiltonian_c5(traj, A, Gint).values
    idx = np.unique(np.linspace(0, traj.grid.n, rows).round().astype(int))
    return [
        {
            "t": float(traj.grid.t[j]),
            "q_1": float(traj.v.values[j]),
            "q_half": float(cx[j]),
            "q_3half": float(cv[j]),
            "p_1": float(A * traj.v.values[j]),
            "p_half": float(cx[j]),
            "p_3half": float(-cv[j]),
            "H": float(H[j]),
        }
        for j in idx
    ]


def cmd_noether(args) -> ReportDoc:
    th = thresholds(args)
    name, quantity = args.system, args.quantity
    if name not in QUANTITY_SYSTEMS[quantity]:
        allowed = ", ".join(QUANTITY_SYSTEMS[quantity])
        raise UsageError(f"quantity {quantity} is defined for {allowed}, not {name}")
    classical = name in CLASSICAL
    alpha = args.alpha if args.alpha is not None else (1.0 if classical else 0.5)
    if not classical and alpha != 0.5:
        raise UsageError(f"the {name} Lagrangian has fixed order 1/2, got --alpha {alpha}")
    fracops.check_derivative_order(alpha)
    burn_in = args.burnin if args.burnin is not None else (0.1 if quantity == "c22" else 0.05)
    cfg = SeriesConfig(R=args.R)
    out = Output(args.out)

    p = _system_params(args, name)
    if args.trajectory:
        traj = Trajectory.read_csv(args.trajectory)
        p.update(x0=None, v0=None, a0=None, t1=traj.grid.b, dt=traj.grid.h)
    else:
        traj = _simulate(p)
    p.update(quantity=quantity, alpha=alpha, R=args.R, burn_in=burn_in, trajectory=args.trajectory)
    report = ReportDoc("noether", parameters={**p, "window": args.window, "thresholds": th})
    spec = _spec_for(name, p, alpha)

    series = _quantity(quantity, name, traj, p, spec, cfg)
    series_path = out.write(report, "quantity.csv", series.to_csv)
    d = drift(series, burn_in)
    record = {
        "quantity": quantity,
        "alpha": alpha,
        "R": args.R,
        "burn_in": burn_in,
        "max_drift": d.max_drift,
        "rel_drift": d.rel_drift,
        "series_csv_path": series_path,
    }
    out.write(report, "drift.json", lambda path: path.write_text(json.dumps(_clean(record), sort_keys=True, indent=2) + "\n"))
    report.table("drift", [record])

    width = args.window if args.window is not None else 0.2 * (traj.grid.b - traj.grid.a)
    nodes = int(round(width / traj.grid.h))
    if 20 <= nodes <= traj.grid.n:
        sub = subwindow_drift(
            traj, lambda tr: _quantity(quantity, name, tr, p, _spec_for(name, p, alpha), cfg), nodes, max(1, nodes // 2), burn_in
        )
        report.table("subwindow_drift", sub)

    if classical and quantity == "att":
        report.verdict("classical_energy_rel_drift", d.rel_drift, th["classical_energy_rel_drift"])
    elif classical and quantity == "tn":
        report.verdict("momentum_rel_drift", d.rel_drift, th["momentum_rel_drift"])
    else:
        report.verdict("rel_drift", d.rel_drift)

    if quantity in ("att", "tn"):
        closed = _closed_form(name, quantity, traj, p)
        mismatch = _relative(series.values, closed.values)
        report.table("crosscheck", [{"against": "closed form", "max_rel_diff": mismatch}])
        report.verdict("closed_form_crosscheck", mismatch, th["crosscheck_rel"])

    if name == "c21":
        if args.trajectory:
            scaled = traj.scaled(2.0)
        else:
            scaled = _simulate(p, scale=2.0)
            if scaled.grid != traj.grid:
                scaled = traj.scaled(2.0)
        q2 = _quantity(quantity, name, scaled, p, spec, cfg).values
        diff = float(np.max(np.abs((q2 - series.values)[np.isfinite(series.values)]), initial=0.0))
        report.table("scale_invariance", [{"scale": 2.0, "max_abs_diff": diff}])
        report.verdict("scale_invariance", diff, th["scale_invariance_abs"])

    if quantity == "c13":
        report.table("canonical", _canonical_table(traj, p["A"], _jerk_system(p).Gint))
    out.finish(report)
    return report


# }}}


# {{{ verify

# the composed operator's short-window response to a linear function
LINEAR_LIMIT = (2.0 / math.pi) * (math.sqrt(2.0) - math.asinh(1.0))


def _violations(seq) -> int:
    """Number of steps where ``seq`` fails to strictly decrease."""
    return int(sum(1 for a, b in zip(seq, seq[1:]) if not b < a))


def _check_ibp(args, th, report):
    rows = []
    for k in (3, 2, 1, 0):
        g = Grid(0.0, 1.0, max(4, args.n // 2**k))
        x, y = g.sample(lambda t: t * (1 - t)), g.sample(lambda t: t)
        rows.append(
            {
                "n": g.n,
                "defect": fracops.ibp_defect(x, y, args.alpha),
                "mirror_defect": fracops.ibp_defect(x, y, args.alpha, mirror=True),
            }
        )
    report.table("ibp", rows)
    report.verdict("ibp_defect", rows[-1]["defect"], th["ibp"])
    report.verdict("ibp_monotone_violations", _violations([r["defect"] for r in rows]), 0.0)


def _check_gateaux(args, th, report):
    spec = lagrangian_for(JerkSystem(SystemId.C5, args.A if args.A is not None else 1.0, *constant_g(0.0)))
    rows = []
    for k in (2, 1, 0):
        g = Grid(0.0, 1.0, max(8, args.n // 2**k))
        q, eta = g.sample(lambda t: t * (1 - t)), g.sample(lambda t: np.sin(np.pi * t) ** 2)
        num, ana = gateaux_variation(spec, q, eta)
        rows.append({"n": g.n, "numeric": num, "analytic": ana, "rel_defect": abs(num - ana) / max(abs(num), 1e-300)})
    report.table("gateaux", rows)
    report.verdict("gateaux_rel_defect", rows[-1]["rel_defect"], th["gateaux_rel"])


def _check_limit(args, th, report):
    fn = BUILTINS[args.fn or "sin"]
    t0 = 1.0 if args.t0 is None else args.t0
    windows = args.windows or (0.4, 0.2, 0.1, 0.05)
    half = max(windows)
    g = Grid(t0 - half, t0 + half, 8192)
    res = midpoint_limit(g.sample(fn.x), args.alpha, windows, t0=t0, nodes=args.nodes)
    target = -float(fn.dx(np.array([t0]))[0])
    errs = [abs(v - target) for v in res.values]
    report.table(
        "windows",
        [{"window": w, "value": v, "abs_err": e} for w, v, e in zip(res.windows, res.values, errs)],
    )
    rel = abs(res.extrapolated - target) / max(abs(target), 1e-300)
    report.table(
        "limit",
        [
            {
                "extrapolated": res.extrapolated,
                "order": res.order,
                "target": target,
                "rel_err": rel,
                "linear_response": -LINEAR_LIMIT * target,
            }
        ],
    )
    report.verdict("limit_rel_err", rel, th["limit_rel"])
    report.verdict("limit_error_monotone_violations", _violations(errs[-3:]), 0.0)


def _check_offshell(args, th, report):
    g = Grid(0.0, 1.0, args.n)
    q = g.sample(lambda t: t * (1 - t))
    if args.alpha == 1.0:
        spec = free_particle_spec(1.0)
        key = "offshell_classical"
    else:
        spec = LagrangianSpec(
            L=lambda t, q, qd, u, v: 0.5 * u**2,
            d2L=zero,
            d3L=zero,
            d4L=lambda t, q, qd, u, v: u,
            alpha=args.alpha,
            f=lambda q: np.asarray(q, dtype=float),
            fprime=lambda q: np.ones_like(np.asarray(q, dtype=float)),
        )
        key = "offshell_fractional"
    R = 2 if args.R is None else args.R
    defect = offshell_defect(spec, q, SymmetryGenerator.space_translation(), SeriesConfig(R=R))
    report.table("offshell", [{"alpha": args.alpha, "n": args.n, "R": R, "defect": defect}])
    report.verdict("offshell_defect", defect, th[key])


def _check_transfer(args, th, report):
    g = Grid(0.0, 1.0, args.n)
    f = g.sample(lambda t: 1 + t - 2 * t**2 + t**3)
    h = g.sample(lambda t: 2 - t + t**3)
    R = 4 if args.R is None else args.R
    defect = transfer_defect(f, h, args.alpha, SeriesConfig(R=R))
    report.table("transfer", [{"alpha": args.alpha, "n": args.n, "R": R, "rel_defect": defect}])
    report.verdict("transfer_rel_defect", defect, th["transfer_rel"])


def _check_c8(args, th, report):
    name = args.fn or "linear"
    fn = BUILTINS[name]
    t0 = 0.3 if args.t0 is None else args.t0
    deltas = args.deltas or (0.1, 0.01, 0.001)
    g = Grid(t0, t0 + max(deltas), 8192)
    traj = Trajectory.from_functions(g, fn.x, fn.dx, fn.ddx)
    res = window_energy_approx(traj, t0, deltas)
    report.table(
        "c8",
        [{"delta": d, "ratio_c8": r, "ratio_c8b": rb} for d, r, rb in zip(res.deltas, res.ratios_c8, res.ratios_c8b)],
    )
    offsets = [abs(r - 1.0) for r in res.ratios_c8]
    if fn.poly is not None and len(fn.poly) <= 2:
        report.verdict("c8_max_abs_dev", max(offsets), th["c8_linear"])
    else:
        report.verdict("c8_final_abs_dev", offsets[-1], th["c8_smooth"])
        report.verdict("c8_monotone_violations", _violations(offsets), 0.0)


CHECKS = {
    "ibp": _check_ibp,
    "gateaux": _check_gateaux,
    "limit": _check_limit,
    "offshell": _check_offshell,
    "transfer": _check_transfer,
    "c8": _check_c8,
}


def cmd_verify(args) -> ReportDoc:
    th = thresholds(args)
    fracops.check_derivative_order(args.alpha)
    out = Output(args.out)
    params = {k: v for k, v in vars(args).items() if k not in ("handler", "threshold", "out")}
    report = ReportDoc("verify", parameters={**params, "thresholds": th})
    CHECKS[args.check](args, th, report)
    out.finish(report)
    return report


# }}}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (report.json and CSV artifacts)")
    p.add_argument(
        "--threshold",
        action="append",
        metavar="NAME=VALUE",
        help="override a verdict threshold (repeatable)",
    )


def _add_simulation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--A", type=float, help="system parameter A")
    p.add_argument("--B", type=float, default=1.0, help="G(x) = x^2 - B for c5 (default 1)")
    p.add_argument("--const-g", type=float, help="use a constant G for c5 instead")
    p.add_argument("--x0", type=float)
    p.add_argument("--v0", type=float)
    p.add_argument("--a0", type=float)
    p.add_argument("--t1", type=float, help="end time (start is 0)")
    p.add_argument("--dt", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracnoether", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fracop", help="apply a fractional operator to a sampled function")
    p.add_argument("--op", required=True, choices=sorted(OPS))
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--grid", type=parse_grid, default=Grid(0.0, 1.0, 1024), help="a,b,n")
    p.add_argument("--input", help="CSV with header t,value")
    p.add_argument("--fn", choices=sorted(BUILTINS))
    p.add_argument("--refine", type=int, default=0, help="also run at 2n, ..., 2^k n")
    _add_common(p)
    p.set_defaults(handler=cmd_fracop)

    p = sub.add_parser("simulate", help="integrate a jerk system")
    p.add_argument("--system", required=True, choices=[s.value for s in SystemId])
    _add_simulation(p)
    p.add_argument("--order-dt", type=float, default=0.1, help="coarsest step of the order study")
    p.add_argument("--order-t1", type=float, default=2.0, help="horizon of the order study")
    _add_common(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("noether", help="evaluate a conserved quantity along a trajectory")
    p.add_argument("--system", required=True, choices=[s.value for s in SystemId] + list(CLASSICAL))
    p.add_argument("--quantity", required=True, choices=sorted(QUANTITY_SYSTEMS))
    p.add_argument("--trajectory", help="CSV with header t,x,v,acc (otherwise simulate)")
    _add_simulation(p)
    p.add_argument("--alpha", type=float, help="order for the classical systems (default 1)")
    p.add_argument("--R", type=int, default=2, help="transfer series truncation")
    p.add_argument("--burnin", type=float, help="fraction trimmed at each end")
    p.add_argument("--window", type=float, help="sub-window width for sliding drift")
    _add_common(p)
    p.set_defaults(handler=cmd_noether)

    p = sub.add_parser("verify", help="run one numerical identity check")
    p.add_argument("--check", required=True, choices=sorted(CHECKS))
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--fn", choices=sorted(BUILTINS))
    p.add_argument("--t0", type=float)
    p.add_argument("--A", type=float)
    p.add_argument("--R", type=int)
    p.add_argument("--windows", type=parse_floats)
    p.add_argument("--deltas", type=parse_floats)
    p.add_argument("--nodes", type=int, default=256, help="nodes per window for --check limit")
    _add_common(p)
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.handler(args)
    except NumericalError as exc:
        print(f"fracnoether: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"fracnoether: error: {exc}", file=sys.stderr)
        return 2
    for v in report.verdicts:
        mark = "info" if not v.thresholded else ("PASS" if v.passed else "FAIL")
        print(f"[{mark}] {v.check}: {v.measured}", file=sys.stderr)
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
