"""``isac-lab``: reproducible experiment runner.

Every experiment kind turns a scenario config plus sweep axes into one CSV
table.  The file starts with ``#`` metadata lines (tool and library
versions, PRNG, seed, tolerances, scenario, sweeps), followed by a header
row whose names carry units in brackets, e.g. ``gamma_c_db [dB]``.  SNRs,
SINRs and powers are emitted both linearly and in dB.

Usage::

    isac-lab <kind> [--scenario cfg.json] --out result.csv [--trials N] [--seed S]
             [--sweep name=start:stop:points[:scale]] [--param name=value[,value...]]
    isac-lab compare a.csv b.csv ... --value min_pd --out merged.csv

``scale`` is ``lin`` (default), ``log`` (geometric) or ``dB`` (start/stop in
dB, values used in linear units).  Exit status: 0 on success, 2 when some
sweep points hit solver failures (recorded in the ``status`` column), 1 on
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy
from scipy import optimize

from . import __version__, beamforming as bf
from .analysis import (OperatingPoint, pd_approx_full, pd_approx_simple, pd_exact, pd_gaussian_only,
                       pd_min_safe, min_l_for_pd, threshold_for_pfa)
from .detection import DetectorContext, mc_detect
from .scenario import PRNG_NAME, ConfigError, default_config, draw_comm_channel, dump_config, load_config
from .specfun import ConvergenceError
from .units import db_to_lin, lin_to_db, rate_to_sinr, watts_to_dbm

__all__ = [
    "CompareError",
    "ExperimentSpec",
    "KINDS",
    "ResultTable",
    "Sweep",
    "compare_report",
    "main",
    "read_table",
    "run",
]

DEFAULT_RATES = (0.0, 14.0, 15)  # bits/s/Hz
PD_CONFIDENCE = 0.9973  # two-sided, about 3 standard errors
TIE_TOL = 1e-9

# parameter name -> (unit of the linear value, has a dB twin column, integer)
_PARAMS = {
    "gamma_c": ("lin", True, False),
    "gamma_s": ("lin", True, False),
    "gamma_sum": ("lin", True, False),
    "ratio": ("lin", False, False),
    "l": ("symbols", False, True),
    "pfa": ("prob", False, False),
    "rate": ("bit/s/Hz", False, False),
}


# ---------------------------------------------------------------------------
# experiment specs and sweep parsing

@dataclass(frozen=True)
class Sweep:
    """One sweep axis ``name=start:stop:points[:scale]``."""

    name: str
    start: float
    stop: float
    points: int
    scale: str = "lin"

    def __post_init__(self):
        if self.name not in _PARAMS:
            raise ConfigError(f"--sweep {self.name}: unknown parameter (known: {', '.join(_PARAMS)})")
        if self.points < 2:
            raise ConfigError(f"--sweep {self.name}: needs at least 2 points, got {self.points}")
        if self.scale not in ("lin", "log", "dB"):
            raise ConfigError(f"--sweep {self.name}: scale must be lin, log or dB, got {self.scale!r}")
        if self.scale == "dB" and not _PARAMS[self.name][1]:
            raise ConfigError(f"--sweep {self.name}: dB scale only applies to SNR parameters")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError(f"--sweep {self.name}: log scale needs positive start and stop")

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        try:
            name, rng = text.split("=", 1)
            parts = rng.split(":")
            if len(parts) not in (3, 4):
                raise ValueError
            start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"--sweep {text!r}: expected name=start:stop:points[:scale]") from None
        return cls(name.strip(), start, stop, points, parts[3] if len(parts) == 4 else "lin")

    def values(self) -> np.ndarray:
        """Sweep points in linear units (integers for ``l``)."""
        if self.scale == "lin":
            v = np.linspace(self.start, self.stop, self.points)
        elif self.scale == "log":
            v = np.geomspace(self.start, self.stop, self.points)
        else:
            v = db_to_lin(np.linspace(self.start, self.stop, self.points))
        if _PARAMS[self.name][2]:
            v = np.unique(np.maximum(1, np.rint(v)).astype(int))
        return v

    def __str__(self):
        return f"{self.name}={self.start!r}:{self.stop!r}:{self.points}:{self.scale}"


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one table."""

    kind: str
    scenario: Optional[str] = None
    out: Optional[str] = None
    trials: int = 2000
    seed: int = 0
    sweeps: tuple = ()
    params: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1000:
            raise ConfigError(f"--trials: Monte-Carlo needs at least 1000 trials, got {self.trials}")
        if self.workers < 1:
            raise ConfigError("--workers: must be >= 1")
        names = [s.name for s in self.sweeps]
        if len(set(names)) != len(names):
            raise ConfigError("--sweep: each parameter may be swept once")


def _parse_param(text: str):
    if "=" not in text:
        raise ConfigError(f"--param {text!r}: expected name=value[,value...]")
    name, value = text.split("=", 1)
    try:
        vals = [float(v) for v in value.split(",")]
    except ValueError:
        vals = [value.strip()]
    return name.strip(), vals


class _Params:
    """Typed access to ``--param`` values with per-kind defaults."""

    def __init__(self, raw: dict, allowed: dict):
        unknown = set(raw) - set(allowed)
        if unknown:
            raise ConfigError(f"--param: unknown for this kind: {', '.join(sorted(unknown))} "
                              f"(allowed: {', '.join(sorted(allowed)) or 'none'})")
        self.values = {k: list(raw.get(k, v)) for k, v in allowed.items()}

    def list(self, name, cast=float):
        try:
            return [cast(v) for v in self.values[name]]
        except (TypeError, ValueError):
            raise ConfigError(f"--param {name}: bad value {self.values[name]!r}") from None

    def one(self, name, cast=float):
        vals = self.list(name, cast)
        if len(vals) != 1:
            raise ConfigError(f"--param {name}: expected a single value")
        return vals[0]


# ---------------------------------------------------------------------------
# result tables

@dataclass
class ResultTable:
    """A CSV-ready table: named columns with units, rows, and metadata lines."""

    kind: str
    columns: list
    rows: list = field(default_factory=list)
    axes: list = field(default_factory=list)
    meta: list = field(default_factory=list)
    failures: int = 0
    value: Optional[str] = None

    @property
    def names(self) -> list:
        return [c for c, _ in self.columns]

    def column(self, name) -> list:
        i = self.names.index(name)
        return [r[i] for r in self.rows]

    def add(self, **row):
        missing = set(row) - set(self.names)
        if missing:
            raise KeyError(f"unknown column(s) {sorted(missing)}")
        self.rows.append([row.get(c, None) for c in self.names])

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.meta:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{c} [{u}]" for c, u in self.columns])
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if np.isnan(v) else repr(v)
    return str(v)


def read_table(path) -> ResultTable:
    """Load a table written by :meth:`ResultTable.to_csv` (numbers parsed back to float)."""
    meta, body = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        (meta if line.startswith("#") else body).append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ConfigError(f"{path}: no header row")
    columns = []
    for h in rows[0]:
        name, _, unit = h.partition(" [")
        columns.append((name, unit.rstrip("]")))
    kind, axes = "", []
    for m in meta:
        key, _, val = m[1:].strip().partition(": ")
        if key == "kind":
            kind = val
        elif key == "axes":
            axes = [a for a in val.split(",") if a]

    def parse(c):
        if c == "":
            return None
        try:
            return float(c)
        except ValueError:
            return c

    return ResultTable(kind, columns, [[parse(c) for c in r] for r in rows[1:]], axes,
                       [m[1:].strip() for m in meta])


class CompareError(ValueError):
    """Tables passed to :func:`compare_report` do not share sweep axes."""


def compare_report(runs, names=None, value=None, tol: float = TIE_TOL) -> ResultTable:
    """Merge per-scheme tables into one row per sweep point.

    Parameters
    ----------
    runs : list of ResultTable
        Tables with identical axis columns and axis values.
    names : list of str, optional
        Scheme names (default: each table's ``kind``).
    value : str, optional
        Column to compare (default: each table's ``value``).
    tol : float
        Differences within ``tol`` count as ties.  When a table has
        ``<value>_ci_low`` / ``<value>_ci_high`` columns its confidence
        interval widens the tie band.

    Returns
    -------
    ResultTable
        Axis columns, one column per scheme, and for every pair ``(a, b)``
        a signed difference ``diff_a_b`` and a dominance flag ``dom_a_b``
        (1: a higher, 0: tie, -1: b higher).
    """
    runs = list(runs)
    if not runs:
        raise CompareError("nothing to compare")
    names = list(names) if names is not None else [t.kind for t in runs]
    if len(set(names)) != len(names):
        raise CompareError("scheme names must be distinct")
    axes = runs[0].axes
    for t in runs[1:]:
        if t.axes != axes:
            raise CompareError(f"axis columns differ: {axes} vs {t.axes}")
        for a in axes:
            if t.column(a) != runs[0].column(a):
                raise CompareError(f"axis {a!r} values differ between tables")
    cols = [c for c in runs[0].columns if c[0] in axes]
    vals, bands = [], []
    for name, t in zip(names, runs):
        v = value or t.value
        if v is None or v not in t.names:
            raise CompareError(f"table {name!r} has no column {v!r}")
        unit = dict(t.columns)[v]
        cols.append((name, unit))
        x = np.array([np.nan if c is None else float(c) for c in t.column(v)])
        lo = t.column(f"{v}_ci_low") if f"{v}_ci_low" in t.names else None
        hi = t.column(f"{v}_ci_high") if f"{v}_ci_high" in t.names else None
        vals.append(x)
        bands.append((np.array([np.nan if c is None else float(c) for c in lo]) if lo else x,
                      np.array([np.nan if c is None else float(c) for c in hi]) if hi else x))
        if f"{v}_ci_low" in t.names:
            cols += [(f"{name}_ci_low", unit), (f"{name}_ci_high", unit)]
    pairs = list(itertools.combinations(range(len(runs)), 2))
    for i, j in pairs:
        cols += [(f"diff_{names[i]}_{names[j]}", "-"), (f"dom_{names[i]}_{names[j]}", "-")]
    out = ResultTable("compare", cols, axes=list(axes), value=None,
                      meta=[f"kind: compare", f"schemes: {','.join(names)}", f"tie_tol: {tol!r}",
                            f"axes: {','.join(axes)}"])
    for r in range(len(runs[0].rows)):
        row = {a: runs[0].column(a)[r] for a in axes}
        for k, name in enumerate(names):
            row[name] = _nan_none(vals[k][r])
            if f"{name}_ci_low" in out.names:
                row[f"{name}_ci_low"] = _nan_none(bands[k][0][r])
                row[f"{name}_ci_high"] = _nan_none(bands[k][1][r])
        for i, j in pairs:
            a, b = vals[i][r], vals[j][r]
            if np.isnan(a) or np.isnan(b):
                row[f"diff_{names[i]}_{names[j]}"] = None
                row[f"dom_{names[i]}_{names[j]}"] = None
                continue
            row[f"diff_{names[i]}_{names[j]}"] = float(a - b)
            # a beats b only if a's lower end clears b's upper end
            if bands[i][0][r] > bands[j][1][r] + tol:
                dom = 1
            elif bands[j][0][r] > bands[i][1][r] + tol:
                dom = -1
            else:
                dom = 0
            row[f"dom_{names[i]}_{names[j]}"] = dom
        out.add(**row)
    return out


def _nan_none(x):
    return None if x is None or np.isnan(x) else float(x)


# ---------------------------------------------------------------------------
# experiment kinds

@dataclass(frozen=True)
class _Kind:
    func: Callable
    sweeps: tuple
    params: dict
    doc: str


KINDS: dict = {}


def _kind(name, sweeps, params, doc):
    def deco(fn):
        KINDS[name] = _Kind(fn, tuple(Sweep.parse(s) for s in sweeps), params, doc)
        return fn
    return deco


def _snr_cols(name):
    return [(name, "lin"), (f"{name}_db", "dB")]


def _snr_vals(name, v):
    return {name: float(v), f"{name}_db": float(lin_to_db(v)) if v > 0 else float("-inf")}


def _pmap(spec, fn, items):
    """Evaluate ``fn`` over ``items`` (possibly concurrently), results in input order."""
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _crossing_db(f, target, lo=-60.0, hi=40.0):
    """dB value where the non-decreasing ``f(db)`` first reaches ``target``."""
    if f(hi) < target:
        return float("nan")
    return float(optimize.brentq(lambda x: f(x) - target, lo, hi, xtol=1e-10))


@_kind("pd-surface", ["gamma_c=-30:10:41:dB", "gamma_s=-30:10:41:dB"],
       {"l": [], "pfa": [], "mode": ["grid"], "gamma_sum_db": [-20.0, -10.0, 0.0]},
       "P_D of the joint detector over (gamma_c, gamma_s), or over gamma_c/gamma_sum with mode=ratio")
def _pd_surface(cfg, spec, sw, par):
    L = int(par.one("l")) if par.values["l"] else cfg.l_symbols
    pfa = par.one("pfa") if par.values["pfa"] else cfg.pfa
    mode = par.one("mode", str)
    cols = (_snr_cols("gamma_c") + _snr_cols("gamma_s")
            + [("l_symbols", "symbols"), ("pfa", "prob"), ("pd_exact", "prob")])
    if mode == "ratio":
        ratios = sw.get("ratio", np.linspace(0.0, 1.0, 21))
        t = ResultTable("pd-surface", _snr_cols("gamma_sum") + [("ratio", "lin")] + cols,
                        axes=["gamma_sum", "ratio"], value="pd_exact")
        items = [(g, r) for g in db_to_lin(par.list("gamma_sum_db")) for r in ratios]
        pds = _pmap(spec, lambda it: pd_min_safe(it[0] * it[1], it[0] * (1 - it[1]), L, pfa), items)
        for (g, r), pd in zip(items, pds):
            t.add(**_snr_vals("gamma_sum", g), ratio=float(r), **_snr_vals("gamma_c", g * r),
                  **_snr_vals("gamma_s", g * (1 - r)), l_symbols=L, pfa=pfa, pd_exact=pd)
        return t
    if mode != "grid":
        raise ConfigError(f"--param mode: expected grid or ratio, got {mode!r}")
    t = ResultTable("pd-surface", cols, axes=["gamma_c", "gamma_s"], value="pd_exact")
    items = list(itertools.product(sw["gamma_c"], sw["gamma_s"]))
    pds = _pmap(spec, lambda it: pd_min_safe(it[0], it[1], L, pfa), items)
    for (gc, gs), pd in zip(items, pds):
        t.add(**_snr_vals("gamma_c", gc), **_snr_vals("gamma_s", gs), l_symbols=L, pfa=pfa, pd_exact=pd)
    return t


@_kind("pd-vs-snr", ["gamma_c=-20:5:101:dB"], {"pfa": [1e-1, 1e-2, 1e-3, 1e-4], "l": [], "target": [0.99]},
       "Gaussian-only P_D versus gamma_c for several false-alarm probabilities")
def _pd_vs_snr(cfg, spec, sw, par):
    L = int(par.one("l")) if par.values["l"] else cfg.l_symbols
    target = par.one("target")
    t = ResultTable("pd-vs-snr", [("pfa", "prob")] + _snr_cols("gamma_c")
                    + [("l_symbols", "symbols"), ("pd", "prob")], axes=["pfa", "gamma_c"], value="pd")
    for pfa in par.list("pfa"):
        pds = _pmap(spec, lambda g: pd_gaussian_only(g, L, pfa), sw["gamma_c"])
        for g, pd in zip(sw["gamma_c"], pds):
            t.add(pfa=pfa, **_snr_vals("gamma_c", g), l_symbols=L, pd=pd)
        x = _crossing_db(lambda d: pd_gaussian_only(float(db_to_lin(d)), L, pfa), target)
        t.meta.append(f"crossing pd>={target!r} at pfa={pfa!r}: gamma_c_db={x:.4f}")
    return t


@_kind("pd-vs-L", ["l=1:10000:61:log"], {"gamma_c_db": [5.0, 0.0, -5.0, -10.0], "pfa": [], "target": [0.99]},
       "Gaussian-only P_D versus sensing duration for several gamma_c")
def _pd_vs_l(cfg, spec, sw, par):
    pfa = par.one("pfa") if par.values["pfa"] else cfg.pfa
    target = par.one("target")
    t = ResultTable("pd-vs-L", _snr_cols("gamma_c") + [("l_symbols", "symbols"), ("pfa", "prob"), ("pd", "prob")],
                    axes=["gamma_c", "l_symbols"], value="pd")
    for gdb in par.list("gamma_c_db"):
        g = float(db_to_lin(gdb))
        pds = _pmap(spec, lambda L: pd_gaussian_only(g, int(L), pfa), sw["l"])
        for L, pd in zip(sw["l"], pds):
            t.add(**_snr_vals("gamma_c", g), l_symbols=int(L), pfa=pfa, pd=pd)
        t.meta.append(f"min L for pd>={target!r} at gamma_c_db={gdb!r}: {min_l_for_pd(g, pfa, target)}")
    return t


@_kind("pfa-tradeoff", ["pfa=1e-6:0.5:41:log"], {"l": [128.0, 256.0, 512.0, 1024.0], "gamma_c_db": [-5.0],
                                                  "gamma_s_db": []},
       "P_D versus the false-alarm constraint for several sensing durations")
def _pfa_tradeoff(cfg, spec, sw, par):
    g = float(db_to_lin(par.one("gamma_c_db")))
    gs = float(db_to_lin(par.one("gamma_s_db"))) if par.values["gamma_s_db"] else 0.0
    t = ResultTable("pfa-tradeoff", [("l_symbols", "symbols"), ("pfa", "prob")] + _snr_cols("gamma_c")
                    + _snr_cols("gamma_s") + [("pd", "prob")], axes=["l_symbols", "pfa"], value="pd")
    for L in par.list("l", lambda v: int(float(v))):
        pds = _pmap(spec, lambda p: pd_min_safe(g, gs, L, p), sw["pfa"])
        for p, pd in zip(sw["pfa"], pds):
            t.add(l_symbols=L, pfa=p, **_snr_vals("gamma_c", g), **_snr_vals("gamma_s", gs), pd=pd)
    return t


@_kind("qq-approx", ["gamma_c=-40:10:26:dB", "gamma_s=-40:10:26:dB"], {"l": [10.0, 50.0, 100.0, 1000.0], "pfa": []},
       "Large-L approximation against the exact P_D, pointwise and as sorted quantiles")
def _qq_approx(cfg, spec, sw, par):
    pfa = par.one("pfa") if par.values["pfa"] else cfg.pfa
    t = ResultTable("qq-approx", [("l_symbols", "symbols")] + _snr_cols("gamma_c") + _snr_cols("gamma_s")
                    + [("pd_exact", "prob"), ("pd_approx_full", "prob"), ("pd_approx_simple", "prob"),
                       ("abs_err_full", "prob"), ("q_exact", "prob"), ("q_approx_full", "prob")],
                    axes=["l_symbols", "gamma_c", "gamma_s"], value="pd_approx_full")
    for L in par.list("l", lambda v: int(float(v))):
        items = list(itertools.product(sw["gamma_c"], sw["gamma_s"]))

        def ev(it):
            op = OperatingPoint(float(it[0]), float(it[1]), L, pfa)
            return pd_exact(op), pd_approx_full(op), pd_approx_simple(op)

        res = np.array(_pmap(spec, ev, items))
        qe, qa = np.sort(res[:, 0]), np.sort(res[:, 1])
        for k, ((gc, gs), (e, a, s)) in enumerate(zip(items, res)):
            t.add(l_symbols=L, **_snr_vals("gamma_c", gc), **_snr_vals("gamma_s", gs), pd_exact=e,
                  pd_approx_full=a, pd_approx_simple=s, abs_err_full=abs(a - e), q_exact=qe[k], q_approx_full=qa[k])
        t.meta.append(f"L={L}: max |approx-exact| pointwise={np.max(np.abs(res[:, 1] - res[:, 0])):.6f} "
                      f"quantile={np.max(np.abs(qa - qe)):.6f}")
    return t


# -- beamforming sweeps over the rate threshold

def _rate_rows(cfg, spec, sw, evaluate, cols, value, kind):
    """Run ``evaluate(rate) -> dict`` for each rate, recording failures per row."""
    h = draw_comm_channel(cfg).h
    rates = sw.get("rate", np.linspace(*DEFAULT_RATES[:2], DEFAULT_RATES[2]))
    t = ResultTable(kind, [("rate", "bit/s/Hz")] + _snr_cols("gamma0") + [("status", "-")] + cols,
                    axes=["rate"], value=value)

    def one(r):
        try:
            return "ok", evaluate(h, float(r))
        except bf.InfeasibleSinrError:
            return "infeasible", {}
        except (bf.BeamformingError, ConvergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
            return f"solver-failure: {type(exc).__name__}", {}

    for r, (status, vals) in zip(rates, _pmap(spec, one, rates)):
        g0 = float(rate_to_sinr(r))
        row = {"rate": float(r), "gamma0": g0, "gamma0_db": float(lin_to_db(g0)) if g0 > 0 else float("-inf"),
               "status": status}
        row.update(vals)
        t.add(**row)
        t.failures += status.startswith("solver-failure")
    t.meta.append(f"max comm snr: {bf.max_comm_snr(cfg, h)!r}")
    return t


def _min_approx(cfg, sol, L=None):
    L = cfg.l_symbols if L is None else L
    return min(pd_approx_simple(OperatingPoint(gc, gs, L, cfg.pfa)) for gc, gs, _ in sol.per_q)


_RATE = ["rate=0:14:15"]


@_kind("tradeoff-curve", _RATE, {},
       "Minimum exact and approximate P_D of the proposed design versus the rate threshold")
def _tradeoff_curve(cfg, spec, sw, par):
    def ev(h, r):
        s = bf.solve_p2(cfg, h, gamma0=float(rate_to_sinr(r)))
        return {"min_pd_exact": s.min_pd(cfg), "min_pd_approx": _min_approx(cfg, s),
                "objective": s.objective, "iterations": s.iterations}

    return _rate_rows(cfg, spec, sw, ev, [("min_pd_exact", "prob"), ("min_pd_approx", "prob"),
                                          ("objective", "lin"), ("iterations", "-")],
                      "min_pd_exact", "tradeoff-curve")


@_kind("power-allocation", _RATE, {},
       "Power split between the information beam and the deterministic covariance versus the rate threshold")
def _power_allocation(cfg, spec, sw, par):
    def ev(h, r):
        s = bf.solve_p2(cfg, h, gamma0=float(rate_to_sinr(r)))
        pw, pr = s.power_w, s.power_r0
        return {"power_w": pw, "power_w_dbm": float(watts_to_dbm(pw)) if pw > 0 else float("-inf"),
                "power_r0": pr, "power_r0_dbm": float(watts_to_dbm(pr)) if pr > 0 else float("-inf"),
                "power_total": pw + pr, "achieved_sinr": s.achieved_sinr,
                "achieved_sinr_db": float(lin_to_db(s.achieved_sinr)), "min_pd_exact": s.min_pd(cfg)}

    return _rate_rows(cfg, spec, sw, ev,
                      [("power_w", "W"), ("power_w_dbm", "dBm"), ("power_r0", "W"), ("power_r0_dbm", "dBm"),
                       ("power_total", "W"), ("achieved_sinr", "lin"), ("achieved_sinr_db", "dB"),
                       ("min_pd_exact", "prob")], "power_w", "power-allocation")


def _scheme_tables(cfg, spec, sw, schemes, kind):
    tables = []
    for name, ev, extra in schemes:
        t = _rate_rows(cfg, spec, sw, ev, [("min_pd", "prob")] + extra, "min_pd", name)
        tables.append(t)
    merged = compare_report(tables, names=[s[0] for s in schemes], value="min_pd")
    merged.kind = kind
    # carry per-scheme status so failed points stay visible
    for t, (name, _, _) in zip(tables, schemes):
        merged.columns.append((f"{name}_status", "-"))
        for row, st in zip(merged.rows, t.column("status")):
            row.append(st)
    merged.failures = sum(t.failures for t in tables)
    merged.meta = [m for m in merged.meta if not m.startswith("kind:")] + tables[0].meta[-1:]
    merged.value = None
    return merged


@_kind("detector-compare", _RATE, {"confidence": [PD_CONFIDENCE]},
       "Proposed joint design vs Gaussian-only design vs deterministic-only matched filter (Monte-Carlo)")
def _detector_compare(cfg, spec, sw, par):
    conf = par.one("confidence")

    def proposed(h, r):
        return {"min_pd": bf.solve_p2(cfg, h, gamma0=float(rate_to_sinr(r))).min_pd(cfg)}

    def gaussian(h, r):
        s = bf.solve_p3(cfg, h, gamma0=float(rate_to_sinr(r)))
        return {"min_pd": min(pd_gaussian_only(gc, cfg.l_symbols, cfg.pfa) for gc in s.gamma_c)}

    def det_only(h, r):
        s = bf.benchmark_deterministic_only(cfg, h, gamma0=float(rate_to_sinr(r)))
        seed = spec.seed + int(round(r * 1000))
        pd, ci, _ = bf.benchmark_mc_pd(cfg, s, trials=spec.trials, seed=seed, confidence=conf)
        return {"min_pd": pd, "min_pd_ci_low": ci[0], "min_pd_ci_high": ci[1]}

    schemes = [("proposed", proposed, []), ("gaussian_only", gaussian, []),
               ("deterministic_only", det_only, [("min_pd_ci_low", "prob"), ("min_pd_ci_high", "prob")])]
    t = _scheme_tables(cfg, spec, sw, schemes, "detector-compare")
    t.meta.append(f"deterministic_only: matched filter, {spec.trials} trials per grid point, "
                  f"Wilson confidence {conf!r}")
    return t


@_kind("bf-compare", _RATE, {},
       "Proposed design vs time switching vs beampattern-gain maximization, all scored with the exact P_D")
def _bf_compare(cfg, spec, sw, par):
    def proposed(h, r):
        return {"min_pd": bf.solve_p2(cfg, h, gamma0=float(rate_to_sinr(r))).min_pd(cfg)}

    def switching(h, r):
        ls, lc, s = bf.benchmark_time_switching(cfg, h, rate_req=r)
        return {"min_pd": s.min_pd(cfg), "l_sense": ls}

    def beampattern(h, r):
        return {"min_pd": bf.benchmark_beampattern_gain(cfg, h, gamma0=float(rate_to_sinr(r))).min_pd(cfg)}

    schemes = [("proposed", proposed, []), ("time_switching", switching, [("l_sense", "symbols")]),
               ("beampattern_gain", beampattern, [])]
    return _scheme_tables(cfg, spec, sw, schemes, "bf-compare")


@_kind("mc-validate", ["gamma_c=-20:0:3:dB", "gamma_s=-20:0:3:dB"],
       {"l": [64.0, 256.0], "pfa": [1e-1, 1e-2, 1e-3], "confidence": [PD_CONFIDENCE]},
       "Closed-form P_FA/P_D against Monte-Carlo rates of the joint NP detector")
def _mc_validate(cfg, spec, sw, par):
    conf = par.one("confidence")
    t = ResultTable("mc-validate", _snr_cols("gamma_c") + _snr_cols("gamma_s")
                    + [("l_symbols", "symbols"), ("pfa", "prob"), ("threshold", "lin"), ("pd_exact", "prob"),
                       ("pd_hat", "prob"), ("pd_ci_low", "prob"), ("pd_ci_high", "prob"), ("pd_z", "se"),
                       ("pfa_hat", "prob"), ("pfa_ci_low", "prob"), ("pfa_ci_high", "prob"), ("pfa_z", "se"),
                       ("pd_in_ci", "bool"), ("pfa_in_ci", "bool")],
                    axes=["gamma_c", "gamma_s", "l_symbols", "pfa"], value="pd_exact")
    items = list(itertools.product(sw["gamma_c"], sw["gamma_s"], par.list("l", lambda v: int(float(v))),
                                   par.list("pfa")))

    def ev(args):
        k, (gc, gs, L, pfa) = args
        ctx = DetectorContext.for_snrs(float(gc), float(gs), L, pfa, seed=spec.seed)
        res = mc_detect(ctx, trials=spec.trials, seed=spec.seed * 100003 + k, detector="np", confidence=conf)
        return ctx, res

    inside = 0
    for (gc, gs, L, pfa), (ctx, res) in zip(items, _pmap(spec, ev, list(enumerate(items)))):
        op = ctx.operating_point
        pd = pd_exact(op)
        pd_in = res.pd_ci[0] <= pd <= res.pd_ci[1]
        pfa_in = res.pfa_ci[0] <= pfa <= res.pfa_ci[1]
        inside += pd_in and pfa_in
        t.add(**_snr_vals("gamma_c", op.gamma_c), **_snr_vals("gamma_s", op.gamma_s), l_symbols=L, pfa=pfa,
              threshold=ctx.threshold, pd_exact=pd, pd_hat=res.pd_hat, pd_ci_low=res.pd_ci[0],
              pd_ci_high=res.pd_ci[1], pd_z=(res.pd_hat - pd) / res.pd_se, pfa_hat=res.pfa_hat,
              pfa_ci_low=res.pfa_ci[0], pfa_ci_high=res.pfa_ci[1], pfa_z=(res.pfa_hat - pfa) / res.pfa_se,
              pd_in_ci=pd_in, pfa_in_ci=pfa_in)
    t.meta.append(f"points inside Wilson {conf!r} interval: {inside}/{len(items)}")
    return t


# ---------------------------------------------------------------------------
# driver

def _metadata(spec, cfg, sweeps, params):
    return [
        f"isac-lab {__version__}",
        f"kind: {spec.kind}",
        f"numpy: {np.__version__}; scipy: {scipy.__version__}",
        f"prng: {PRNG_NAME}",
        f"seed: {spec.seed}; trials: {spec.trials}",
        f"tolerances: sdp={bf.SDP_TOL!r} feasibility={bf.FEAS_TOL!r} rank={bf.RANK_TOL!r} tie={TIE_TOL!r}",
        f"scenario: {json.dumps(json.loads(dump_config(cfg)), sort_keys=True, separators=(',', ':'))}",
        f"sweeps: {' '.join(str(s) for s in sweeps)}",
        f"params: {json.dumps(params, sort_keys=True)}",
    ]


def run(spec: ExperimentSpec) -> ResultTable:
    """Execute one experiment; the returned table is ready for :meth:`ResultTable.to_csv`."""
    kind = KINDS[spec.kind]
    cfg = load_config(spec.scenario) if spec.scenario else default_config()
    sweeps = {s.name: s for s in kind.sweeps}
    for s in spec.sweeps:
        if s.name not in sweeps and not (spec.kind == "pd-surface" and s.name == "ratio"):
            raise ConfigError(f"--sweep {s.name}: not an axis of {spec.kind} "
                              f"(axes: {', '.join(sweeps) or 'none'})")
        sweeps[s.name] = s
    par = _Params(spec.params, kind.params)
    table = kind.func(cfg, spec, {n: s.values() for n, s in sweeps.items()}, par)
    table.meta = _metadata(spec, cfg, sweeps.values(), par.values) + [f"axes: {','.join(table.axes)}"] + table.meta
    return table


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="isac-lab", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog="kinds:\n" + "\n".join(f"  {k:<17} {v.doc}" for k, v in KINDS.items())
                                 + "\n  compare           merge tables written by earlier runs")
    ap.add_argument("kind", choices=list(KINDS) + ["compare"])
    ap.add_argument("inputs", nargs="*", help="tables to merge (compare only)")
    ap.add_argument("--scenario", help="scenario JSON (default: built-in reference scenario)")
    ap.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    ap.add_argument("--trials", type=int, default=2000, help="Monte-Carlo trials per point")
    ap.add_argument("--seed", type=int, default=0, help="Monte-Carlo seed")
    ap.add_argument("--sweep", action="append", default=[], metavar="NAME=START:STOP:POINTS[:SCALE]")
    ap.add_argument("--param", action="append", default=[], metavar="NAME=V[,V...]")
    ap.add_argument("--workers", type=int, default=1, help="threads for sweep points")
    ap.add_argument("--value", help="column to compare (compare only)")
    args = ap.parse_args(argv)
    try:
        if args.kind == "compare":
            if len(args.inputs) < 2:
                raise ConfigError("compare: give at least two tables")
            tables = [read_table(p) for p in args.inputs]
            table = compare_report(tables, names=[Path(p).stem for p in args.inputs], value=args.value)
        else:
            if args.inputs:
                raise ConfigError(f"unexpected positional arguments: {' '.join(args.inputs)}")
            spec = ExperimentSpec(args.kind, args.scenario, args.out, args.trials, args.seed,
                                  tuple(Sweep.parse(s) for s in args.sweep),
                                  dict(_parse_param(p) for p in args.param), args.workers)
            table = run(spec)
        _write(table.to_csv(), args.out)
    except (ConfigError, CompareError, OSError) as exc:
        print(f"isac-lab: config error: {exc}", file=sys.stderr)
        return 1
    if table.failures:
        print(f"isac-lab: {table.failures} sweep point(s) failed; see the status column", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
