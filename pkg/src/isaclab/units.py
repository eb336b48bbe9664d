"""dB/linear conversions and unit-suffixed quantity parsing."""

from __future__ import annotations

import re

import numpy as np

__all__ = [
    "db_to_lin",
    "lin_to_db",
    "dbm_to_watts",
    "watts_to_dbm",
    "parse_quantity",
    "rate_to_sinr",
    "sinr_to_rate",
]


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(x_dbm):
    return db_to_lin(x_dbm) * 1e-3


def watts_to_dbm(x_w):
    return lin_to_db(np.asarray(x_w, dtype=float) * 1e3)


def rate_to_sinr(rate):
    """SINR needed for ``log2(1 + sinr) = rate`` (bits/s/Hz)."""
    return 2.0 ** np.asarray(rate, dtype=float) - 1.0


def sinr_to_rate(sinr):
    return np.log2(1.0 + np.asarray(sinr, dtype=float))


_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*2?)\s*$")

# unit -> (kind, converter to SI / linear)
_UNITS = {
    "": ("number", float),
    "w": ("power", float),
    "mw": ("power", lambda v: v * 1e-3),
    "dbm": ("power", lambda v: float(dbm_to_watts(v))),
    "dbw": ("power", lambda v: float(db_to_lin(v))),
    "db": ("ratio", lambda v: float(db_to_lin(v))),
    "hz": ("frequency", float),
    "khz": ("frequency", lambda v: v * 1e3),
    "mhz": ("frequency", lambda v: v * 1e6),
    "ghz": ("frequency", lambda v: v * 1e9),
    "m": ("length", float),
    "km": ("length", lambda v: v * 1e3),
    "m2": ("area", float),
}


def parse_quantity(value, kind: str) -> float:
    """Convert a config value to SI (or linear) units.

    Bare numbers are taken as already being in SI/linear units.  Strings carry
    an explicit unit suffix, e.g. ``"30 dBm"``, ``"-80 dBm"``, ``"10 dB"``,
    ``"800 MHz"``.

    Parameters
    ----------
    value : float or str
    kind : {"power", "ratio", "frequency", "length", "area", "number"}
        Expected physical kind; a mismatching suffix raises ``ValueError``.
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a {kind}, got boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a {kind} as number or string, got {type(value).__name__}")
    m = _QUANTITY.match(value)
    if not m:
        raise ValueError(f"cannot parse quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2).lower()
    if unit not in _UNITS:
        raise ValueError(f"unknown unit {m.group(2)!r} in {value!r}")
    unit_kind, conv = _UNITS[unit]
    if unit_kind != "number" and unit_kind != kind:
        raise ValueError(f"unit {m.group(2)!r} is a {unit_kind}, expected a {kind}")
    return float(conv(number))
