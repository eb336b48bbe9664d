import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isaclab.units import (db_to_lin, dbm_to_watts, lin_to_db, parse_quantity, rate_to_sinr, sinr_to_rate,
                           watts_to_dbm)


def test_reference_powers():
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-15)
    assert dbm_to_watts(-80.0) == pytest.approx(1e-11, rel=1e-14)
    assert watts_to_dbm(1.0) == pytest.approx(30.0, abs=1e-12)
    assert db_to_lin(10.0) == pytest.approx(10.0)
    assert lin_to_db(0.0) == -np.inf


@given(st.floats(-200.0, 200.0))
def test_db_roundtrip(x):
    assert lin_to_db(db_to_lin(x)) == pytest.approx(x, abs=1e-9)
    assert watts_to_dbm(dbm_to_watts(x)) == pytest.approx(x, abs=1e-9)


@given(st.floats(0.0, 40.0))
def test_rate_roundtrip(r):
    assert sinr_to_rate(rate_to_sinr(r)) == pytest.approx(r, abs=1e-9)


def test_rate_examples():
    assert rate_to_sinr(0.0) == 0.0
    assert rate_to_sinr(1.0) == 1.0
    assert sinr_to_rate(3.0) == 2.0


@pytest.mark.parametrize("text,kind,expected", [
    ("30 dBm", "power", 1.0),
    ("-80dBm", "power", 1e-11),
    ("500 mW", "power", 0.5),
    ("0 dBW", "power", 1.0),
    ("10 dB", "ratio", 10.0),
    ("800 MHz", "frequency", 8e8),
    ("2.4GHz", "frequency", 2.4e9),
    ("1.5 km", "length", 1500.0),
    ("0.5 m2", "area", 0.5),
    ("1e-3", "number", 1e-3),
    (".25", "ratio", 0.25),
])
def test_parse_quantity(text, kind, expected):
    assert parse_quantity(text, kind) == pytest.approx(expected, rel=1e-14)


def test_bare_numbers_pass_through():
    assert parse_quantity(3, "power") == 3.0
    assert parse_quantity(math.pi, "length") == math.pi


@pytest.mark.parametrize("value,kind", [("30 dBm", "ratio"), ("10 furlongs", "length"), ("dBm", "power"),
                                        (True, "number"), ([1], "number"), ("1 2 m", "length")])
def test_parse_quantity_rejects(value, kind):
    with pytest.raises(ValueError):
        parse_quantity(value, kind)
