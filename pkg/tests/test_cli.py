import json
import subprocess
import sys

import numpy as np
import pytest

from isaclab import beamforming as bf
from isaclab import cli
from isaclab.cli import CompareError, ExperimentSpec, ResultTable, Sweep, compare_report, main, read_table, run
from isaclab.scenario import ConfigError, default_config, dump_config


def _body(text):
    return [l for l in text.splitlines() if not l.startswith("#")]


def _numeric(table, name):
    return np.array([float(v) for v in table.column(name) if v not in (None, "")])


# ---------------------------------------------------------------- sweeps

def test_sweep_parse_and_values():
    s = Sweep.parse("gamma_c=-10:0:3:dB")
    assert (s.name, s.start, s.stop, s.points, s.scale) == ("gamma_c", -10.0, 0.0, 3, "dB")
    assert np.allclose(s.values(), [0.1, 10 ** -0.5, 1.0])
    assert np.allclose(Sweep.parse("pfa=1e-3:1e-1:3:log").values(), [1e-3, 1e-2, 1e-1])
    assert np.allclose(Sweep.parse("rate=0:2:5").values(), [0, 0.5, 1, 1.5, 2])
    assert str(s) == "gamma_c=-10.0:0.0:3:dB"


def test_integer_sweep_rounds_and_deduplicates():
    v = Sweep.parse("l=1:4:10").values()
    assert v.dtype.kind == "i" and list(v) == [1, 2, 3, 4]


@pytest.mark.parametrize("text", ["gamma_c=1:2", "gamma_c=a:b:3", "bogus=0:1:3", "gamma_c=0:1:1",
                                  "rate=0:1:3:dB", "pfa=0:1:3:log", "gamma_c=0:1:3:cubic", "gamma_c"])
def test_sweep_errors(text):
    with pytest.raises(ConfigError):
        Sweep.parse(text)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec("nope")
    with pytest.raises(ConfigError):
        ExperimentSpec("pd-surface", trials=10)
    with pytest.raises(ConfigError):
        ExperimentSpec("pd-surface", sweeps=(Sweep.parse("gamma_c=0:1:2"), Sweep.parse("gamma_c=0:1:3")))
    with pytest.raises(ConfigError, match="not an axis"):
        run(ExperimentSpec("pd-vs-L", sweeps=(Sweep.parse("rate=0:1:2"),)))
    with pytest.raises(ConfigError, match="unknown for this kind"):
        run(ExperimentSpec("pd-vs-L", params={"mode": ["x"]}))


# ---------------------------------------------------------------- tables

def test_csv_layout_and_roundtrip(tmp_path):
    t = run(ExperimentSpec("pd-surface", sweeps=(Sweep.parse("gamma_c=-10:0:3:dB"),
                                                  Sweep.parse("gamma_s=-20:-10:2:dB"))))
    text = t.to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("# isac-lab ")
    assert any(l.startswith("# seed: 0") for l in lines)
    assert any(l.startswith("# scenario: ") for l in lines)
    header = _body(text)[0]
    assert header.startswith("gamma_c [lin],gamma_c_db [dB],gamma_s [lin],gamma_s_db [dB]")
    assert len(_body(text)) == 1 + 6
    p = tmp_path / "t.csv"
    p.write_text(text)
    back = read_table(p)
    assert back.kind == "pd-surface" and back.axes == ["gamma_c", "gamma_s"]
    assert back.column("pd_exact") == [float(v) for v in t.column("pd_exact")]


def test_probabilities_in_unit_interval():
    t = run(ExperimentSpec("pd-surface", sweeps=(Sweep.parse("gamma_c=-30:10:9:dB"),
                                                  Sweep.parse("gamma_s=-30:10:9:dB"))))
    pd = _numeric(t, "pd_exact")
    assert np.all((pd >= 0) & (pd <= 1))


def test_ratio_mode():
    t = run(ExperimentSpec("pd-surface", sweeps=(Sweep.parse("ratio=0:1:3"),), params={"mode": ["ratio"],
                                                                                       "gamma_sum_db": [0.0]}))
    assert t.axes == ["gamma_sum", "ratio"]
    assert np.allclose(_numeric(t, "gamma_c") + _numeric(t, "gamma_s"), 1.0)


def test_pd_vs_snr_crossings():
    t = run(ExperimentSpec("pd-vs-snr", sweeps=(Sweep.parse("gamma_c=-20:5:6:dB"),)))
    xs = [float(m.split("gamma_c_db=")[1]) for m in t.meta if m.startswith("crossing")]
    assert len(xs) == 4 and np.all(np.diff(xs) > 0)


def test_pd_vs_l_reports_min_l():
    t = run(ExperimentSpec("pd-vs-L", sweeps=(Sweep.parse("l=100:1000:4"),), params={"gamma_c_db": [-5.0]}))
    line = [m for m in t.meta if m.startswith("min L")][0]
    n = int(line.rsplit(":", 1)[1])
    # the exact energy detector crosses 0.99 between 300 and 600 symbols at -5 dB
    assert 300 <= n <= 600
    pd = _numeric(t, "pd")
    assert np.all(np.diff(pd) >= 0)


def test_power_allocation_within_budget():
    t = run(ExperimentSpec("power-allocation", sweeps=(Sweep.parse("rate=2:13:3"),)))
    assert t.column("status") == ["ok", "ok", "infeasible"]
    total = _numeric(t, "power_total")
    assert np.all(total <= default_config().p_max * (1 + 1e-8))
    assert t.failures == 0


# ---------------------------------------------------------------- compare

def _toy(values, axis=(1.0, 2.0, 3.0), kind="a", ci=None):
    cols = [("x", "lin"), ("v", "prob")] + ([("v_ci_low", "prob"), ("v_ci_high", "prob")] if ci else [])
    t = ResultTable(kind, cols, axes=["x"], value="v")
    for i, (x, v) in enumerate(zip(axis, values)):
        row = {"x": x, "v": v}
        if ci:
            row.update(v_ci_low=ci[i][0], v_ci_high=ci[i][1])
        t.add(**row)
    return t


def test_compare_identical_runs():
    out = compare_report([_toy([0.1, 0.5, 0.9]), _toy([0.1, 0.5, 0.9])], names=["a", "b"])
    assert out.column("diff_a_b") == [0.0, 0.0, 0.0]
    assert out.column("dom_a_b") == [0, 0, 0]


def test_compare_dominance_flags_and_ci():
    out = compare_report([_toy([0.5, 0.5, 0.5]), _toy([0.4, 0.5 + 1e-12, 0.6])], names=["a", "b"])
    assert out.column("dom_a_b") == [1, 0, -1]
    ci = [(0.35, 0.45), (0.49, 0.51), (0.45, 0.55)]
    out = compare_report([_toy([0.5, 0.5, 0.5]), _toy([0.4, 0.5, 0.5], ci=ci)], names=["a", "b"])
    assert out.column("dom_a_b") == [1, 0, 0]
    assert "b_ci_low" in out.names


def test_compare_axis_mismatch():
    with pytest.raises(CompareError):
        compare_report([_toy([0.1, 0.2, 0.3]), _toy([0.1, 0.2, 0.3], axis=(1.0, 2.0, 4.0))], names=["a", "b"])
    with pytest.raises(CompareError):
        compare_report([_toy([0.1]), _toy([0.1])], names=["a", "a"])
    with pytest.raises(CompareError):
        compare_report([])


# ---------------------------------------------------------------- main

def test_main_writes_file_and_is_byte_identical(tmp_path):
    args = ["mc-validate", "--sweep", "gamma_c=-10:0:2:dB", "--sweep", "gamma_s=-20:-10:2:dB",
            "--param", "l=64", "--param", "pfa=0.01", "--trials", "2000", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    t = read_table(a)
    assert all(v == 1.0 for v in t.column("pd_in_ci") + t.column("pfa_in_ci"))


def test_main_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"mt": "sixteen"}')
    assert main(["pd-vs-L", "--scenario", str(bad), "--out", str(tmp_path / "o.csv")]) == 1
    assert "mt" in capsys.readouterr().err
    assert main(["pd-vs-L", "--sweep", "l=1:2"]) == 1
    assert main(["compare", str(bad)]) == 1
    assert main(["pd-vs-L", "--param", "bogus"]) == 1


def test_main_scenario_file(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(dump_config(default_config(l_symbols=256)))
    out = tmp_path / "o.csv"
    assert main(["pd-vs-snr", "--scenario", str(cfg), "--out", str(out), "--sweep", "gamma_c=-10:0:3:dB"]) == 0
    assert set(read_table(out).column("l_symbols")) == {256.0}


def test_main_partial_failure_exit_code(tmp_path, monkeypatch, capsys):
    real = bf.solve_p2

    def flaky(cfg, h, gamma0=None, **kw):
        if gamma0 and gamma0 > 100:
            raise bf.SolverFailure("stalled")
        return real(cfg, h, gamma0=gamma0, **kw)

    monkeypatch.setattr(bf, "solve_p2", flaky)
    out = tmp_path / "o.csv"
    assert main(["tradeoff-curve", "--sweep", "rate=1:8:2", "--out", str(out)]) == 2
    t = read_table(out)
    assert t.column("status") == ["ok", "solver-failure: SolverFailure"]
    assert "failed" in capsys.readouterr().err


def test_compare_command(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["pd-vs-snr", "--sweep", "gamma_c=-10:0:3:dB", "--param", "pfa=0.01"]
    main(base + ["--out", str(a)])
    main(base + ["--param", "l=512", "--out", str(b)])
    out = tmp_path / "m.csv"
    assert main(["compare", str(a), str(b), "--value", "pd", "--out", str(out)]) == 0
    m = read_table(out)
    assert all(d in (0.0, 1.0) for d in m.column("dom_a_b"))
    assert any(d == 1.0 for d in m.column("dom_a_b"))


def test_console_entry_point_runs():
    r = subprocess.run([sys.executable, "-m", "isaclab", "pd-vs-L", "--sweep", "l=10:20:2",
                        "--param", "gamma_c_db=0"], capture_output=True, text=True, check=True)
    assert "l_symbols [symbols]" in r.stdout
