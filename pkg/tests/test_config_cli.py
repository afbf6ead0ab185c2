import filecmp
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sudas.cli import main, read_csv
from sudas.config import (
    SolverParams, SweepSpec, SystemConfig, db_to_linear, dbm_to_watt, dump_config, parse_config,
)
from sudas.errors import ConfigError

MINIMAL = """
[scenario]
n_tx_bs = 2
n_sudacs = 2
n_ues = 2
n_subcarriers = 4
p_bs_max_dbm = 40
p_sudac_max_dbm = 20
"""

SWEEP = MINIMAL + """
[sweep]
variable = bs_power
values_dbm = 20, 30, 40
n_drops = 3
systems = sudas, baseline_licensed
"""


def test_units():
    assert dbm_to_watt(46) == pytest.approx(39.81, abs=5e-3)
    assert dbm_to_watt(30) == pytest.approx(1.0)
    assert db_to_linear(20) == pytest.approx(100.0)


def test_stream_count_rejected():
    with pytest.raises(ConfigError, match="rank") as info:
        SystemConfig(n_tx_bs=2, n_sudacs=4, n_streams=3)
    assert info.value.key == "scenario.n_streams"


def test_parse_minimal():
    system, solver, sweep = parse_config(MINIMAL)
    assert system.p_bs_max == pytest.approx(10.0)
    assert system.sudas_budget == pytest.approx(0.2)
    assert solver == SolverParams()
    assert sweep is None


@pytest.mark.parametrize("text, key", [
    (MINIMAL.replace("n_ues = 2\n", ""), "scenario.n_ues"),
    (MINIMAL.replace("n_ues = 2", "n_ues = two"), "scenario.n_ues"),
    (MINIMAL + "colour = red\n", "scenario.colour"),
    (MINIMAL + "p_bs_max = 3\n", "scenario.p_bs_max"),
    (MINIMAL + "[solver]\nmax_iterations = 0\n", "solver.max_iterations"),
    (MINIMAL + "[sweep]\nvariable = bs_power\nvalues = 3, 1\n", "sweep.values"),
    (MINIMAL + "[extra]\n", "extra"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert key in str(info.value)


def test_overrides():
    system, solver, _ = parse_config(MINIMAL, ["scenario.p_bs_max=3", "max_iterations=7", "n_ues=3"])
    assert system.p_bs_max == 3.0 and system.n_ues == 3
    assert solver.max_iterations == 7
    system, _, _ = parse_config(MINIMAL, ["p_sudac_max_dbm=30"])
    assert system.p_sudac_max == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, ["nonsense"])
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, ["bogus=1"])


@settings(max_examples=50)
@given(p=st.floats(0, 1e3), gain=st.floats(1e-3, 1e6), k=st.integers(1, 4),
       values=st.lists(st.floats(1e-3, 1e2), min_size=1, max_size=4, unique=True),
       eps=st.floats(1e-9, 1e-2))
def test_round_trip(p, gain, k, values, eps):
    system = SystemConfig(n_ues=k, p_bs_max=p, backend_gain=gain, ue_weights=[1.0 + i for i in range(k)])
    solver = SolverParams(convergence_eps=eps)
    sweep = SweepSpec("bs_power", sorted(values), n_drops=2, base_config=system)
    again = parse_config(dump_config(system, solver, sweep))
    assert again == (system, solver, sweep)


# -- CLI ---------------------------------------------------------------------

@pytest.fixture
def ini(tmp_path):
    def write(text, name="cfg.ini"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def test_trace_csv(ini, tmp_path):
    cfg = ini(MINIMAL.replace("n_tx_bs = 2", "n_tx_bs = 4").replace("n_sudacs = 2", "n_sudacs = 4")
              + "[solver]\nmax_iterations = 20\n")
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    seed, header, rows = read_csv(tmp_path / "o" / "trace.csv")
    assert seed == 0
    assert header == ("iteration", "objective", "upper_bound", "ratio")
    assert [int(r[0]) for r in rows] == list(range(1, 21))
    obj = [float(r[1]) for r in rows]
    assert all(b >= a * (1 - 1e-8) for a, b in zip(obj, obj[1:]))
    assert float(rows[-1][3]) >= 0.99


def test_sweep_csv_reproducible(ini, tmp_path):
    cfg = ini(SWEEP)
    for name in ("a", "b"):
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / name), "--seed", "11"]) == 0
    a, b = tmp_path / "a" / "sweep.csv", tmp_path / "b" / "sweep.csv"
    assert filecmp.cmp(a, b, shallow=False)
    seed, header, rows = read_csv(a)
    assert seed == 11 and len(rows) == 6
    by = {(r[0], r[1]): float(r[2]) for r in rows}
    for value in {r[0] for r in rows}:
        assert by[(value, "sudas")] >= by[(value, "baseline_licensed")]


def test_sweep_needs_section(ini, tmp_path, capsys):
    assert main(["sweep", "--config", ini(MINIMAL), "--out", str(tmp_path)]) == 2
    assert "sweep" in capsys.readouterr().err


def test_solve_outputs(ini, tmp_path):
    cfg = ini(MINIMAL)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--set", "n_streams=2"]) == 0
    _, header, rows = read_csv(tmp_path / "o" / "allocation.csv")
    assert header == ("subcarrier", "ue", "stream", "p_bs", "p_sudas", "s")
    assert len(rows) == 4 * 2 * 2
    chosen = {(int(r[0]), int(r[1])) for r in rows if r[5] == "1"}
    assert sorted(i for i, _ in chosen) == [0, 1, 2, 3]
    assert sum(float(r[3]) for r in rows) <= dbm_to_watt(40) + 1e-6
    assert all(float(r[3]) == 0 and float(r[4]) == 0 for r in rows if r[5] == "0")
    _, _, summary = read_csv(tmp_path / "o" / "summary.csv")
    metrics = dict(summary)
    assert float(metrics["c1_slack_w"]) >= -1e-6
    assert float(metrics["c2_slack_w"]) >= -1e-6
    assert float(metrics["tp_bits_s"]) <= float(metrics["relaxed_objective_bits_s"]) * (1 + 1e-12)


def test_solve_zero_budget(ini, tmp_path):
    cfg = ini(MINIMAL)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path), "--set", "scenario.p_bs_max=0"]) == 0
    _, _, rows = read_csv(tmp_path / "allocation.csv")
    assert all(float(r[3]) == 0.0 and float(r[4]) == 0.0 for r in rows)


def test_exit_codes(ini, tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["solve", "--config", str(tmp_path / "missing.ini"), "--out", out]) == 2
    assert main(["solve", "--config", ini(MINIMAL), "--out", out, "--set", "n_streams=3"]) == 2
    assert "n_streams" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve", "--config", ini(MINIMAL), "--out", str(blocker / "sub")]) == 3
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", "x", "--out", out])


def test_module_entry(ini, tmp_path):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "sudas", "solve", "--config", ini(MINIMAL),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert os.path.exists(tmp_path / "summary.csv")
