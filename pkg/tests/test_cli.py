import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from optotherm.cli import main, resolve_config
from optotherm.errors import ConfigError
from optotherm.presets import get_preset
from optotherm.protocols import otto_work_formula
from optotherm.tables import OutputTable, params_hash, replay_table
from optotherm.units import SystemParams


def run(argv):
    return main([str(a) for a in argv])


def test_run_fig3a_writes_closed_cycle(tmp_path):
    assert run(["run", "--preset", "fig3a", "--omega-over-gamma", "1e-3", "--out", tmp_path]) == 0
    table = OutputTable.read(tmp_path / "isothermal.csv")
    beta = np.hypot(table.column("beta_re"), table.column("beta_im"))
    assert abs(beta[-1] / beta[0] - 1) < 1e-3
    assert table.metadata["params"]["omega"] == 1e-3
    assert table.metadata["params_hash"] == params_hash(get_preset("fig3a").params)
    assert "wall_time" in table.metadata
    summary = json.loads((tmp_path / "isothermal.json").read_text())
    assert abs(summary["closure"]) < 1e-3
    assert set(summary["final_ledger"]) >= {"work", "heat", "u", "e_mech"}


def test_output_is_bit_reproducible_and_replayable(tmp_path):
    args = ["run", "--preset", "fig3a", "--omega", "0.1", "--no-wall-time"]
    assert run(args + ["--out", tmp_path / "a"]) == 0
    assert run(args + ["--out", tmp_path / "b"]) == 0
    first = (tmp_path / "a" / "isothermal.csv").read_bytes()
    assert first == (tmp_path / "b" / "isothermal.csv").read_bytes()
    assert run(["run", "--replay", tmp_path / "a" / "isothermal.csv", "--no-wall-time",
                "--out", tmp_path / "c"]) == 0
    assert first == (tmp_path / "c" / "isothermal.csv").read_bytes()
    # the library-level replay uses only the header's params and protocol
    record = replay_table(tmp_path / "a" / "isothermal.csv")
    table = OutputTable.read(tmp_path / "a" / "isothermal.csv")
    assert np.array_equal(record.samples["work"], table.column("work"))


def test_run_otto(tmp_path):
    assert run(["run", "--protocol", "otto", "--iterations", 100, "--si", "--out", tmp_path]) == 0
    table = OutputTable.read(tmp_path / "otto.csv")
    params = SystemParams.from_dict(table.metadata["params"])
    n = table.column("iteration")
    assert len(n) == 100
    assert np.allclose(table.column("work"), otto_work_formula(params, 0.0, n), rtol=1e-6, atol=0)
    assert {"power", "power_W", "work_J"} <= set(table.columns)
    assert np.all(np.diff(table.column("power")) > 0)


def test_si_adds_columns(tmp_path):
    base = ["run", "--preset", "fig3a", "--omega", "1", "--no-wall-time"]
    assert run(base + ["--out", tmp_path / "a"]) == 0
    assert run(base + ["--si", "--out", tmp_path / "b"]) == 0
    plain = OutputTable.read(tmp_path / "a" / "isothermal.csv")
    si = OutputTable.read(tmp_path / "b" / "isothermal.csv")
    assert si.columns[:len(plain.columns)] == plain.columns
    assert {"t_s", "work_J", "heat_J", "u_J", "e_mech_J"} <= set(si.columns)
    assert np.array_equal(si.column("work"), plain.column("work"))


@pytest.mark.parametrize("extra", [
    ["--protocol", "evolve", "--duration", 0],
    ["--protocol", "evolve"],
    ["--protocol", "isothermal", "--periods", 0],
    ["--protocol", "otto", "--iterations", 0],
    ["--omega", 0],
    ["--temperature", -1],
])
def test_invalid_input_exits_2(tmp_path, extra, capsys):
    assert run(["run", "--out", tmp_path] + extra) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("optotherm:") and "\n" not in err


def test_blowup_exits_3(tmp_path, capsys):
    argv = ["run", "--protocol", "evolve", "--duration", 1e5, "--omega", 1, "--dt", 1000,
            "--no-bath", "--out", tmp_path]
    assert run(argv) == 3
    assert capsys.readouterr().err.count("\n") == 1


def test_level_crossing_exits_4(tmp_path, capsys):
    assert run(["run", "--preset", "fig3d", "--protocol", "halfperiod", "--beta0", 200,
                "--out", tmp_path]) == 4
    assert "LevelCrossingError" in capsys.readouterr().err


def test_argparse_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run", "--protocol", "nonsense"])
    assert info.value.code == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nu0": 1e4, "gm": 0.1, "omega": 0.5, "temperature": 1e3,
                               "protocol": "isothermal", "beta0": 100.0}))
    config = resolve_config({"beta0": 50.0}, cfg)
    assert config["beta0"] == 50.0 and config["params"]["omega"] == 0.5
    assert config["preset"] is None
    assert run(["run", "--config", cfg, "--beta0", 50, "--out", tmp_path]) == 0
    table = OutputTable.read(tmp_path / "isothermal.csv")
    assert table.column("beta_re")[0] == 50.0


@pytest.mark.parametrize("content", [
    {"preset": "fig3a", "gm": 1.0},
    {"preset": "fig3a", "unknown_key": 1},
    [1, 2, 3],
])
def test_bad_config_exits_2(tmp_path, content):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(content))
    assert run(["run", "--config", cfg, "--out", tmp_path]) == 2


def test_unparsable_config_exits_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert run(["run", "--config", cfg]) == 2
    assert run(["run", "--config", tmp_path / "missing.json"]) == 2


def test_preset_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "fig3a"}))
    config = resolve_config({"omega": 1.0}, cfg)
    assert config["params"]["omega"] == 1.0
    assert config["params"]["nu0"] == 1e4


def test_sweep_reversibility(tmp_path, monkeypatch):
    monkeypatch.setenv("OPTOTHERM_JOBS", "2")
    assert run(["sweep", "--protocol", "reversibility", "--omega-grid", "log:1e-1:1:3",
                "--samples", 300, "--out", tmp_path]) == 0
    table = OutputTable.read(tmp_path / "reversibility.csv")
    assert list(table.column("omega")) == pytest.approx([0.1, 10 ** -0.5, 1.0])
    ratio = table.column("ratio")
    assert np.all(np.diff(ratio) <= 0)
    for row in table.rows:
        point = row[table.columns.index("run_file")]
        assert OutputTable.read(point).metadata["params"]["omega"] in table.column("omega")


def test_sweep_errors_recorded_in_row(tmp_path):
    assert run(["sweep", "--protocol", "clausius", "--preset", "fig3d", "--beta0-grid", "100,200",
                "--temperatures", "50", "--samples", 200, "--out", tmp_path]) == 0
    table = OutputTable.read(tmp_path / "clausius.csv")
    err = table.columns.index("error")
    assert table.rows[0][err] == ""
    assert "LevelCrossingError" in table.rows[1][err]
    assert math.isnan(table.column("heat")[1])
    summary = json.loads((tmp_path / "clausius.json").read_text())
    assert summary["failed"] == 1


def test_single_point_sweep_equals_run(tmp_path):
    assert run(["sweep", "--protocol", "reversibility", "--omega-grid", "0.3", "--samples", 300,
                "--out", tmp_path / "s"]) == 0
    assert run(["run", "--preset", "fig3c", "--protocol", "halfperiod", "--omega", 0.3,
                "--samples", 300, "--out", tmp_path / "r"]) == 0
    swept = OutputTable.read(tmp_path / "s" / "reversibility.csv")
    single = json.loads((tmp_path / "r" / "halfperiod.json").read_text())
    assert swept.column("work")[0] == single["work"]
    assert swept.column("ratio")[0] == single["ratio"]


def test_verify_default_passes(capsys):
    assert run(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_verify_huge_dt_fails(capsys):
    assert run(["verify", "--dt", 10]) != 0
    out = capsys.readouterr().out
    assert "FAIL  first law, post-hoc quadrature" in out


def test_verify_uncoupled_reports_zero_work(capsys):
    assert run(["verify", "--gm", 0]) == 0
    assert "PASS  work vanishes without coupling: measured 0.000e+00" in capsys.readouterr().out


def test_presets_listing(capsys):
    assert run(["presets"]) == 0
    out = capsys.readouterr().out
    for name in ("fig3a", "fig3b", "fig3c", "fig3d", "otto"):
        assert f"{name}:" in out


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "optotherm.cli", "presets"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "fig3a" in proc.stdout


def test_table_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        OutputTable(["a", "b"], [[1.0]])
    with pytest.raises(ConfigError):
        (tmp_path / "x.csv").write_text("# only a header\n")
        OutputTable.read(tmp_path / "x.csv")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_float_formatting_round_trips_exactly(values):
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as d:
        path = OutputTable.from_columns({"x": values}, {"k": 1}).write(Path(d) / "t.csv")
        back = OutputTable.read(path)
    assert list(back.column("x")) == values
    assert back.metadata["k"] == 1
