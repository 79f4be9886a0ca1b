import json
import os
from pathlib import Path

import pytest

from vanet_nd.errors import ConfigError
from vanet_nd.harness import cli
from vanet_nd.harness.config import ExperimentConfig, build_config, load_config, parse_overrides
from vanet_nd.harness.output import VERSION, Table, read_csv_table, write_table
from vanet_nd.harness.presets import PRESETS, run_preset

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(Path(root).rglob("*")) if p.is_file()}


# -- configuration ------------------------------------------------------------

def test_defaults_are_table2():
    cfg = build_config({})
    assert (cfg.scenario.L, cfg.scenario.d, cfg.scenario.r, cfg.scenario.s_x) == (1000, 60, 200, 600)
    assert (cfg.scenario.M, cfg.sim.B, cfg.sim.k, cfg.sim.p_t) == (150, 12, 1, 0.5)


def test_every_problem_is_listed():
    with pytest.raises(ConfigError) as e:
        build_config({"scenario": {"M": "0", "d": "300", "colour": "red"},
                      "sim": {"p_t": "1.5", "k": "two"},
                      "extra": {"x": "1"},
                      "output": {"format": "xml"}})
    text = "\n".join(e.value.problems)
    for needle in ("scenario.colour", "[extra]", "M must be", "d < r", "p_t", "sim.k",
                   "output.format"):
        assert needle in text


def test_sweep_errors():
    with pytest.raises(ConfigError, match="empty"):
        build_config({"sweep": {"parameter": "M", "values": ""}})
    with pytest.raises(ConfigError, match="sweep.parameter"):
        build_config({"sweep": {"parameter": "colour", "values": "1"}})
    with pytest.raises(ConfigError) as e:
        build_config({"sweep": {"parameter": "p_t", "values": "0.5, 1.2, x, 0"}})
    assert len([p for p in e.value.problems if p.startswith("sweep value")]) == 3
    with pytest.raises(ConfigError):
        build_config({"sweep": {"parameter": "algorithm", "values": "GSIMND, FOO"}})


def test_sweep_parsing():
    cfg = build_config({"sweep": {"parameter": "algorithm", "values": "CRA, SBA"}})
    assert cfg.sweep.values == ("CRA", "SBA")


def test_overrides():
    assert parse_overrides(["sim.k=3", "scenario.M = 50"]) == {"sim": {"k": "3"},
                                                                "scenario": {"M": "50"}}
    with pytest.raises(ConfigError):
        parse_overrides(["k=3"])
    cfg = load_config(CONFIGS / "table2.ini", ["sim.k=3"])
    assert cfg.sim.k == 3 and cfg.sim.seed == 1 and cfg.out_dir == "out/table2"


def test_shipped_configs_load():
    for path in CONFIGS.glob("*.ini"):
        load_config(path)


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.ini")


def test_digest_tracks_results_not_paths():
    a = build_config({})
    b = build_config({"output": {"dir": "elsewhere"}})
    c = build_config({"sim": {"k": "2"}})
    assert a.digest() == b.digest() != c.digest()
    assert a.digest({"x": 1}) != a.digest()
    assert isinstance(a, ExperimentConfig)


# -- output -----------------------------------------------------------------

def test_csv_has_comment_and_header(tmp_path):
    t = Table("demo", ["a", "b"])
    t.add(1, 0.1)
    t.add(2, float("nan"))
    path = write_table(t, tmp_path, {"config_hash": "abc", "seed": 3})
    lines = Path(path).read_text().splitlines()
    assert lines[0] == f"# config_hash=abc seed=3 version={VERSION}"
    assert lines[1] == "a,b" and lines[2] == "1,0.1" and lines[3] == "2,nan"
    meta, cols, rows = read_csv_table(path)
    assert meta["seed"] == "3" and cols == ["a", "b"] and len(rows) == 2


def test_json_output(tmp_path):
    t = Table("demo", ["a", "b"])
    t.add(1, float("nan"))
    doc = json.loads(Path(write_table(t, tmp_path, {"seed": 1}, "json")).read_text())
    assert doc["columns"] == ["a", "b"] and doc["rows"] == [[1, None]]
    with pytest.raises(ValueError):
        t.add(1)


# -- commands ---------------------------------------------------------------

def test_sweep_over_M(tmp_path):
    out = tmp_path / "a"
    args = ["sweep", "--config", CONFIGS / "sweep_M.ini", "--out", out,
            "--set", "sim.trials=3", "--set", "sim.max_slots=400", "--set", "sim.stop_fraction=0.5"]
    assert run_cli(*args) == 0
    meta, cols, rows = read_csv_table(out / "sweep_aggregate.csv")
    assert [r[1] for r in rows] == ["50", "150", "500", "1000"]
    assert meta["seed"] == "7" and "config_hash" in meta
    _, _, trial_rows = read_csv_table(out / "sweep_trials.csv")
    assert len(trial_rows) == 12
    again = tmp_path / "b"
    assert run_cli(*[a if a != out else again for a in args]) == 0
    assert files(out) == files(again)


def test_sweep_without_section_is_config_error(tmp_path):
    assert run_cli("sweep", "--out", tmp_path) == 2


def test_config_errors_exit_2(tmp_path, capsys):
    assert run_cli("simulate", "--out", tmp_path, "--set", "sim.k=0", "--set", "scenario.Q=1") == 2
    err = capsys.readouterr().err
    assert "k must be >= 1" in err and "scenario.Q" in err
    assert err.count("config error") == 2
    assert run_cli("analyze", "--config", tmp_path / "missing.ini", "--out", tmp_path) == 2
    assert run_cli("simulate", "--out", tmp_path, "--jobs", "0") == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_cli("analyze", "--out", blocker / "sub") == 2


def test_analyze_outputs(tmp_path):
    assert run_cli("analyze", "--out", tmp_path, "--t-max", 50) == 0
    _, cols, rows = read_csv_table(tmp_path / "analysis.csv")
    assert cols == ["t", "D", "I", "P_gs", "n_bar"] and len(rows) == 50
    _, cols, rows = read_csv_table(tmp_path / "bounds.csv")
    assert cols == ["fraction", "t_l", "t_u"]
    assert all(float(lo) <= float(hi) for _, lo, hi in rows)


def test_simulate_outputs(tmp_path):
    assert run_cli("simulate", "--out", tmp_path, "--seed", 4, "--set", "sim.trials=2",
                   "--set", "scenario.M=40", "--format", "json") == 0
    assert sorted(os.listdir(tmp_path / "trials")) == ["trial_00000.json", "trial_00001.json"]
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["columns"] == ["trial", "node", "convergence_slot", "discovered_count",
                              "true_count", "sensing_completeness"]
    assert len(doc["rows"]) == 80 and doc["meta"]["seed"] == 4


def test_scenario_gen(tmp_path):
    assert run_cli("scenario", "gen", "--out", tmp_path, "--seed", 42) == 0
    _, cols, rows = read_csv_table(tmp_path / "nodes.csv")
    assert cols == ["node_id", "x", "y"] and len(rows) == 150
    _, _, rsus = read_csv_table(tmp_path / "rsus.csv")
    assert [float(r[1]) for r in rsus] == [300.0, 900.0]


def test_validate_fast_passes(tmp_path, capsys):
    assert run_cli("validate", "fast", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 7
    _, _, rows = read_csv_table(tmp_path / "validate_report.csv")
    assert all(r[-1] == "1" for r in rows)
    assert (tmp_path / "validate_occupancy.csv").exists()


def test_validate_failure_exit_1(tmp_path, monkeypatch):
    from vanet_nd.harness import validate

    def broken(level):
        ok, checks, tables = True, [validate.Check("x", "y", 1.0, 0.0, False)], []
        return False, checks, tables

    monkeypatch.setattr(cli, "run_validation", broken)
    assert run_cli("validate", "fast", "--out", tmp_path) == 1


# -- presets ----------------------------------------------------------------

def test_presets_cover_every_figure():
    assert sorted(PRESETS) == sorted(f"fig{i}" for i in range(7, 15))
    assert (PRESETS["fig7"].trials, PRESETS["fig9"].trials, PRESETS["fig13"].trials) == (1000, 500, 200)
    with pytest.raises(ConfigError):
        run_preset("fig99", None, None, 0)


def test_preset_needs_two_trials(tmp_path):
    assert run_cli("preset", "fig7", "--trials", 1, "--out", tmp_path) == 2


@pytest.mark.parametrize("name", ["fig7", "fig8", "fig9", "fig10"])
def test_preset_reruns_are_byte_identical(tmp_path, name):
    small = ["--trials", 3, "--t-max", 40, "--max-slots", 300, "--set", "scenario.M=60"]
    assert run_cli("preset", name, "--out", tmp_path / "a", *small) == 0
    assert run_cli("preset", name, "--out", tmp_path / "b", *small, "--jobs", 2) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert a and a == b


def test_fig12_empty_beams_shrink_with_density(tmp_path):
    assert run_cli("preset", "fig12", "--trials", 2, "--out", tmp_path) == 0
    _, cols, rows = read_csv_table(tmp_path / "fig12" / "fig12a_qbeams.csv")
    e0 = {int(r[0]): float(r[3]) for r in rows if r[2] == "0"}
    assert e0[50] > e0[1000]
    assert sorted(e0) == list(range(50, 1001, 50))
