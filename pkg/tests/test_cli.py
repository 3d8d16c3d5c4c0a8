"""Exit-code contract and end-to-end subcommand behavior of the CLI."""

import json

import pytest

from swarmclt.cli import main

ENGINE_PARAMS = {
    "omega": 0.72984, "c": 1.496172, "swarm_size": 60, "iterations": 80,
    "dim": 2, "domain": [[-10.0, 10.0], [-10.0, 10.0]],
    "topology": {"kind": "ring", "ring_k": 1}, "seed": 7,
}


@pytest.fixture()
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SWARMCLT_OUT", str(tmp_path))
    return tmp_path


@pytest.fixture()
def params_file(tmp_path):
    p = tmp_path / "engine.json"
    p.write_text(json.dumps(ENGINE_PARAMS))
    return str(p)


def test_no_command_prints_usage(capsys):
    assert main([]) == 1
    assert "usage:" in capsys.readouterr().err


def test_unknown_flag_exits_1(capsys):
    assert main(["regions", "--frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err


def test_unknown_subcommand_exits_1(capsys):
    assert main(["dance"]) == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--version"])
    assert ei.value.code == 0
    assert "swarmclt" in capsys.readouterr().out


def test_regions_writes_grid(out_dir, capsys):
    assert main(["regions", "--grid", "15", "--out", "r.csv"]) == 0
    lines = (out_dir / "r.csv").read_text().strip().splitlines()
    assert lines[0] == "omega,c,a3_ok,b2_ok"
    assert len(lines) == 1 + 15 * 15


def test_regions_default_name_under_out_root(out_dir):
    assert main(["regions", "--grid", "5"]) == 0
    assert (out_dir / "regions.csv").exists()


def test_run_writes_trajectory_and_prints_json(out_dir, params_file, capsys):
    assert main(["run", "--spec", params_file, "--out", "t.swc"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["run_id"]
    assert body["objective"] == "himmelblau"
    assert (out_dir / "t.swc").exists()


def test_run_seed_override_changes_digest(out_dir, params_file, capsys):
    assert main(["run", "--spec", params_file, "--out", "a.swc"]) == 0
    d1 = json.loads(capsys.readouterr().out)["digest"]
    assert main(["run", "--spec", params_file, "--out", "b.swc",
                 "--seed", "8"]) == 0
    d2 = json.loads(capsys.readouterr().out)["digest"]
    assert d1 != d2
    # same inputs reproduce the first digest
    assert main(["run", "--spec", params_file, "--out", "c.swc"]) == 0
    assert json.loads(capsys.readouterr().out)["digest"] == d1


def test_run_rejects_unknown_objective(out_dir, params_file, capsys):
    assert main(["run", "--spec", params_file, "--objective", "warp"]) == 1
    assert "error" in capsys.readouterr().err


def test_run_rejects_bad_override(out_dir, params_file):
    assert main(["run", "--spec", params_file, "--set", "omega=2.5",
                 "--out", "x.swc"]) == 1


def test_run_missing_spec_file(out_dir):
    assert main(["run", "--spec", "/definitely/not/here.json"]) == 1


def test_analyze_roundtrip(out_dir, params_file, capsys):
    assert main(["run", "--spec", params_file, "--out", "t.swc"]) == 0
    capsys.readouterr()
    assert main(["analyze", "t.swc", "--analysis", "SwarmFixedStep",
                 "--set", "fixed_n=60"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["theorem"] == 3
    assert doc["params"]["seed"] == 7


def test_analyze_out_file(out_dir, params_file, capsys):
    main(["run", "--spec", params_file, "--out", "t.swc"])
    capsys.readouterr()
    assert main(["analyze", "t.swc", "--analysis", "SwarmFixedStep",
                 "--set", "fixed_n=60", "--out", "stats.json"]) == 0
    doc = json.loads((out_dir / "stats.json").read_text())
    assert doc["theorem"] == 3


def test_analyze_missing_trajectory(out_dir, capsys):
    assert main(["analyze", "ghost.swc", "--analysis", "Oscillatory"]) == 1


def test_mc_bundled_fixture(out_dir, capsys):
    assert main(["mc", "--spec", "smoke_nonosc"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["name"] == "smoke_nonosc"
    assert "mu_x" in body["estimates"]
    res_dir = out_dir / body["output_dir"]
    assert (res_dir / "result.json").exists()
    assert (res_dir / "h_stats.csv").exists()
    assert (res_dir / "regions.csv").exists()


def test_mc_requires_spec(out_dir, capsys):
    assert main(["mc"]) == 1
    assert "requires --spec" in capsys.readouterr().err


def test_mc_unknown_spec_name(out_dir, capsys):
    assert main(["mc", "--spec", "never_heard_of_it"]) == 1


def test_mc_override_recorded_in_provenance(out_dir, capsys):
    assert main(["mc", "--spec", "smoke_nonosc", "--seed", "19",
                 "--out", "ovr"]) == 0
    capsys.readouterr()
    doc = json.loads((out_dir / "ovr" / "result.json").read_text())
    assert doc["spec"]["base"]["seed"] == 19
    assert doc["seeds"][0] == 19


def test_qqplot_from_mc_output(out_dir, capsys):
    assert main(["mc", "--spec", "smoke_swarm", "--out", "sw"]) == 0
    capsys.readouterr()
    code = main(["qqplot", str(out_dir / "sw" / "h_stats.csv"),
                 "--statistic", "log_dist_unfiltered",
                 "--out", "qq.csv", "--svg"])
    assert code == 0
    assert (out_dir / "qq.csv").exists()
    svg = (out_dir / "qq.svg").read_text()
    assert svg.startswith("<svg")
    err = capsys.readouterr().err
    assert "qq_corr=" in err


def test_qqplot_missing_column(out_dir, capsys):
    main(["mc", "--spec", "smoke_nonosc", "--out", "nn"])
    capsys.readouterr()
    assert main(["qqplot", str(out_dir / "nn" / "h_stats.csv"),
                 "--statistic", "a_statistic_we_never_computed"]) == 1


def test_dead_server_exits_2(out_dir, capsys):
    assert main(["--server", "http://127.0.0.1:9", "regions", "--grid", "3"]) == 2
    assert "cannot reach service" in capsys.readouterr().err
