import json

import pytest

from cli import EXIT_CONFIG, EXIT_FLAGGED, EXIT_OK, RunConfig, main
from run_state import load_run
from src.config import load_config, numerics
from src.errors import ConfigError

WELL3 = "kind=square_well depth=-3 width=1"


def _json(path):
    return json.loads(path.read_text())


def test_jost_free(workdir):
    out = workdir / "res"
    assert main(["jost", "--potential", "kind=zero", "--k-re", "1", "--R", "1", "--out", str(out)]) == EXIT_OK
    rec = _json(out / "jost.json")
    assert rec["jm_re"] == 1.0 and rec["jm_im"] == 0.0
    assert rec["b_re"] == 0.0
    assert load_run("cli-jost")["steps"]["jost"]["status"] == "success"


def test_det2_record(workdir):
    out = workdir / "res"
    code = main(["det2", "--potential", WELL3, "--k-re", "1", "--k-im", "0.5", "--R", "1", "--out", str(out)])
    assert code == EXIT_OK
    rec = _json(out / "det2.json")
    assert "converged" not in rec
    assert rec["nodes_used"] >= 64


def test_spectral_csv(workdir):
    out = workdir / "res"
    code = main(["spectral", "--potential", WELL3, "--kmin", "0.5", "--kmax", "2", "--knum", "4", "--out", str(out)])
    assert code == EXIT_OK
    lines = (out / "spectral.csv").read_text().splitlines()
    assert lines[0] == "k,E,mu,m_re,m_im"
    assert len(lines) == 5
    assert lines[1].startswith("0.5,0.25,")


def test_bound_states(workdir):
    out = workdir / "res"
    code = main(["bound-states", "--potential", "kind=square_well depth=-4 width=1",
                 "--which", "halfline_dirichlet", "--out", str(out)])
    assert code == EXIT_OK
    records = _json(out / "bound-states.json")
    assert len(records) == 1
    assert records[0]["which"] == "halfline_dirichlet"
    assert records[0]["E"] == pytest.approx(-records[0]["xi"] ** 2)


def test_trace_check_shallow_well(workdir, capsys):
    out = workdir / "res"
    code = main(["trace-check", "--potential", "kind=square_well depth=-0.1 width=1",
                 "--set", "kmax=10", "--out", str(out)])
    assert code == EXIT_FLAGGED
    assert "threshold state" in capsys.readouterr().err
    rec = _json(out / "trace-check.json")
    assert rec["rhs"] == pytest.approx(1.25e-3)
    lhs = rec["lhs_continuum"] + rec["lhs_points"]
    assert abs(lhs - rec["rhs"]) < 0.05 * rec["rhs"]
    assert load_run("cli-trace-check")["steps"]["trace-check"]["status"] == "flagged"


def test_evolve_fdtd_csv(workdir):
    out = workdir / "res"
    code = main(["evolve", "--potential", "kind=zero", "--data", "kind=ricker center=3 sigma=0.5",
                 "--t", "1", "--method", "fdtd", "--set", "dx=0.01", "--out", str(out)])
    assert code == EXIT_OK
    lines = (out / "evolve.csv").read_text().splitlines()
    assert lines[0] == "x,y_re,y_im,yt_re,yt_im"
    assert lines[1].startswith("0,0,")


def test_seedless_rerun_is_identical(workdir):
    out = workdir / "res"
    args = ["jost", "--potential", WELL3, "--k-re", "2", "--R", "1", "--out", str(out), "--seedless"]
    assert main(args) == EXIT_OK


def test_unknown_override_is_config_error(workdir, capsys):
    code = main(["jost", "--potential", "kind=zero", "--k-re", "1", "--R", "1", "--set", "speed=2"])
    assert code == EXIT_CONFIG
    assert "speed" in capsys.readouterr().err


def test_bad_config_reports_line(workdir, capsys):
    path = workdir / "bad.json"
    path.write_text('{\n  "threads": 1,\n  oops\n}\n')
    code = main(["jost", "--potential", "kind=zero", "--k-re", "1", "--R", "1", "--config", str(path)])
    assert code == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_invalid_wavenumber_fails_step(workdir):
    code = main(["jost", "--potential", WELL3, "--k-re", "0", "--R", "1", "--out", str(workdir / "res")])
    assert code == EXIT_CONFIG
    step = load_run("cli-jost")["steps"]["jost"]
    assert step["status"] == "failed"
    assert step["error"]


def test_bad_potential_spec(workdir):
    code = main(["jost", "--potential", "kind=square_well depth=-3", "--k-re", "1", "--R", "1",
                 "--out", str(workdir / "res")])
    assert code == EXIT_CONFIG


def test_probe_osc_small_grid(workdir):
    out = workdir / "res"
    code = main(["probe-osc", "--gamma-max", "10", "--T-max", "10", "--out", str(out)])
    assert code in (EXIT_OK, EXIT_FLAGGED)
    rec = _json(out / "probe-osc.json")
    assert rec["max_abs"] > 0.0
    assert len(rec["argmax"]) == 2


def test_verify_all_subset(workdir, capsys):
    out = workdir / "res"
    code = main(["verify-all", "--checks", "jost_oracle,radius_derivative", "--run-name", "ci", "--out", str(out)])
    assert code == EXIT_OK
    assert "jost_oracle" in capsys.readouterr().out
    records = _json(out / "verify-all.json")
    assert [r["check"] for r in records] == ["jost_oracle", "radius_derivative"]
    assert load_run("ci")["steps"]["jost_oracle"]["status"] == "success"
    assert main(["verify-all", "--checks", "nope"]) == EXIT_CONFIG


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("launch")
    with pytest.raises(ConfigError):
        RunConfig("jost", overrides={"tol": -1.0})
    with pytest.raises(ConfigError):
        RunConfig("jost", overrides={"speed": 1.0})


def test_run_config_apply(workdir):
    cfg = RunConfig("spectral", overrides={"kmax": 12.0, "delta": 0.1, "nodes": 128}).apply(load_config())
    assert numerics(cfg, "spectral")["kmax"] == 12.0
    assert numerics(cfg, "waveop")["kmax"] == 12.0
    assert numerics(cfg, "evolution")["delta_sq"] == pytest.approx(0.01)
    assert numerics(cfg, "spectral")["delta"] == 0.1
    assert numerics(cfg, "det2")["nodes"] == 128
    assert numerics(cfg, "spectral")["panel_order"] == 15
