import pytest

from run_state import load_run, summary
from src.errors import QualityFlag
from src.pipeline import (
    CHECKS,
    CheckResult,
    check_ballistic_mass,
    check_jost_oracle,
    check_oscillatory_bound,
    check_radius_derivative,
    check_route_equivalence,
    check_trace_identity,
    run_check,
    to_status,
)
from tasks import run_check_task, verify_all_task


def test_check_table_matches_ledger_steps():
    from run_state import RUN_STEPS

    assert set(CHECKS) == set(RUN_STEPS)


def test_to_status():
    assert to_status(CheckResult("x", True)) == "success"
    assert to_status(CheckResult("x", True, flags=[QualityFlag("x", "warn")])) == "flagged"
    assert to_status(CheckResult("x", False, flags=[QualityFlag("x", "warn")])) == "failed"


def test_check_record():
    rec = CheckResult("x", True, {"gap": 1e-9}, [QualityFlag("x", "warn", 2.0, 1.0)], 1.23456).as_record()
    assert rec["check"] == "x"
    assert rec["seconds"] == 1.235
    assert rec["flags"][0]["source"] == "x"


def test_jost_oracle_check():
    result = check_jost_oracle()
    assert result.passed, result.metrics


def test_route_equivalence_check():
    result = check_route_equivalence()
    assert result.passed, result.metrics


def test_radius_derivative_check():
    result = check_radius_derivative()
    assert result.passed, result.metrics


def test_run_check_times_itself():
    result = run_check("jost_oracle")
    assert result.seconds > 0.0


def test_check_task_records_ledger(workdir):
    result = run_check_task("unit", "jost_oracle")
    state = load_run("unit")
    assert summary(state)["jost_oracle"] == to_status(result)
    assert state["steps"]["jost_oracle"]["outputs"]["passed"] is True
    assert summary(state)["plancherel"] == "not_started"
    with pytest.raises(KeyError):
        run_check_task("unit", "no_such_check")


def test_verify_all_reports_raising_check(workdir, monkeypatch):
    def boom(cfg=None, flags=None):
        raise RuntimeError("solver exploded")

    monkeypatch.setitem(CHECKS, "jost_oracle", boom)
    results = verify_all_task("unit", checks=["jost_oracle"])
    assert not results[0].passed
    assert "solver exploded" in results[0].metrics["error"]
    step = load_run("unit")["steps"]["jost_oracle"]
    assert step["status"] == "failed"
    assert "solver exploded" in step["error"]


@pytest.mark.slow
def test_trace_identity_check():
    result = check_trace_identity()
    assert result.passed, result.metrics


@pytest.mark.slow
def test_oscillatory_bound_check():
    result = check_oscillatory_bound()
    assert result.passed, result.metrics


@pytest.mark.slow
@pytest.mark.parametrize("name", [
    "scattering_identities",
    "plancherel",
    "weak_convergence",
    "evolution_oracle",
    "asymptotic_profile",
    "ballistic_mass",
    "wave_operator",
])
def test_acceptance_check(name):
    result = run_check(name)
    assert result.passed, result.metrics
    assert to_status(result) in ("success", "flagged")


@pytest.mark.slow
def test_ballistic_mass_covers_oscillatory_tail():
    result = check_ballistic_mass()
    assert 0.49 <= result.metrics["free_split"] <= 0.52
    osc = [key for key in result.metrics if key.startswith("oscillatory_decay")]
    assert len(osc) == 1
    assert result.metrics[osc[0]]["ac_fraction"]["t=40"] >= 0.95
