"""Run ledger for acceptance and CLI runs.

One JSON state file per run under ``paths.runs_dir``. Each acceptance check
(or CLI command) is a step with its own status, timestamps, error and
outputs; every status change is appended to the run history. Emitted result
files never carry timestamps, only this ledger does.
"""

import json
import os
import re
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, Optional

from src.config import get_path, load_config

RUN_STEPS = [
    "jost_oracle",
    "route_equivalence",
    "radius_derivative",
    "scattering_identities",
    "trace_identity",
    "plancherel",
    "evolution_oracle",
    "asymptotic_profile",
    "wave_operator",
    "oscillatory_bound",
    "weak_convergence",
    "ballistic_mass",
]


def _now_iso() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def _runs_dir(cfg: Optional[Dict[str, Any]] = None) -> str:
    path = get_path(cfg or load_config(), "runs_dir")
    os.makedirs(path, exist_ok=True)
    return path


def get_run_path(run_name: str, cfg: Optional[Dict[str, Any]] = None) -> str:
    safe_name = re.sub(r"[^a-zA-Z0-9_-]", "_", run_name)
    return os.path.join(_runs_dir(cfg), f"{safe_name}.json")


def _empty_step() -> Dict[str, Any]:
    return {"status": "not_started", "started_at": None, "finished_at": None, "error": None, "outputs": {}}


def _default_state(run_name: str, steps: Iterable[str]) -> Dict[str, Any]:
    now = _now_iso()
    return {
        "run": run_name,
        "created_at": now,
        "updated_at": now,
        "steps": {step: _empty_step() for step in steps},
        "history": [],
    }


def save_run(run_name: str, state: Dict[str, Any], cfg: Optional[Dict[str, Any]] = None) -> None:
    """Write the run state atomically."""
    path = get_run_path(run_name, cfg)
    tmp_path = path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8") as f:
        json.dump(state, f, indent=2, ensure_ascii=False)
    os.replace(tmp_path, path)


def load_run(run_name: str, cfg: Optional[Dict[str, Any]] = None) -> Optional[Dict[str, Any]]:
    path = get_run_path(run_name, cfg)
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    return None


def init_run(run_name: str, steps: Iterable[str] = RUN_STEPS, cfg: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Return the run state, creating it on first use."""
    state = load_run(run_name, cfg)
    if state is None:
        state = _default_state(run_name, steps)
        save_run(run_name, state, cfg)
    return state


def update_step(
    run_name: str,
    step_key: str,
    *,
    status: Optional[str] = None,
    outputs: Optional[Dict[str, Any]] = None,
    error: Optional[str] = None,
    cfg: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Update status, outputs and/or error of one step of a run.

    Parameters
    ----------
    run_name: str
        Ledger identifier.
    step_key: str
        Check or command name; unknown keys are registered on the fly.
    status: Optional[str]
        "running", "success", "failed" or "flagged".
    outputs: Optional[dict]
        Metrics or emitted file paths, merged into the step outputs.
    error: Optional[str]
        Error message; marks the step failed when no status is given.

    Returns
    -------
    dict
        The updated run state.
    """
    state = init_run(run_name, cfg=cfg)
    steps = state.setdefault("steps", {})
    step = steps.setdefault(step_key, _empty_step())
    now = _now_iso()
    prev_status = step.get("status")
    if status:
        step["status"] = status
        if status == "running":
            step["started_at"] = now
            step["finished_at"] = None
            step["error"] = None
        if status in {"success", "failed", "flagged"}:
            step["finished_at"] = now
        state.setdefault("history", []).append({
            "time": now,
            "event": f"step:{step_key}:{status}",
            "meta": {"prev": prev_status},
        })
    if outputs:
        step.setdefault("outputs", {}).update(outputs)
    if error:
        step["error"] = error
        if not status:
            step["status"] = "failed"
            step["finished_at"] = now
        state.setdefault("history", []).append({
            "time": now,
            "event": f"step:{step_key}:error",
            "meta": {"error": error[:500]},
        })
    state["updated_at"] = now
    save_run(run_name, state, cfg)
    return state


def summary(state: Dict[str, Any]) -> Dict[str, str]:
    """step -> status."""
    return {name: step.get("status", "not_started") for name, step in state.get("steps", {}).items()}
