"""Task wrappers that keep the run ledger in step with the work.

Every wrapper follows the same pattern: mark the step running, do the work,
mark it success (or flagged, when quality warnings were collected), or mark
it failed with the error and re-raise.
"""

from typing import Any, Callable, Dict, Iterable, List, Optional

from run_state import init_run, update_step
from src.logging_config import get_logger
from src.pipeline import CHECKS, CheckResult, run_check, to_status
from src.utils import to_jsonable

logger = get_logger(__name__)


def run_check_task(run_name: str, check: str, cfg: Optional[Dict[str, Any]] = None) -> CheckResult:
    if check not in CHECKS:
        raise KeyError(f"unknown check '{check}'")
    try:
        init_run(run_name, cfg=cfg)
        update_step(run_name, check, status="running", cfg=cfg)
        result = run_check(check, cfg)
        update_step(run_name, check, status=to_status(result), outputs=to_jsonable(result.as_record()), cfg=cfg)
        return result
    except Exception as e:
        try:
            update_step(run_name, check, status="failed", error=str(e), cfg=cfg)
        except Exception:
            pass
        raise


def verify_all_task(run_name: str, cfg: Optional[Dict[str, Any]] = None,
                    checks: Optional[Iterable[str]] = None) -> List[CheckResult]:
    """Run the acceptance table; a check that raises is recorded and reported as failed."""
    results: List[CheckResult] = []
    for name in checks or CHECKS:
        try:
            results.append(run_check_task(run_name, name, cfg))
        except Exception as e:
            logger.error(f"check {name} raised: {e}")
            results.append(CheckResult(name, False, {"error": str(e)}))
    return results


def command_task(run_name: str, command: str, fn: Callable[..., Any], *args: Any,
                 cfg: Optional[Dict[str, Any]] = None, **kwargs: Any) -> Any:
    """Run one CLI command body under the ledger."""
    try:
        init_run(run_name, steps=(), cfg=cfg)
        update_step(run_name, command, status="running", cfg=cfg)
        out = fn(*args, **kwargs)
        status = "flagged" if getattr(out, "flags", None) else "success"
        update_step(run_name, command, status=status, cfg=cfg)
        return out
    except Exception as e:
        try:
            update_step(run_name, command, status="failed", error=str(e), cfg=cfg)
        except Exception:
            pass
        raise
