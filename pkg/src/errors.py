"""Exception types and quality flags shared by the numerics modules."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


class HalfwaveError(Exception):
    """Base class for toolkit errors."""


class InvalidInputError(HalfwaveError, ValueError):
    """An operation was called outside its preconditions."""


class ConvergenceError(HalfwaveError, RuntimeError):
    """An iteration, quadrature refinement or ODE solve did not converge."""


class ConfigError(InvalidInputError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass
class QualityFlag:
    """A numerical-quality warning attached to a result rather than raised."""

    source: str
    message: str
    value: Optional[float] = None
    threshold: Optional[float] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "message": self.message,
            "value": self.value,
            "threshold": self.threshold,
            **({"meta": self.meta} if self.meta else {}),
        }


def raise_flag(flags: Optional[List[QualityFlag]], flag: QualityFlag, logger=None) -> None:
    if logger is not None:
        logger.warning(f"[{flag.source}] {flag.message}")
    if flags is not None:
        flags.append(flag)
