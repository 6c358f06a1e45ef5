import copy
import json
import os
from typing import Any, Dict, Optional

try:
    import yaml  # type: ignore
except Exception:  # pragma: no cover - optional dependency
    yaml = None  # type: ignore

from src.errors import ConfigError


DEFAULT_CONFIG_PATHS = (
    "config.json",
    "config.yaml",
    "config.yml",
)


_DEFAULTS: Dict[str, Any] = {
    "threads": int(os.environ.get("HALFWAVE_THREADS", "1") or 1),
    "numerics": {
        "potential": {
            "quad_tol": 1e-10,
            "max_halvings": 12,
            "tail_start": 1000.0,
            "max_panel": 1.0,
        },
        "jost": {
            "tol": 1e-10,
            "hmax": 0.01,
            "step_fraction": 0.05,
            "phase_step": 0.1,
            "richardson_levels": 3,
            "max_iterations": 200,
            "block_mass": 0.5,
            "block_growth": 20.0,
            "k_cutoff": 1e-3,
        },
        "det2": {
            "nodes": 64,
            "max_nodes": 2048,
            "doubling_tol": 1e-8,
            "rule": "trapezoid",
        },
        "spectral": {
            "delta": 0.05,
            "kmax": 40.0,
            "panel_width": 1.0,
            "panel_order": 15,
            "ode_rtol": 1e-10,
            "ode_atol": 1e-12,
            "bisect_xtol": 1e-10,
            "scan_points": 120,
            "doubling_tol": 1e-5,
            "plancherel_limit": 0.01,
            "tail_limit": 0.05,
        },
        "evolution": {
            "delta_sq": 2.5e-3,
            "kmax": 20.0,
            "dx": 0.005,
            "cfl": 0.9,
            "padding": 5.0,
            "excluded_mass_limit": 0.01,
        },
        "waveop": {
            "k_panels": 2000,
            "x_step": 0.02,
            "x_halfwidth": 30.0,
            "kmax": 10.0,
            "vp_deltas": [1e-2, 5e-3, 2.5e-3],
            "gl_order": 15,
            "cesaro_points": 17,
        },
    },
    "paths": {
        "output_dir": "output",
        "runs_dir": os.path.join("output", "runs"),
    },
}


def _deep_merge(a: Dict[str, Any], b: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(a)
    for k, v in (b or {}).items():
        if k in out and isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _load_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e.msg}", lineno=e.lineno) from e


def _load_yaml(path: str) -> Dict[str, Any]:
    if yaml is None:
        raise RuntimeError("YAML support not available. Install pyyaml or use JSON config.")
    with open(path, "r", encoding="utf-8") as f:
        try:
            return yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            lineno = mark.line + 1 if mark is not None else None
            raise ConfigError(f"{path}: {e}", lineno=lineno) from e


def _check_known_keys(file_cfg: Dict[str, Any], path: str) -> None:
    unknown = sorted(set(file_cfg) - set(_DEFAULTS))
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {unknown}")
    for section, values in (file_cfg.get("numerics") or {}).items():
        if section not in _DEFAULTS["numerics"]:
            raise ConfigError(f"{path}: unknown numerics section '{section}'")
        bad = sorted(set(values or {}) - set(_DEFAULTS["numerics"][section]))
        if bad:
            raise ConfigError(f"{path}: unknown keys in numerics.{section}: {bad}")


def load_config(config_path: Optional[str] = None, strict: bool = False) -> Dict[str, Any]:
    """Load central configuration. Supports JSON or YAML.

    Resolution order:
      1) explicit config_path if provided
      2) search DEFAULT_CONFIG_PATHS in CWD
      3) fall back to in-code defaults

    With ``strict`` set, a malformed or unreadable file raises ConfigError
    instead of being skipped.
    """
    cfg: Dict[str, Any] = copy.deepcopy(_DEFAULTS)

    def try_merge(path: str) -> bool:
        nonlocal cfg
        if not os.path.exists(path):
            if strict and path == config_path:
                raise ConfigError(f"config file not found: {path}")
            return False
        try:
            if path.endswith(".json"):
                file_cfg = _load_json(path)
            elif path.endswith(".yaml") or path.endswith(".yml"):
                file_cfg = _load_yaml(path)
            else:
                if strict:
                    raise ConfigError(f"unsupported config format: {path}")
                return False
            if isinstance(file_cfg, dict):
                if strict:
                    _check_known_keys(file_cfg, path)
                cfg = _deep_merge(cfg, file_cfg)
                return True
            if strict:
                raise ConfigError(f"{path}: top level must be a mapping")
        except ConfigError:
            if strict:
                raise
        except Exception:
            if strict:
                raise
            # Ignore malformed configs and keep defaults
        return False

    if config_path:
        try_merge(config_path)
    else:
        for p in DEFAULT_CONFIG_PATHS:
            if try_merge(p):
                break

    # Environment overrides for convenience
    if os.environ.get("HALFWAVE_THREADS"):
        cfg["threads"] = int(os.environ["HALFWAVE_THREADS"])
    if os.environ.get("HALFWAVE_OUTPUT_DIR"):
        cfg.setdefault("paths", {})["output_dir"] = os.environ["HALFWAVE_OUTPUT_DIR"]

    return cfg


def numerics(cfg: Optional[Dict[str, Any]], section: str) -> Dict[str, Any]:
    """Return one numerics section merged over its defaults."""
    base = _DEFAULTS["numerics"][section]
    if not cfg:
        return copy.deepcopy(base)
    return _deep_merge(base, (cfg.get("numerics") or {}).get(section) or {})


def get_path(cfg: Dict[str, Any], key: str) -> str:
    return cfg.get("paths", {}).get(key) or _DEFAULTS["paths"].get(key, "")
