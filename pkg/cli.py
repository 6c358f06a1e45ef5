"""Command-line front-end for the half-line toolkit.

Each subcommand builds its inputs from ``key=value`` specs, runs one
numerics entry point under the run ledger and writes a single tidy file
``<out>/<command>.<csv|json>``. Exit codes: 0 ok, 1 runtime error or failed
check, 2 invalid configuration, 3 numerical-quality warnings.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from run_state import RUN_STEPS
from src.config import _deep_merge, get_path, load_config, numerics
from src.det2 import det2_modified_jost
from src.errors import ConfigError, InvalidInputError, QualityFlag
from src.evolution import (
    PsiMode,
    convergence_test_ch1,
    evolution_model,
    evolve_fdtd,
    evolve_spectral,
    parse_data_spec,
    project_continuous,
)
from src.jost import WaveNumber, solve_psi
from src.logging_config import get_logger, set_level
from src.parallel import configure_threads
from src.pipeline import CHECKS, waveop_model
from src.potential import Potential, potential_from_kv
from src.spectral import bound_states, density_table, trace_identity_check
from src.utils import (
    add_global_args,
    add_potential_args,
    add_wavenumber_args,
    dumps_csv,
    dumps_json,
    kv_float,
    load_env,
    parse_float_list,
    parse_kv,
    save_text,
    to_jsonable,
)
from src.waveop import FhatProfile, oscillatory_bound_probe, probe_grids, waveop_convergence
from tasks import command_task, verify_all_task

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_FLAGGED = 3

COMMANDS = ("jost", "det2", "spectral", "bound-states", "trace-check", "evolve",
            "ch1-test", "waveop", "probe-osc", "verify-all")

OVERRIDE_KEYS = ("tol", "delta", "kmax", "R", "nodes", "dx", "dt")

# truncation radius used when a non-compact potential is given without --R
DEFAULT_R = 20.0


# -------------------------------------------------------------------------
# Run configuration
# -------------------------------------------------------------------------
@dataclass
class RunConfig:
    command: str
    potential: Optional[str] = None
    overrides: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'")
        unknown = sorted(set(self.overrides) - set(OVERRIDE_KEYS))
        if unknown:
            raise ConfigError(f"unknown override keys {unknown} (allowed: {', '.join(OVERRIDE_KEYS)})")
        for key, value in self.overrides.items():
            if not value > 0:
                raise ConfigError(f"override '{key}' must be positive, got {value}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        overrides: Dict[str, float] = {}
        if getattr(args, "set", None):
            values = parse_kv(args.set)
            unknown = sorted(set(values) - set(OVERRIDE_KEYS))
            if unknown:
                raise ConfigError(f"--set: unknown keys {unknown} (allowed: {', '.join(OVERRIDE_KEYS)})")
            overrides.update({key: kv_float(values, key) for key in values})
        for key in OVERRIDE_KEYS:
            value = getattr(args, key, None)
            if value is not None:
                overrides[key] = float(value)
        return cls(command=args.command, potential=getattr(args, "potential", None), overrides=overrides)

    def get(self, key: str, default: Optional[float] = None) -> Optional[float]:
        return self.overrides.get(key, default)

    def apply(self, cfg: Dict[str, Any]) -> Dict[str, Any]:
        """Fold numeric overrides into the numerics sections of cfg."""
        patch: Dict[str, Dict[str, Any]] = {}
        if "tol" in self.overrides:
            patch.setdefault("jost", {})["tol"] = self.overrides["tol"]
        if "delta" in self.overrides:
            patch.setdefault("spectral", {})["delta"] = self.overrides["delta"]
            patch.setdefault("evolution", {})["delta_sq"] = self.overrides["delta"] ** 2
        if "kmax" in self.overrides:
            for section in ("spectral", "evolution", "waveop"):
                patch.setdefault(section, {})["kmax"] = self.overrides["kmax"]
        if "nodes" in self.overrides:
            patch.setdefault("det2", {})["nodes"] = int(self.overrides["nodes"])
        if "dx" in self.overrides:
            patch.setdefault("evolution", {})["dx"] = self.overrides["dx"]
        return _deep_merge(cfg, {"numerics": patch}) if patch else cfg


@dataclass
class Emission:
    """A command result ready to serialize: flat records, or one JSON document."""

    records: Any
    header: Optional[Sequence[str]] = None
    default_format: str = "json"
    flags: List[QualityFlag] = field(default_factory=list)
    failed: bool = False


def emit(emission: Emission, fmt: Optional[str], out_dir: str, name: str) -> str:
    """Write ``<out_dir>/<name>.<fmt>`` atomically and return the path."""
    fmt = fmt or emission.default_format
    if fmt == "csv":
        records = to_jsonable(emission.records)
        if isinstance(records, dict):
            records = [records]
        header = list(emission.header) if emission.header else (list(records[0]) if records else [])
        rows = [[_csv_cell(r.get(h)) for h in header] for r in records]
        text = dumps_csv(header, rows)
    else:
        text = dumps_json(emission.records)
    path = os.path.join(out_dir, f"{name}.{fmt}")
    save_text(path, text)
    return path


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(",", ":"))
    return value


# -------------------------------------------------------------------------
# Command bodies
# -------------------------------------------------------------------------
def _radius(args: argparse.Namespace, q: Potential, rc: RunConfig) -> float:
    R = rc.get("R", getattr(args, "R", None))
    if R is not None:
        return float(R)
    return max(q.support_bound, 1e-6) if q.is_compact else DEFAULT_R


def _potential(rc: RunConfig, cfg: Dict[str, Any]) -> Potential:
    if not rc.potential:
        raise ConfigError(f"{rc.command} needs --potential")
    return potential_from_kv(rc.potential, cfg)


def cmd_jost(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    k = WaveNumber(complex(args.k_re, args.k_im))
    data = solve_psi(q, k, _radius(args, q, rc), cfg=cfg)
    return Emission(data.as_record())


def cmd_det2(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    k = WaveNumber(complex(args.k_re, args.k_im))
    result = det2_modified_jost(q, k.value, _radius(args, q, rc), cfg=cfg)
    record = {key: value for key, value in result.as_record().items() if key != "converged"}
    flags = []
    if not result.converged:
        flags.append(QualityFlag("det2", "node doubling did not settle", result.doubling_gap, None))
    return Emission(record, flags=flags)


def cmd_spectral(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    if args.knum < 2 or not 0 < args.kmin < args.grid_kmax:
        raise InvalidInputError(f"k grid needs 0 < kmin < kmax and knum >= 2, got "
                                f"[{args.kmin:g}, {args.grid_kmax:g}] x {args.knum}")
    ks = np.linspace(args.kmin, args.grid_kmax, args.knum).tolist()
    rows = density_table(q, ks, _radius(args, q, rc), cfg)
    return Emission(rows, header=("k", "E", "mu", "m_re", "m_im"), default_format="csv")


def cmd_bound_states(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    flags: List[QualityFlag] = []
    scan = bound_states(q, _radius(args, q, rc), args.which, cfg, flags)
    records = [{"index": i, "xi": xi, "E": -xi * xi, "which": scan.which} for i, xi in enumerate(scan)]
    return Emission(records, flags=flags)


def cmd_trace_check(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    flags: List[QualityFlag] = []
    record = trace_identity_check(q, _radius(args, q, rc), cfg=cfg, flags=flags)
    return Emission(record.as_record(), flags=flags)


def _data_and_model(q: Potential, text: str, t_max: float, R: float, cfg: Dict[str, Any],
                    flags: List[QualityFlag]):
    kind = parse_kv(text).get("kind")
    if kind == "bound_state":
        model = evolution_model(q, t_max, R, R=R, cfg=cfg, flags=flags)
        return parse_data_spec(text, model), model
    data = parse_data_spec(text)
    return data, evolution_model(q, t_max, data.support[1], R=R, cfg=cfg, flags=flags)


def cmd_evolve(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    flags: List[QualityFlag] = []
    R = _radius(args, q, rc)
    data, model = _data_and_model(q, args.data, args.t, R, cfg, flags)
    if args.method == "fdtd":
        ecfg = numerics(cfg, "evolution")
        dx = float(ecfg["dx"])
        dt = rc.get("dt", float(ecfg["cfl"]) * dx)
        if data.psi_mode == PsiMode.MINUS_I_SQRT_H or model.dirichlet_eigs:
            data = project_continuous(q, data, model, dx=dx, cfg=cfg)
        state = evolve_fdtd(q, data, args.t, dx, dt, cfg=cfg)
    else:
        state = evolve_spectral(q, data, args.t, model, cfg=cfg, flags=flags)
    header = ("x", "y_re", "y_im", "yt_re", "yt_im")
    return Emission([dict(zip(header, row)) for row in state.rows()], header=header,
                    default_format="csv", flags=flags)


def cmd_ch1_test(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    flags: List[QualityFlag] = []
    Tlist = parse_float_list(args.Tlist)
    lo, hi = parse_float_list(args.xwindow) if args.xwindow else (-5.0, 5.0)
    xwindow = np.linspace(lo, hi, args.xnum)
    data, model = _data_and_model(q, args.data, max(Tlist), _radius(args, q, rc), cfg, flags)
    errors = convergence_test_ch1(q, data, Tlist, xwindow, model, cfg)
    return Emission([{"T": T, "sup_error": e} for T, e in zip(Tlist, errors)], flags=flags)


def cmd_waveop(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    q = _potential(rc, cfg)
    flags: List[QualityFlag] = []
    fhat = FhatProfile.from_kv(args.fhat)
    tlist = parse_float_list(args.tlist)
    model = waveop_model(q, max(tlist), fhat, cfg, flags)
    records = waveop_convergence(q, fhat, tlist, model, cfg, flags, delta=args.zero_delta)
    return Emission(records, flags=flags)


def cmd_probe_osc(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    flags: List[QualityFlag] = []
    gammas, Ts = probe_grids(args.gamma_max, args.T_max, args.per_decade)
    record = oscillatory_bound_probe(gammas, Ts, cfg, flags)
    return Emission(record.as_record(), flags=flags)


def cmd_verify_all(args, rc: RunConfig, cfg: Dict[str, Any]) -> Emission:
    checks = args.checks.split(",") if args.checks else RUN_STEPS
    unknown = sorted(set(checks) - set(CHECKS))
    if unknown:
        raise ConfigError(f"unknown checks {unknown}")
    results = verify_all_task(args.run_name, cfg, checks)
    flags = [f for r in results for f in r.flags]
    print(format_table(results))
    records = [{"check": r.name, "passed": r.passed, "seconds": round(r.seconds, 3),
                "flags": len(r.flags), "metrics": r.metrics} for r in results]
    return Emission(records, header=("check", "passed", "seconds", "flags"), flags=flags,
                    failed=not all(r.passed for r in results))


def format_table(results) -> str:
    width = max([len(r.name) for r in results] + [5])
    lines = [f"{'check':<{width}}  result  seconds  flags"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'pass' if r.passed else 'FAIL':<6}  {r.seconds:7.1f}  {len(r.flags):5d}")
    return "\n".join(lines)


HANDLERS: Dict[str, Callable[..., Emission]] = {
    "jost": cmd_jost,
    "det2": cmd_det2,
    "spectral": cmd_spectral,
    "bound-states": cmd_bound_states,
    "trace-check": cmd_trace_check,
    "evolve": cmd_evolve,
    "ch1-test": cmd_ch1_test,
    "waveop": cmd_waveop,
    "probe-osc": cmd_probe_osc,
    "verify-all": cmd_verify_all,
}


# -------------------------------------------------------------------------
# Parser
# -------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halfwave", description="Half-line wave equation and scattering toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str, potential: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        add_global_args(p)
        p.add_argument("--set", help="Numeric overrides, e.g. 'tol=1e-9 kmax=30'.")
        if potential:
            add_potential_args(p)
        return p

    p = command("jost", "Jost data j, j_m, a, b at one wavenumber.")
    add_wavenumber_args(p)
    p.add_argument("--tol", type=float, help="Picard convergence tolerance.")

    p = command("det2", "Modified Jost function from the regularized determinant.")
    add_wavenumber_args(p)
    p.add_argument("--nodes", type=int, help="Initial Nystrom node count (>= 64).")

    p = command("spectral", "Spectral density and m-function on a k grid.")
    p.add_argument("--kmin", type=float, default=0.1)
    p.add_argument("--kmax", dest="grid_kmax", type=float, default=10.0)
    p.add_argument("--knum", type=int, default=100)
    p.add_argument("--R", type=float)

    p = command("bound-states", "Negative eigenvalues -xi^2 of the truncated problem.")
    p.add_argument("--R", type=float)
    p.add_argument("--which", choices=("line_glued", "halfline_dirichlet"), default="line_glued")

    p = command("trace-check", "First trace identity against (1/8) int q^2.")
    p.add_argument("--R", type=float)

    p = command("evolve", "Evolve Cauchy data to time t.")
    p.add_argument("--data", required=True, help="Cauchy data, e.g. 'kind=ricker center=3 sigma=0.5'.")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--method", choices=("spectral", "fdtd"), default="spectral")
    p.add_argument("--R", type=float)
    p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)

    p = command("ch1-test", "Sup error against the asymptotic profile along x = T + s.")
    p.add_argument("--data", required=True)
    p.add_argument("--Tlist", default="10,20,40")
    p.add_argument("--xwindow", help="Window 'lo,hi' in s (default -5,5).")
    p.add_argument("--xnum", type=int, default=201)
    p.add_argument("--R", type=float)

    p = command("waveop", "Cauchy test of the modified wave operator.")
    p.add_argument("--fhat", default="k0=3 width=2 center=10", help="Band-limited profile 'k0=3 width=2 center=10'.")
    p.add_argument("--tlist", default="10,20,40,80")
    p.add_argument("--zero-delta", dest="zero_delta", type=float, default=0.01)

    p = command("probe-osc", "Uniform bound of the oscillatory principal value.", potential=False)
    p.add_argument("--gamma-max", dest="gamma_max", type=float, default=1e3)
    p.add_argument("--T-max", dest="T_max", type=float, default=1e4)
    p.add_argument("--per-decade", dest="per_decade", type=int, default=1)

    p = command("verify-all", "Run the acceptance checks and print a pass/fail table.", potential=False)
    p.add_argument("--checks", help="Comma separated subset of checks.")
    p.add_argument("--run-name", dest="run_name", default="verify-all")
    return parser


# -------------------------------------------------------------------------
# Entry point
# -------------------------------------------------------------------------
def run(args: argparse.Namespace) -> int:
    """Execute one parsed command and return its exit status."""
    try:
        cfg = load_config(args.config, strict=True) if args.config else load_config()
        rc = RunConfig.from_args(args)
        cfg = rc.apply(cfg)
        configure_threads(args.threads or cfg.get("threads", 1))
        out_dir = args.out or get_path(cfg, "output_dir")
        name = rc.command
        handler = HANDLERS[name]

        if rc.command == "verify-all":
            emission = handler(args, rc, cfg)
        else:
            emission = command_task(f"cli-{name}", name, handler, args, rc, cfg, cfg=cfg)
        path = emit(emission, args.format, out_dir, name)

        if args.seedless:
            with open(path, "rb") as f:
                first = f.read()
            again = handler(args, rc, cfg)
            path = emit(again, args.format, out_dir, name)
            with open(path, "rb") as f:
                if f.read() != first:
                    logger.error(f"{name}: re-run output differs from the first run")
                    print(f"error: {name} output is not deterministic", file=sys.stderr)
                    return EXIT_FAILED

        logger.info(f"{name}: wrote {path}")
        if emission.failed:
            return EXIT_FAILED
        if emission.flags:
            for flag in emission.flags:
                print(f"warning: [{flag.source}] {flag.message}", file=sys.stderr)
            return EXIT_FLAGGED
        return EXIT_OK
    except (ConfigError, InvalidInputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"{args.command} failed")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_level("INFO")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
