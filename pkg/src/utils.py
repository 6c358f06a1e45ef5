import argparse
import csv
import io
import json
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError

try:
    from dotenv import load_dotenv  # type: ignore
except Exception:
    # Allow running without python-dotenv installed (best effort)
    def load_dotenv(*args, **kwargs):  # type: ignore
        return False


# ---------------
# Argparse helpers
# ---------------
def add_potential_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument(
        "--potential",
        required=required,
        help="Potential as key=value pairs, e.g. 'kind=square_well depth=-4 width=1'.",
    )


def add_wavenumber_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k-re", dest="k_re", type=float, required=True, help="Real part of k.")
    parser.add_argument("--k-im", dest="k_im", type=float, default=0.0, help="Imaginary part of k.")
    parser.add_argument("--R", dest="R", type=float, required=True, help="Truncation radius.")


def add_global_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="Output directory (default from config paths.output_dir).")
    parser.add_argument("--format", choices=("csv", "json"), default=None, help="Emission format.")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for k-grid sweeps.")
    parser.add_argument("--seedless", action="store_true", help="Run twice and assert byte-identical output.")
    parser.add_argument("--config", help="Path to central config (json|yaml).")
    parser.add_argument("--verbose", action="store_true", help="Log run-level progress.")


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"expected a comma separated list of numbers, got '{text}'") from e


# -----------------------
# Key=value spec parsing
# -----------------------
def parse_kv(text: str, allowed: Optional[Iterable[str]] = None) -> Dict[str, str]:
    """Parse 'kind=square_well depth=-4 width=1' into a dict of strings."""
    out: Dict[str, str] = {}
    for pos, token in enumerate(text.split()):
        if "=" not in token:
            raise ConfigError(f"token {pos + 1} ('{token}') is not key=value")
        key, value = token.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"token {pos + 1} ('{token}') has an empty key")
        if key in out:
            raise ConfigError(f"token {pos + 1}: duplicate key '{key}'")
        out[key] = value.strip()
    if allowed is not None:
        unknown = sorted(set(out) - set(allowed))
        if unknown:
            raise ConfigError(f"unknown keys {unknown}")
    return out


def kv_float(values: Dict[str, str], key: str, default: Optional[float] = None) -> float:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    try:
        return float(values[key])
    except ValueError as e:
        raise ConfigError(f"key '{key}' expects a number, got '{values[key]}'") from e


def load_xq_csv(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Load a two-column sampled potential with header 'x,q'."""
    with open(path, "r", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "q"]:
            raise ConfigError(f"{path}: expected header 'x,q'", lineno=1)
        xs: List[float] = []
        qs: List[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}: expected two columns", lineno=lineno)
            try:
                xs.append(float(row[0]))
                qs.append(float(row[1]))
            except ValueError as e:
                raise ConfigError(f"{path}: non-numeric entry", lineno=lineno) from e
    return np.asarray(xs, dtype=float), np.asarray(qs, dtype=float)


# --------------------
# Serialization
# --------------------
def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex values; complex keys split into _re/_im."""
    if isinstance(value, dict):
        out: Dict[str, Any] = {}
        for k, v in value.items():
            if isinstance(v, (complex, np.complexfloating)):
                out[f"{k}_re"] = float(np.real(v))
                out[f"{k}_im"] = float(np.imag(v))
            else:
                out[k] = to_jsonable(v)
        return out
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"re": value.real.tolist(), "im": value.imag.tolist()}
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(np.real(value)), "im": float(np.imag(value))}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp_path, path)


def dumps_json(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=False) + "\n"


def dumps_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(float(v), ".12g") if isinstance(v, (float, int, np.floating, np.integer)) else v for v in row])
    return buf.getvalue()


def load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_json(path: str, data: Any) -> None:
    _atomic_write(path, dumps_json(data))


def save_text(path: str, text: str) -> None:
    _atomic_write(path, text)


def load_env(env_file: Optional[str] = None) -> None:
    """Load environment variables from a .env file if present, no-op if missing."""
    # Load order: explicit env_file > default .env
    if env_file and os.path.exists(env_file):
        load_dotenv(env_file)
    else:
        load_dotenv()
