# potential.py
"""
Potentials on the half-line
===========================

Construction, sampling, truncation and integration of real potentials q(x),
x >= 0, together with the scalar functionals of q used by every other
module (phase, running integrals, L2 moment).

Kinds
-----
zero                 q = 0
square_well          q = depth on [0, width), 0 beyond
sampled              linear interpolation of (x, q) samples, 0 beyond the last
oscillatory_decay    q = c cos(x^a) / (1+x)^b,  b > 1/2
power_decay          q = c / (1+x)^b,           b > 1/2

Quadrature
----------
All integrals of q use composite 15-point Gauss-Legendre panels whose edges
sit on the breakpoints of q and, for oscillatory kinds, on the zeros of
cos(x^a) and cos(2x^a), so that q, q^2 and |q| are smooth on every panel.
Panels are halved globally until two passes agree to the quadrature
tolerance.

The L2 moment of a non-compact potential is the quadrature up to
``tail_start`` plus an analytic tail from the decay envelope (mean value of
cos^2 and one integration-by-parts term for the oscillatory kind).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import numerics
from src.errors import ConfigError, ConvergenceError, InvalidInputError
from src.logging_config import get_logger
from src.utils import kv_float, load_xq_csv, parse_kv

logger = get_logger(__name__)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)
_GL5_X, _GL5_W = np.polynomial.legendre.leggauss(5)

_QUAD_DEFAULTS = numerics(None, "potential")


class DecayTag(str, Enum):
    COMPACT = "compact"
    L1 = "l1"
    L2_OSCILLATORY = "l2_oscillatory"
    L2_MONOTONE = "l2_monotone"


_KIND_KEYS: Dict[str, Tuple[str, ...]] = {
    "zero": (),
    "square_well": ("depth", "width"),
    "sampled": ("path",),
    "oscillatory_decay": ("c", "a", "b"),
    "power_decay": ("c", "b"),
}


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    params: Tuple[Tuple[str, float], ...] = ()
    samples: Optional[Tuple[Tuple[float, float], ...]] = None

    def param(self, key: str) -> float:
        return dict(self.params)[key]

    @classmethod
    def from_kv(cls, text: str) -> "PotentialSpec":
        """Parse ``kind=square_well depth=-4 width=1``; sampled kinds read ``path=<csv>``."""
        values = parse_kv(text)
        kind = values.pop("kind", None)
        if kind is None:
            raise ConfigError("potential spec needs 'kind='")
        if kind not in _KIND_KEYS:
            raise ConfigError(f"unknown potential kind '{kind}' (expected one of {sorted(_KIND_KEYS)})")
        unknown = sorted(set(values) - set(_KIND_KEYS[kind]))
        if unknown:
            raise ConfigError(f"unknown keys {unknown} for potential kind '{kind}'")
        if kind == "sampled":
            if "path" not in values:
                raise ConfigError("sampled potential needs 'path=<csv>'")
            xs, qs = load_xq_csv(values["path"])
            return cls(kind=kind, samples=tuple(zip(xs.tolist(), qs.tolist())))
        params = tuple((key, kv_float(values, key)) for key in _KIND_KEYS[kind])
        return cls(kind=kind, params=params)

    def to_kv(self) -> str:
        parts = [f"kind={self.kind}"] + [f"{k}={v:g}" for k, v in self.params]
        if self.samples is not None:
            parts.append(f"samples={len(self.samples)}")
        return " ".join(parts)


@dataclass(frozen=True)
class Potential:
    """A real potential on [0, inf) with the metadata the solvers need.

    ``evaluator`` is vectorized and returns 0 beyond ``support_bound``.
    ``breakpoints`` are the points where q may jump; ``smooth_nodes(a, b)``
    lists extra interior points where q or |q| lose smoothness (zeros of the
    oscillating factor).
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_bound: float
    decay_tag: DecayTag
    l2_moment: float
    breakpoints: Tuple[float, ...] = ()
    max_abs: float = 0.0
    label: str = ""
    envelope: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smooth_nodes: Optional[Callable[[float, float], np.ndarray]] = None
    wavelength: Optional[Callable[[float], float]] = None
    tail_l2: Optional[Callable[[float], float]] = None
    is_zero: bool = False

    def __call__(self, x: Any) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))

    @property
    def is_compact(self) -> bool:
        return self.decay_tag == DecayTag.COMPACT

    def length_scale(self, R: float) -> float:
        """Smallest length over which q changes appreciably on [0, R]."""
        if self.wavelength is None:
            return math.inf
        return self.wavelength(R)


# -------------------------------------------------------------------------
# Quadrature
# -------------------------------------------------------------------------
def _subdivide(edges: np.ndarray, counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=int)
    starts = np.repeat(edges[:-1], counts)
    widths = np.repeat(np.diff(edges) / counts, counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return np.append(starts + offsets * widths, edges[-1])


def panel_edges(q: Potential, a: float, b: float, max_panel: Optional[float] = None) -> np.ndarray:
    """Panel edges on [a, b] aligned with breakpoints and oscillation nodes."""
    max_panel = max_panel or _QUAD_DEFAULTS["max_panel"]
    pts = [a, b]
    pts.extend(p for p in q.breakpoints if a < p < b)
    if q.smooth_nodes is not None:
        pts.extend(q.smooth_nodes(a, b).tolist())
    edges = np.unique(np.asarray(pts, dtype=float))
    counts = np.maximum(1, np.ceil(np.diff(edges) / max_panel)).astype(int)
    return _subdivide(edges, counts)


def _gl_panels(fn: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
               gx: np.ndarray = _GL_X, gw: np.ndarray = _GL_W) -> np.ndarray:
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = mid[:, None] + half[:, None] * gx[None, :]
    vals = fn(nodes)
    return (vals * gw[None, :]).sum(axis=1) * half


def _stable_sum(parts: np.ndarray) -> complex | float:
    if np.iscomplexobj(parts):
        return complex(math.fsum(parts.real), math.fsum(parts.imag))
    return math.fsum(parts)


def integrate_panels(fn: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
                     tol: Optional[float] = None, max_halvings: Optional[int] = None) -> complex | float:
    """Composite Gauss-Legendre with global panel halving until two passes agree."""
    tol = tol or _QUAD_DEFAULTS["quad_tol"]
    max_halvings = max_halvings if max_halvings is not None else _QUAD_DEFAULTS["max_halvings"]
    if len(edges) < 2 or edges[-1] == edges[0]:
        return 0.0
    coarse = _stable_sum(_gl_panels(fn, edges))
    for _ in range(max_halvings):
        edges = _subdivide(edges, np.full(len(edges) - 1, 2))
        fine = _stable_sum(_gl_panels(fn, edges))
        if abs(fine - coarse) <= tol * max(1.0, abs(fine)):
            return fine
        coarse = fine
    raise ConvergenceError(f"panel halving did not reach tolerance {tol:g} on [{edges[0]:g}, {edges[-1]:g}]")


def integral(q: Potential, a: float, b: float, *, absolute: bool = False, power: int = 1,
             weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             tol: Optional[float] = None) -> complex | float:
    """∫_a^b f(q(x)) w(x) dx with f = q^power or |q|."""
    if b <= a or q.is_zero:
        return 0.0
    hi = min(b, q.support_bound) if q.is_compact else b
    if hi <= a:
        return 0.0

    def fn(x: np.ndarray) -> np.ndarray:
        v = q(x)
        v = np.abs(v) if absolute else v ** power
        return v * weight(x) if weight is not None else v

    return integrate_panels(fn, panel_edges(q, a, hi), tol=tol)


def conditional_integral(q: Potential, T: float, absolute: bool = False) -> float:
    """∫_0^T q(s) ds (signed), or ∫_0^T |q(s)| ds with ``absolute``."""
    if T <= 0:
        raise InvalidInputError(f"T must be positive, got {T}")
    return float(integral(q, 0.0, T, absolute=absolute))


def total_integral(q: Potential, R: Optional[float] = None) -> float:
    """∫_0^R q, with R defaulting to the support of a compact potential."""
    if R is None:
        if not q.is_compact:
            raise InvalidInputError("total integral of a non-compact potential needs a cutoff R")
        R = q.support_bound
    return float(integral(q, 0.0, R)) if R > 0 else 0.0


def phase(q: Potential, x: float, k: complex, R: float) -> complex:
    """φ(x,k,R) = (2k)^-1 ∫_x^R q(t) dt."""
    if k == 0:
        raise InvalidInputError("phase is undefined at k = 0")
    if x < 0 or x > R:
        raise InvalidInputError(f"phase needs 0 <= x <= R, got x={x}, R={R}")
    return complex(integral(q, x, R)) / (2.0 * complex(k))


def check_integral_convergence(q: Potential, Tlist: Sequence[float] = (10.0, 100.0, 1000.0)) -> Tuple[List[float], bool]:
    """Cauchy test for ∫_0^∞ q: successive differences of the running integral must shrink."""
    if q.is_compact:
        v = total_integral(q) if q.support_bound > 0 else 0.0
        return [v for _ in Tlist], True
    values = [conditional_integral(q, T) for T in Tlist]
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    ok = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:])) if len(diffs) > 1 else True
    return values, ok


def decay_envelope_ok(q: Potential, x0: float = 10.0, x1: float = 1000.0, slack: float = 1.05) -> bool:
    """Sampled check of |q(x)| <= C (1+x)^(-1/2), with C fitted on [0, x0]."""
    if q.is_zero:
        return True
    head = np.linspace(0.0, x0, 4001)
    C = float(np.max(np.abs(q(head)) * np.sqrt(1.0 + head)))
    tail = np.geomspace(x0, x1, 20001)
    worst = float(np.max(np.abs(q(tail)) * np.sqrt(1.0 + tail)))
    return worst <= slack * max(C, 1e-300)


def running_integral(q: Potential, grid: np.ndarray) -> np.ndarray:
    """∫_{x_i}^{x_last} q for every grid point, 5-point Gauss-Legendre per grid panel.

    Repeated grid points (zero-width panels at breakpoints) contribute nothing.
    """
    grid = np.asarray(grid, dtype=float)
    if q.is_zero or len(grid) < 2:
        return np.zeros_like(grid)
    panels = _gl_panels(q, grid, _GL5_X, _GL5_W)
    out = np.zeros_like(grid)
    out[:-1] = np.cumsum(panels[::-1])[::-1]
    return out


# -------------------------------------------------------------------------
# Sampling helpers
# -------------------------------------------------------------------------
def segments(q: Potential, a: float, b: float) -> np.ndarray:
    """Edges of the intervals of [a, b] on which q is continuous."""
    pts = [a, b] + [p for p in q.breakpoints if a < p < b]
    return np.unique(np.asarray(pts, dtype=float))


def sample_one_sided(q: Potential, x: np.ndarray) -> np.ndarray:
    """q on a segment grid with both ends taken as limits from inside the segment."""
    x = np.array(x, dtype=float)
    if len(x) >= 2:
        x[0] = np.nextafter(x[0], x[-1])
        x[-1] = np.nextafter(x[-1], x[0])
    return q(x)


def sample_nodes(q: Potential, x: np.ndarray) -> np.ndarray:
    """q on grid nodes, with the mean of the one-sided limits at breakpoints."""
    x = np.asarray(x, dtype=float)
    out = q(x)
    for p in q.breakpoints:
        hit = np.isclose(x, p, rtol=0.0, atol=1e-12)
        if hit.any():
            left = q(np.nextafter(p, -np.inf))
            right = q(np.nextafter(p, np.inf))
            out = np.where(hit, 0.5 * (left + right), out)
    return out


def clamped_scalar(q: Potential, a: float, b: float) -> Callable[[float], float]:
    """Scalar evaluator of q restricted to the open segment (a, b)."""
    lo = np.nextafter(a, b)
    hi = np.nextafter(b, a)

    def fn(x: float) -> float:
        return float(q(np.array(min(max(x, lo), hi))))

    return fn


# -------------------------------------------------------------------------
# Construction
# -------------------------------------------------------------------------
def _l2_moment(q: Potential, cfg: Dict[str, Any]) -> float:
    if q.is_zero:
        return 0.0
    if q.is_compact:
        return float(integral(q, 0.0, q.support_bound, power=2, tol=cfg["quad_tol"]))
    X = float(cfg["tail_start"])
    head = float(integral(q, 0.0, X, power=2, tol=cfg["quad_tol"]))
    tail = q.tail_l2(X) if q.tail_l2 is not None else 0.0
    return head + tail


def _zero() -> Potential:
    return Potential(
        evaluator=lambda x: np.zeros_like(x, dtype=float),
        support_bound=0.0,
        decay_tag=DecayTag.COMPACT,
        l2_moment=0.0,
        label="zero",
        is_zero=True,
    )


def _square_well(depth: float, width: float) -> Potential:
    if width <= 0:
        raise InvalidInputError(f"square_well width must be positive, got {width}")
    if depth == 0:
        return _zero()

    def evaluator(x: np.ndarray) -> np.ndarray:
        return np.where((x >= 0) & (x < width), depth, 0.0)

    return Potential(
        evaluator=evaluator,
        support_bound=float(width),
        decay_tag=DecayTag.COMPACT,
        l2_moment=0.0,
        breakpoints=(float(width),),
        max_abs=abs(depth),
        label=f"square_well(depth={depth:g},width={width:g})",
    )


def _sampled(samples: Sequence[Tuple[float, float]]) -> Potential:
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] != 2:
        raise InvalidInputError("sampled potential needs at least two (x, q) pairs")
    xs, qs = arr[:, 0], arr[:, 1]
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("sampled potential contains non-finite values")
    if xs[0] < 0:
        raise InvalidInputError("sampled potential grid must start at x >= 0")
    if np.any(np.diff(xs) <= 0):
        raise InvalidInputError("sampled potential grid must be strictly increasing in x")
    last = float(xs[-1])

    def evaluator(x: np.ndarray) -> np.ndarray:
        return np.where(x < last, np.interp(x, xs, qs), 0.0)

    return Potential(
        evaluator=evaluator,
        support_bound=last,
        decay_tag=DecayTag.COMPACT,
        l2_moment=0.0,
        breakpoints=tuple(float(v) for v in xs if v > 0),
        max_abs=float(np.max(np.abs(qs))),
        label=f"sampled(n={len(xs)},x_max={last:g})",
        is_zero=bool(np.all(qs == 0)),
    )


def _oscillatory_decay(c: float, a: float, b: float) -> Potential:
    if a <= 0:
        raise InvalidInputError(f"oscillatory_decay frequency power must be positive, got a={a}")
    if b <= 0.5:
        raise InvalidInputError(f"oscillatory_decay with b={b} <= 1/2 is not square integrable")
    if c == 0:
        return _zero()

    def evaluator(x: np.ndarray) -> np.ndarray:
        xx = np.maximum(x, 0.0)
        return c * np.cos(xx ** a) / (1.0 + xx) ** b

    def envelope(x: np.ndarray) -> np.ndarray:
        return abs(c) / (1.0 + np.maximum(x, 0.0)) ** b

    def smooth_nodes(lo: float, hi: float) -> np.ndarray:
        # zeros of cos(x^a) and cos(2x^a): x^a = m*pi/4
        m0 = int(math.floor(4.0 * max(lo, 0.0) ** a / math.pi)) + 1
        m1 = int(math.ceil(4.0 * hi ** a / math.pi))
        if m1 < m0:
            return np.empty(0)
        nodes = (np.arange(m0, m1 + 1) * math.pi / 4.0) ** (1.0 / a)
        return nodes[(nodes > lo) & (nodes < hi)]

    def wavelength(R: float) -> float:
        if a >= 1.0:
            return 2.0 * math.pi / (a * max(R, 1.0) ** (a - 1.0))
        return 2.0 * math.pi / a

    def tail_l2(X: float) -> float:
        g = 0.5 * c * c / (1.0 + X) ** (2.0 * b)
        mean = 0.5 * c * c * (1.0 + X) ** (1.0 - 2.0 * b) / (2.0 * b - 1.0)
        correction = -math.sin(2.0 * X ** a) * g / (2.0 * a * X ** (a - 1.0))
        return mean + correction

    return Potential(
        evaluator=evaluator,
        support_bound=math.inf,
        decay_tag=DecayTag.L2_OSCILLATORY,
        l2_moment=0.0,
        max_abs=abs(c),
        label=f"oscillatory_decay(c={c:g},a={a:g},b={b:g})",
        envelope=envelope,
        smooth_nodes=smooth_nodes,
        wavelength=wavelength,
        tail_l2=tail_l2,
    )


def _power_decay(c: float, b: float) -> Potential:
    if b <= 0.5:
        raise InvalidInputError(f"power_decay with b={b} <= 1/2 is not square integrable")
    if c == 0:
        return _zero()

    def evaluator(x: np.ndarray) -> np.ndarray:
        return c / (1.0 + np.maximum(x, 0.0)) ** b

    def envelope(x: np.ndarray) -> np.ndarray:
        return abs(c) / (1.0 + np.maximum(x, 0.0)) ** b

    def tail_l2(X: float) -> float:
        return c * c * (1.0 + X) ** (1.0 - 2.0 * b) / (2.0 * b - 1.0)

    return Potential(
        evaluator=evaluator,
        support_bound=math.inf,
        decay_tag=DecayTag.L1 if b > 1.0 else DecayTag.L2_MONOTONE,
        l2_moment=0.0,
        max_abs=abs(c),
        label=f"power_decay(c={c:g},b={b:g})",
        envelope=envelope,
        tail_l2=tail_l2,
    )


def make_potential(spec: PotentialSpec, cfg: Optional[Dict[str, Any]] = None) -> Potential:
    """Build a Potential from its spec and fill in the cached L2 moment."""
    qcfg = numerics(cfg, "potential")
    if spec.kind == "zero":
        q = _zero()
    elif spec.kind == "square_well":
        q = _square_well(spec.param("depth"), spec.param("width"))
    elif spec.kind == "sampled":
        if spec.samples is None:
            raise InvalidInputError("sampled potential spec carries no samples")
        q = _sampled(spec.samples)
    elif spec.kind == "oscillatory_decay":
        q = _oscillatory_decay(spec.param("c"), spec.param("a"), spec.param("b"))
    elif spec.kind == "power_decay":
        q = _power_decay(spec.param("c"), spec.param("b"))
    else:
        raise InvalidInputError(f"unknown potential kind '{spec.kind}'")

    l2 = _l2_moment(q, qcfg)
    if not math.isfinite(l2) or l2 < 0:
        raise InvalidInputError(f"{q.label}: L2 moment is not finite ({l2})")
    q = _with(q, l2_moment=l2)
    logger.debug(f"built {q.label}: l2_moment={l2:.12g}")
    return q


def potential_from_kv(text: str, cfg: Optional[Dict[str, Any]] = None) -> Potential:
    return make_potential(PotentialSpec.from_kv(text), cfg)


def _with(q: Potential, **changes: Any) -> Potential:
    fields = dict(q.__dict__)
    fields.update(changes)
    return Potential(**fields)


def truncate(q: Potential, R: float) -> Potential:
    """q_R: q on [0, R), zero beyond; always compact with support R."""
    if R <= 0:
        raise InvalidInputError(f"truncation radius must be positive, got {R}")
    if q.is_zero:
        return _with(q, support_bound=float(R), label=f"zero|R={R:g}")
    base = q.evaluator

    def evaluator(x: np.ndarray) -> np.ndarray:
        return np.where(x < R, base(x), 0.0)

    breakpoints = tuple(p for p in q.breakpoints if p < R) + (float(R),)
    truncated = _with(
        q,
        evaluator=evaluator,
        support_bound=float(R),
        decay_tag=DecayTag.COMPACT,
        breakpoints=breakpoints,
        label=f"{q.label}|R={R:g}",
        tail_l2=None,
    )
    return _with(truncated, l2_moment=float(integral(truncated, 0.0, R, power=2)))
