"""
Regularized perturbation determinant route to the modified Jost function.

    j_m(k, R) = exp(q̂_R(2k) / (2ik)) · det2(I + R0(k^2) q_R),
    det2(I + K) = det(I + K) · exp(-tr K)

with the Dirichlet free resolvent kernel

    G0(x, y; k) = -(e^{ik|x-y|} - e^{ik(x+y)}) / (2ik),   Im k > 0.

The operator is discretized by Nyström's method. The default rule is the
composite trapezoid rule with nodes on the breakpoints of q (the kernel has
a kink on the diagonal, which always falls on a node); node counts are
doubled and the determinants combined in a Romberg tableau until two
diagonal entries agree. A Gauss-Legendre rule is available for smooth q.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import linalg

from src.config import numerics
from src.errors import InvalidInputError
from src.logging_config import get_logger
from src.potential import DecayTag, Potential, integral, segments

logger = get_logger(__name__)


@dataclass(frozen=True)
class KernelMatrix:
    k: complex
    nodes: np.ndarray
    weights: np.ndarray
    entries: np.ndarray

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class Det2Result:
    jm: complex
    det2: complex
    nodes_used: int
    doubling_gap: float
    converged: bool

    def as_record(self) -> Dict[str, Any]:
        return {
            "jm": self.jm,
            "nodes_used": self.nodes_used,
            "doubling_gap": self.doubling_gap,
            "converged": self.converged,
        }


def _check_upper(k: complex) -> complex:
    k = complex(k)
    if k.imag <= 0:
        raise InvalidInputError(f"the resolvent kernel needs Im k > 0, got k={k}")
    return k


def resolvent_kernel(k: complex, x: Any, y: Any) -> Any:
    """G0(x, y; k); vectorized over x and y."""
    k = _check_upper(k)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    val = -(np.exp(1j * k * np.abs(x - y)) - np.exp(1j * k * (x + y))) / (2j * k)
    return complex(val) if val.ndim == 0 else val


def fourier_hat(q: Potential, k: complex) -> complex:
    """q̂(k) = ∫_0^∞ q(x) e^{ikx} dx."""
    k = complex(k)
    if k.imag < 0:
        raise InvalidInputError(f"fourier_hat needs Im k >= 0, got {k}")
    if q.is_zero:
        return 0j

    def weight(x: np.ndarray) -> np.ndarray:
        return np.exp(1j * k * x)

    if q.is_compact:
        return complex(integral(q, 0.0, q.support_bound, weight=weight, tol=1e-11))
    if k.imag > 0:
        # |q| <= max_abs, so the dropped tail is below max_abs e^{-Im k X} / Im k
        X = max(1.0, (math.log(max(q.max_abs, 1e-300) / k.imag) + 30.0 * math.log(10.0)) / k.imag)
        return complex(integral(q, 0.0, X, weight=weight, tol=1e-11))
    if q.decay_tag == DecayTag.L1 and k != 0:
        X = float(numerics(None, "potential")["tail_start"])
        head = complex(integral(q, 0.0, X, weight=weight, tol=1e-11))
        # leading integration-by-parts term of the tail
        return head - float(q(np.array(X))) * cmath.exp(1j * k * X) / (1j * k)
    raise InvalidInputError(f"{q.label}: Fourier transform at real k={k} needs an integrable potential")


# -------------------------------------------------------------------------
# Nyström discretization
# -------------------------------------------------------------------------
def _support(q: Potential, R: float) -> float:
    return min(R, q.support_bound) if q.is_compact else R


def _segment_counts(edges: np.ndarray, n: int) -> List[int]:
    L = edges[-1] - edges[0]
    return [max(2, int(round(n * (b - a) / L))) for a, b in zip(edges[:-1], edges[1:])]


def _trapezoid_nodes(q: Potential, edges: np.ndarray, counts: List[int]):
    """Nodes, weights and q·w with one-sided q at segment ends."""
    xs: List[np.ndarray] = []
    ws: List[np.ndarray] = []
    qw: List[np.ndarray] = []
    for i, ((a, b), m) in enumerate(zip(zip(edges[:-1], edges[1:]), counts)):
        x = np.linspace(a, b, m + 1)
        h = (b - a) / m
        w = np.full(m + 1, h)
        w[0] = w[-1] = 0.5 * h
        xi = x.copy()
        xi[0] = np.nextafter(a, b)
        xi[-1] = np.nextafter(b, a)
        qv = q(xi) * w
        if i > 0:
            # merge the shared breakpoint node with the previous segment's last node
            ws[-1][-1] += w[0]
            qw[-1][-1] += qv[0]
            x, w, qv = x[1:], w[1:], qv[1:]
        xs.append(x)
        ws.append(w)
        qw.append(qv)
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(qw)


def _gauss_nodes(q: Potential, edges: np.ndarray, counts: List[int]):
    xs, ws = [], []
    for (a, b), m in zip(zip(edges[:-1], edges[1:]), counts):
        gx, gw = np.polynomial.legendre.leggauss(m)
        xs.append(0.5 * (b - a) * gx + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * gw)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    return x, w, q(x) * w


def kernel_matrix(q: Potential, k: complex, R: float, n: int, rule: str = "trapezoid",
                  counts: Optional[List[int]] = None) -> KernelMatrix:
    """K[i, j] = G0(x_i, x_j; k) q(x_j) w_j on q_R.

    ``counts`` fixes the per-segment interval counts; otherwise n is spread
    over the segments in proportion to their length.
    """
    k = _check_upper(k)
    edges = segments(q, 0.0, _support(q, R))
    counts = counts or _segment_counts(edges, n)
    if rule == "trapezoid":
        x, w, qw = _trapezoid_nodes(q, edges, counts)
    elif rule == "gauss":
        x, w, qw = _gauss_nodes(q, edges, counts)
    else:
        raise InvalidInputError(f"unknown Nyström rule '{rule}'")
    G = resolvent_kernel(k, x[:, None], x[None, :])
    return KernelMatrix(k=k, nodes=x, weights=w, entries=G * qw[None, :])


def det2_lu(K: np.ndarray) -> complex:
    """det(I + K) exp(-tr K) through an LU factorization."""
    n = K.shape[0]
    lu, piv = linalg.lu_factor(np.eye(n, dtype=complex) + K, check_finite=False)
    diag = np.diag(lu)
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    logdet = np.sum(np.log(diag.astype(complex)))
    sign = -1.0 if swaps % 2 else 1.0
    return complex(sign * np.exp(logdet - np.trace(K)))


def det2_split_check(K: np.ndarray) -> Dict[str, float]:
    """Compare the LU value of det2 with the eigenvalue forms.

    ``product_gap``: |LU - Π (1+λ) e^{-λ}|. ``log_gap``: |LU - exp(Σ log(1+λ) - λ)|,
    reported only when the spectral radius is below 1.
    """
    lam = linalg.eigvals(K)
    lu_val = det2_lu(K)
    prod = complex(np.prod((1.0 + lam) * np.exp(-lam)))
    radius = float(np.max(np.abs(lam))) if len(lam) else 0.0
    out = {"spectral_radius": radius, "product_gap": abs(lu_val - prod)}
    if radius < 1.0:
        out["log_gap"] = abs(lu_val - cmath.exp(complex(np.sum(np.log1p(lam) - lam))))
    return out


def det2_modified_jost(q: Potential, k: complex, R: float, n: Optional[int] = None,
                       cfg: Optional[Dict[str, Any]] = None, rule: Optional[str] = None) -> Det2Result:
    """j_m(k, R) from the regularized determinant, refined by node doubling."""
    dcfg = numerics(cfg, "det2")
    k = _check_upper(k)
    n = int(n or dcfg["nodes"])
    if n < 64:
        raise InvalidInputError(f"det2 needs at least 64 nodes, got {n}")
    rule = rule or dcfg["rule"]
    if q.is_zero:
        return Det2Result(jm=1 + 0j, det2=1 + 0j, nodes_used=0, doubling_gap=0.0, converged=True)

    Rs = _support(q, R)
    prefactor = cmath.exp(fourier_hat_truncated(q, 2.0 * k, Rs) / (2j * k))
    tol = float(dcfg["doubling_tol"])
    max_nodes = int(dcfg["max_nodes"])
    n = max(n, int(math.ceil(16 * Rs)))

    base = _segment_counts(segments(q, 0.0, Rs), n)
    level = 0
    rows: List[List[complex]] = []
    gap = math.inf
    best = None
    while True:
        counts = [c * 2 ** level for c in base]
        n = sum(counts)
        value = det2_lu(kernel_matrix(q, k, R, n, rule, counts=counts).entries)
        if rule == "trapezoid":
            row = [value]
            for m, prev in enumerate(rows[-1] if rows else [], start=1):
                row.append((4.0 ** m * row[m - 1] - prev) / (4.0 ** m - 1.0))
            rows.append(row)
            current = row[-1]
            if len(rows) >= 2:
                gap = abs(current - rows[-2][-1])
        else:
            current = value
            if best is not None:
                gap = abs(current - best)
        best = current
        logger.debug(f"det2 k={k} n={n}: det2={current:.12g} gap={gap:.2e}")
        if gap <= tol * max(1.0, abs(current)) or 2 * n > max_nodes:
            break
        level += 1

    converged = gap <= tol * max(1.0, abs(best))
    if not converged:
        logger.warning(f"det2 doubling did not settle at k={k}, R={R:g}: gap={gap:.2e} with {n} nodes")
    return Det2Result(jm=prefactor * best, det2=best, nodes_used=n, doubling_gap=float(gap), converged=converged)


def fourier_hat_truncated(q: Potential, k: complex, R: float) -> complex:
    """q̂_R(k) = ∫_0^R q(x) e^{ikx} dx."""
    if q.is_zero:
        return 0j
    k = complex(k)
    return complex(integral(q, 0.0, _support(q, R), weight=lambda x: np.exp(1j * k * x), tol=1e-11))
