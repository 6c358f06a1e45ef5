# spectral.py
"""
Stationary spectral picture of H = -d²/dx² + q on the half-line (Dirichlet).

Conventions
-----------
- u(x, k): regular solution, u(0) = 0, u'(0) = 1, energy E = k².
- m(k²) = j'(0,k,R) / j(0,k,R) (Weyl function of q_R).
- dρ(E) = μ(E) dE on E > 0 plus point masses ||u(·, iκ)||⁻² at the Dirichlet
  eigenvalues -κ². In the wavenumber variable dρ = 2k μ(k²) dk with
  μ(k²) = k / (π |j_m(k,R)|²).
- The ratio |m + ik|² / (4πkμ) equals |a(k)|², so the logarithm entering
  the trace identity and the factorization of a_m is ln|a|² = log1p(|b|²).

A SpectralModel samples all of this on Gauss-Legendre panels over
[δ, K_max] plus one threshold panel on [0, δ] where the Jost data come from
the shooting route. Models are always built for the truncated potential q_R.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.integrate import simpson, solve_ivp

from src.config import numerics
from src.det2 import fourier_hat
from src.errors import ConvergenceError, InvalidInputError, QualityFlag, raise_flag
from src.jost import as_k, jost_shooting, solve_psi
from src.logging_config import get_logger
from src.parallel import parallel_map
from src.potential import Potential, clamped_scalar, segments, truncate

logger = get_logger(__name__)

_CHUNK = 256


# -------------------------------------------------------------------------
# Types
# -------------------------------------------------------------------------
@dataclass(frozen=True)
class RegularSolution:
    k: complex
    grid: np.ndarray
    u: np.ndarray
    uprime: np.ndarray


@dataclass(frozen=True)
class SampledFunction:
    """A function on [0, ∞) given by samples on a grid that covers its support."""

    x: np.ndarray
    values: np.ndarray

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int = 4001) -> "SampledFunction":
        x = np.linspace(lo, hi, n)
        return cls(x=x, values=np.asarray(fn(x)))

    @property
    def norm2(self) -> float:
        return float(simpson(np.abs(self.values) ** 2, x=self.x))


@dataclass(frozen=True)
class BlaschkeProduct:
    """B_m(k) = Π ((k - iξ)/(k + iξ)) e^{2iξ/k}."""

    xis: Tuple[float, ...] = ()

    @staticmethod
    def factor(xi: float, k: complex) -> complex:
        k = complex(k)
        return (k - 1j * xi) / (k + 1j * xi) * cmath.exp(2j * xi / k)

    def __call__(self, k: complex) -> complex:
        out = 1 + 0j
        for xi in self.xis:
            out *= self.factor(xi, k)
        return out


@dataclass(frozen=True)
class BoundStateScan:
    roots: Tuple[float, ...]
    which: str
    threshold_state: bool = False
    threshold_candidates: Tuple[float, ...] = ()

    def __iter__(self) -> Iterator[float]:
        return iter(self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    def __getitem__(self, i: int) -> float:
        return self.roots[i]


@dataclass(frozen=True)
class SpectralModel:
    q: Potential
    R_used: float
    delta: float
    kmax: float
    kgrid: np.ndarray
    kweights: np.ndarray
    mu: np.ndarray
    m_values: np.ndarray
    jm: np.ndarray
    a_abs2: np.ndarray
    b_abs2: np.ndarray
    threshold_k: np.ndarray
    threshold_w: np.ndarray
    threshold_mu: np.ndarray
    threshold_a_abs2: np.ndarray
    bound_xis: Tuple[float, ...] = ()
    dirichlet_eigs: Tuple[float, ...] = ()
    point_weights: Tuple[float, ...] = ()
    threshold_state: bool = False
    flags: Tuple[QualityFlag, ...] = field(default_factory=tuple)

    @property
    def dirichlet_kappas(self) -> Tuple[float, ...]:
        return tuple(math.sqrt(-e) for e in self.dirichlet_eigs)

    def rho_weights(self) -> np.ndarray:
        """dρ weights 2kμ w on the main grid."""
        return 2.0 * self.kgrid * self.mu * self.kweights

    def threshold_rho_weights(self) -> np.ndarray:
        return 2.0 * self.threshold_k * self.threshold_mu * self.threshold_w

    @property
    def ratio(self) -> np.ndarray:
        """|m + ik|² / (4πkμ) on the main grid."""
        return np.abs(self.m_values + 1j * self.kgrid) ** 2 / (4.0 * math.pi * self.kgrid * self.mu)

    @property
    def transmission(self) -> np.ndarray:
        return 1.0 / self.a_abs2

    @property
    def reflection2(self) -> np.ndarray:
        return self.b_abs2 / self.a_abs2

    def blaschke(self) -> BlaschkeProduct:
        return BlaschkeProduct(self.bound_xis)


@dataclass(frozen=True)
class TransformPair:
    kgrid: np.ndarray
    values: np.ndarray
    threshold_values: np.ndarray
    point_values: np.ndarray
    norm2: float
    plancherel_total: float
    tail: float
    defect: float


# -------------------------------------------------------------------------
# Regular solution
# -------------------------------------------------------------------------
def _sin_over_k(k: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.sin(k * s) / k


def regular_solution_batch(q: Potential, ks: Sequence[complex], x: np.ndarray,
                           cfg: Optional[Dict[str, Any]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """u(x, k) and u'(x, k) for many k on a sorted grid x >= 0; arrays of shape (len(ks), len(x))."""
    scfg = numerics(cfg, "spectral")
    ks = np.asarray(ks, dtype=complex)
    x = np.asarray(x, dtype=float)
    if len(x) and (x[0] < 0 or np.any(np.diff(x) < 0)):
        raise InvalidInputError("regular solutions need a sorted grid in [0, ∞)")
    E = ks * ks
    real = bool(np.all(E.imag == 0))
    dtype = float if real else complex
    if real:
        E = E.real

    S = min(q.support_bound, x[-1]) if len(x) else 0.0
    if q.is_zero:
        S = 0.0
    nk, nx = len(ks), len(x)
    U = np.empty((nk, nx), dtype=dtype)
    Up = np.empty((nk, nx), dtype=dtype)

    inside = x <= S
    y = np.concatenate([np.zeros(nk, dtype=dtype), np.ones(nk, dtype=dtype)])
    if S > 0:
        edges = segments(q, 0.0, S)
        assigned = np.zeros(nx, dtype=bool)
        for a, b in zip(edges[:-1], edges[1:]):
            qs = clamped_scalar(q, a, b)
            sel = inside & ~assigned & (x >= a) & (x <= b)
            assigned |= sel

            def rhs(t, v, qs=qs):
                u, up = v[:nk], v[nk:]
                return np.concatenate([up, (qs(t) - E) * u])

            t_eval = np.unique(np.append(x[sel], b))
            sol = solve_ivp(rhs, (a, b), y, method="RK45", t_eval=t_eval,
                            rtol=scfg["ode_rtol"], atol=scfg["ode_atol"])
            if not sol.success:
                raise ConvergenceError(f"regular solution failed on [{a:g}, {b:g}]: {sol.message}")
            if sel.any():
                idx = np.searchsorted(t_eval, x[sel])
                U[:, sel] = sol.y[:nk, idx]
                Up[:, sel] = sol.y[nk:, idx]
            y = sol.y[:, -1]
    else:
        U[:, inside] = 0.0
        Up[:, inside] = 1.0

    out = ~inside
    if out.any():
        s = x[out] - S
        uS, upS = y[:nk, None], y[nk:, None]
        kk = ks[:, None]
        c = np.cos(kk * s[None, :])
        sk = _sin_over_k(kk, s[None, :])
        u_out = uS * c + upS * sk
        up_out = -uS * kk * kk * sk + upS * c
        U[:, out] = u_out.real if real else u_out
        Up[:, out] = up_out.real if real else up_out
    return U, Up


def regular_solution(q: Potential, k: "complex", xmax: float, grid: Optional[np.ndarray] = None,
                     cfg: Optional[Dict[str, Any]] = None) -> RegularSolution:
    """-u'' + qu = k²u, u(0) = 0, u'(0) = 1, sampled on [0, xmax]."""
    if xmax <= 0:
        raise InvalidInputError(f"xmax must be positive, got {xmax}")
    k = as_k(k)
    if grid is None:
        pts = np.concatenate([np.linspace(0.0, xmax, max(201, int(xmax / 0.01) + 1)), segments(q, 0.0, xmax)])
        grid = np.unique(pts)
    U, Up = regular_solution_batch(q, [k], grid, cfg)
    return RegularSolution(k=k, grid=grid, u=U[0], uprime=Up[0])


def regular_solution_chunks(q: Potential, ks: np.ndarray, x: np.ndarray,
                            cfg: Optional[Dict[str, Any]] = None) -> Iterator[Tuple[slice, np.ndarray, np.ndarray]]:
    """Yield (slice into ks, U, U') over chunks of wavenumbers."""
    for start in range(0, len(ks), _CHUNK):
        sl = slice(start, min(start + _CHUNK, len(ks)))
        U, Up = regular_solution_batch(q, ks[sl], x, cfg)
        yield sl, U, Up


# -------------------------------------------------------------------------
# m-function and density
# -------------------------------------------------------------------------
def m_function(q: Potential, k: complex, R: float, cfg: Optional[Dict[str, Any]] = None) -> complex:
    """m_R(k²) = j'(0,k,R) / j(0,k,R)."""
    data = solve_psi(q, k, R, cfg=cfg)
    if abs(data.j) < 1e-12:
        raise InvalidInputError(f"j(0,k,R) vanishes at k={data.k}: k² is a Dirichlet eigenvalue (pole of m)")
    return data.jprime0 / data.j


def spectral_density(q: Potential, k: float, R: float, cfg: Optional[Dict[str, Any]] = None,
                     flags: Optional[List[QualityFlag]] = None) -> float:
    """μ(k²) = k / (π |j_m(k,R)|²); non-compact q is checked against 2R."""
    scfg = numerics(cfg, "spectral")
    k = float(np.real(k))
    if k < scfg["delta"]:
        raise InvalidInputError(f"spectral density needs k >= δ = {scfg['delta']}, got {k}")
    mu = k / (math.pi * abs(solve_psi(q, k, R, cfg=cfg).jm) ** 2)
    if not q.is_compact:
        mu2 = k / (math.pi * abs(solve_psi(q, k, 2.0 * R, cfg=cfg).jm) ** 2)
        gap = abs(mu2 - mu) / mu
        if gap > scfg["doubling_tol"]:
            raise_flag(flags, QualityFlag("spectral_density", f"R-doubling gap {gap:.2e} at k={k:g}, R={R:g}",
                                          gap, scfg["doubling_tol"]), logger)
    return mu


def density_table(q: Potential, ks: Sequence[float], R: float,
                  cfg: Optional[Dict[str, Any]] = None) -> List[Dict[str, float]]:
    """Rows {k, E, mu, m} on a user grid of real wavenumbers."""

    def row(k: float) -> Dict[str, Any]:
        data = solve_psi(q, k, R, cfg=cfg)
        return {
            "k": k,
            "E": k * k,
            "mu": k / (math.pi * abs(data.jm) ** 2),
            "m": data.jprime0 / data.j,
        }

    return parallel_map(row, list(ks))


# -------------------------------------------------------------------------
# Bound states
# -------------------------------------------------------------------------
def _imag_axis_value(q: Potential, y: float, R: float, which: str, cfg: Optional[Dict[str, Any]]) -> float:
    data = solve_psi(q, 1j * y, R, cfg=cfg)
    return float((data.a if which == "line_glued" else data.j).real)


def _imag_axis_shooting(q: Potential, y: float, R: float, which: str) -> float:
    j0, jp0 = jost_shooting(q, 1j * y, R)
    if which == "line_glued":
        return float(((y * j0 - jp0) / (2.0 * y)).real)
    return float(j0.real)


def bound_states(q: Potential, R: float, which: str = "line_glued", cfg: Optional[Dict[str, Any]] = None,
                 flags: Optional[List[QualityFlag]] = None) -> BoundStateScan:
    """Zeros of a(iy, R) (line_glued) or j(iy, R) (halfline_dirichlet) for y >= δ, decreasing."""
    if which not in ("line_glued", "halfline_dirichlet"):
        raise InvalidInputError(f"unknown bound-state variant '{which}'")
    scfg = numerics(cfg, "spectral")
    if q.is_zero:
        return BoundStateScan(roots=(), which=which)
    qR = truncate(q, R) if not q.is_compact else q
    sample = qR(np.linspace(0.0, min(R, qR.support_bound), 20001))
    depth = max(0.0, -float(np.min(sample)))
    if depth == 0.0:
        return BoundStateScan(roots=(), which=which)

    delta = float(scfg["delta"])
    ys = np.linspace(delta, math.sqrt(depth) + 1.0, int(scfg["scan_points"]))
    vals = np.array(parallel_map(lambda y: _imag_axis_value(q, y, R, which, cfg), ys))

    def f(y: float) -> float:
        return _imag_axis_value(q, y, R, which, cfg)

    roots: List[float] = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(float(optimize.bisect(f, ys[i], ys[i + 1], xtol=scfg["bisect_xtol"])))
    roots.extend(float(y) for y, v in zip(ys, vals) if v == 0.0)

    # below δ the Picard steps get too small; zeros there come from the shooting route and sit on the cutoff
    low = np.linspace(0.02 * delta, delta, 25)
    low_vals = [_imag_axis_shooting(q, y, R, which) for y in low]

    def g(y: float) -> float:
        return _imag_axis_shooting(q, y, R, which)

    candidates = tuple(
        float(optimize.bisect(g, low[i], low[i + 1], xtol=scfg["bisect_xtol"]))
        for i in range(len(low) - 1) if low_vals[i] * low_vals[i + 1] < 0
    )
    threshold = bool(candidates)
    if threshold:
        raise_flag(flags, QualityFlag("bound_states", f"possible threshold state at y={candidates[0]:.4g} < δ ({which})",
                                      candidates[0], delta), logger)
        roots.extend(y for y in candidates if all(abs(y - r) > 10 * scfg["bisect_xtol"] for r in roots))
    roots = sorted(set(roots), reverse=True)
    logger.debug(f"bound_states {which}: {roots}")
    return BoundStateScan(roots=tuple(roots), which=which, threshold_state=threshold, threshold_candidates=candidates)


def point_mass_weight(q: Potential, kappa: float, n: int = 4001, cfg: Optional[Dict[str, Any]] = None) -> float:
    """||u(·, iκ)||⁻² for a compact q, with the exponential tail beyond the support."""
    S = q.support_bound
    x = np.unique(np.concatenate([np.linspace(0.0, S, n), segments(q, 0.0, S)]))
    U, _ = regular_solution_batch(q, [1j * kappa], x, cfg)
    u = U[0]
    norm = float(simpson(u * u, x=x)) + float(u[-1] ** 2) / (2.0 * kappa)
    return 1.0 / norm


# -------------------------------------------------------------------------
# Model
# -------------------------------------------------------------------------
def gl_panels(a: float, b: float, width: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    n = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * np.diff(edges)[:, None]
    return (mid + half * gx[None, :]).ravel(), (half * gw[None, :]).ravel()


def _model_potential(q: Potential, R: float) -> Potential:
    if q.is_zero:
        return q
    if q.is_compact and q.support_bound <= R:
        return q
    return truncate(q, R)


def _threshold_row(q: Potential, k: float, R: float) -> Tuple[float, float]:
    j0, jp0 = jost_shooting(q, k, R)
    mu = k / (math.pi * abs(j0) ** 2)
    a = (1j * k * j0 + jp0) / (2j * k)
    return mu, abs(a) ** 2


def build_model(q: Potential, R: float, cfg: Optional[Dict[str, Any]] = None, *,
                kmax: Optional[float] = None, delta: Optional[float] = None,
                panel_width: Optional[float] = None, with_bound_states: bool = True,
                flags: Optional[List[QualityFlag]] = None) -> SpectralModel:
    """Sample μ, m and the scattering moduli of q_R on [0, K_max]."""
    scfg = numerics(cfg, "spectral")
    kmax = float(kmax or scfg["kmax"])
    delta = float(delta or scfg["delta"])
    width = float(panel_width or scfg["panel_width"])
    order = int(scfg["panel_order"])
    if not 0 < delta < kmax:
        raise InvalidInputError(f"need 0 < δ < K_max, got δ={delta}, K_max={kmax}")
    local_flags: List[QualityFlag] = []
    qm = _model_potential(q, R)

    ks, ws = gl_panels(delta, kmax, width, order)
    rows = parallel_map(lambda k: solve_psi(qm, float(k), R, cfg=cfg), ks)
    jm = np.array([r.jm for r in rows])
    mu = ks / (math.pi * np.abs(jm) ** 2)
    m_values = np.array([r.jprime0 / r.j for r in rows])
    a2 = np.array([abs(r.a) ** 2 for r in rows])
    b2 = np.array([abs(r.b) ** 2 for r in rows])

    tk, tw = gl_panels(0.0, delta, delta, order)
    trows = parallel_map(lambda k: _threshold_row(qm, float(k), R), tk)
    t_mu = np.array([r[0] for r in trows])
    t_a2 = np.array([r[1] for r in trows])

    xis: Tuple[float, ...] = ()
    eigs: Tuple[float, ...] = ()
    weights: Tuple[float, ...] = ()
    threshold = False
    if with_bound_states and not qm.is_zero:
        glued = bound_states(qm, R, "line_glued", cfg, local_flags)
        dirichlet = bound_states(qm, R, "halfline_dirichlet", cfg, local_flags)
        xis = glued.roots
        eigs = tuple(-kap * kap for kap in dirichlet.roots)
        weights = tuple(point_mass_weight(qm, kap, cfg=cfg) for kap in dirichlet.roots)
        threshold = glued.threshold_state or dirichlet.threshold_state

    for flag in local_flags:
        raise_flag(flags, flag)
    logger.info(f"model for {qm.label}: {len(ks)} + {len(tk)} nodes on [0, {kmax:g}], "
                f"ξ={list(xis)}, Dirichlet={list(eigs)}")
    return SpectralModel(
        q=qm, R_used=float(R), delta=delta, kmax=kmax,
        kgrid=ks, kweights=ws, mu=mu, m_values=m_values, jm=jm, a_abs2=a2, b_abs2=b2,
        threshold_k=tk, threshold_w=tw, threshold_mu=t_mu, threshold_a_abs2=t_a2,
        bound_xis=xis, dirichlet_eigs=eigs, point_weights=weights,
        threshold_state=threshold, flags=tuple(local_flags),
    )


# -------------------------------------------------------------------------
# Generalized Fourier transform
# -------------------------------------------------------------------------
def _transform(q: Potential, f: SampledFunction, ks: np.ndarray, cfg: Optional[Dict[str, Any]]) -> np.ndarray:
    out = np.empty(len(ks), dtype=complex if np.iscomplexobj(f.values) else float)
    for sl, U, _ in regular_solution_chunks(q, ks, f.x, cfg):
        out[sl] = simpson(U * f.values[None, :], x=f.x, axis=1)
    return out


def sine_transform(f: SampledFunction, ks: np.ndarray) -> np.ndarray:
    """∫ f(x) sin(kx) dx."""
    out = np.empty(len(ks), dtype=complex if np.iscomplexobj(f.values) else float)
    for start in range(0, len(ks), _CHUNK):
        sl = slice(start, min(start + _CHUNK, len(ks)))
        out[sl] = simpson(np.sin(np.outer(ks[sl], f.x)) * f.values[None, :], x=f.x, axis=1)
    return out


def generalized_transform(q: Potential, f: SampledFunction, model: SpectralModel,
                          cfg: Optional[Dict[str, Any]] = None,
                          flags: Optional[List[QualityFlag]] = None,
                          include_points: bool = True) -> TransformPair:
    """f̆(k) = ∫ f u(·, k) on the model grid, with the Plancherel defect."""
    scfg = numerics(cfg, "spectral")
    qm = model.q
    values = _transform(qm, f, model.kgrid, cfg)
    t_values = _transform(qm, f, model.threshold_k, cfg)
    kappas = np.array(model.dirichlet_kappas)
    p_values = _transform(qm, f, 1j * kappas, cfg) if len(kappas) else np.empty(0)

    norm2 = f.norm2
    continuum = float(np.sum(np.abs(values) ** 2 * model.rho_weights()))
    continuum += float(np.sum(np.abs(t_values) ** 2 * model.threshold_rho_weights()))
    points = float(np.sum(np.abs(p_values) ** 2 * np.array(model.point_weights))) if include_points else 0.0

    # free tail beyond K_max from the sine-transform Plancherel identity
    ks_all = np.concatenate([model.threshold_k, model.kgrid])
    ws_all = np.concatenate([model.threshold_w, model.kweights])
    free_inside = (2.0 / math.pi) * float(np.sum(np.abs(sine_transform(f, ks_all)) ** 2 * ws_all))
    tail = max(0.0, norm2 - free_inside)

    total = continuum + points + tail
    defect = abs(total - norm2)
    if norm2 > 0 and tail > scfg["plancherel_limit"] * norm2:
        raise_flag(flags, QualityFlag("generalized_transform", f"grid-truncation loss {tail / norm2:.2%} of ||f||²",
                                      tail / norm2, scfg["plancherel_limit"]), logger)
    return TransformPair(
        kgrid=model.kgrid, values=values, threshold_values=t_values, point_values=p_values,
        norm2=norm2, plancherel_total=total, tail=tail, defect=defect,
    )


# -------------------------------------------------------------------------
# Trace identity and factorization
# -------------------------------------------------------------------------
@dataclass(frozen=True)
class TraceRecord:
    lhs_continuum: float
    lhs_points: float
    rhs: float
    tail_bound: float

    @property
    def lhs(self) -> float:
        return self.lhs_continuum + self.lhs_points

    @property
    def relative_gap(self) -> float:
        if self.rhs == 0:
            return abs(self.lhs)
        return abs(self.lhs - self.rhs) / abs(self.rhs)

    def as_record(self) -> Dict[str, float]:
        return {
            "lhs_continuum": self.lhs_continuum,
            "lhs_points": self.lhs_points,
            "rhs": self.rhs,
            "tail_bound": self.tail_bound,
        }


def _log_a2(model: SpectralModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and ln|a|² (clipped at 0) on threshold + main grid."""
    ks = np.concatenate([model.threshold_k, model.kgrid])
    ws = np.concatenate([model.threshold_w, model.kweights])
    L = np.log(np.concatenate([model.threshold_a_abs2, model.a_abs2]))
    return ks, ws, np.maximum(L, 0.0)


def trace_identity_check(q: Potential, R: float, model: Optional[SpectralModel] = None,
                         cfg: Optional[Dict[str, Any]] = None,
                         flags: Optional[List[QualityFlag]] = None) -> TraceRecord:
    """(2/3)Σξ³ + (1/π)∫_0^∞ t² ln|a|² dt against (1/8)∫q²."""
    scfg = numerics(cfg, "spectral")
    if q.is_zero:
        return TraceRecord(0.0, 0.0, 0.0, 0.0)
    model = model or build_model(q, R, cfg, flags=flags)
    qm = model.q
    rhs = qm.l2_moment / 8.0
    ks, ws, L = _log_a2(model)
    inside = float(np.sum(ws * ks ** 2 * L)) / math.pi
    # Born tail: (1/π)∫_K^∞ t² ln|a|² ≈ (1/4π)∫_K^∞ |q̂(2t)|²
    qhat2 = np.array(parallel_map(lambda t: abs(fourier_hat(qm, 2.0 * t)) ** 2, ks))
    born_inside = float(np.sum(ws * qhat2)) / (4.0 * math.pi)
    tail = max(0.0, rhs - born_inside)
    lhs_points = (2.0 / 3.0) * float(np.sum(np.array(model.bound_xis) ** 3))
    if rhs > 0 and tail > scfg["tail_limit"] * rhs:
        raise_flag(flags, QualityFlag("trace_identity", f"unresolved tail {tail:.3e} exceeds "
                                      f"{scfg['tail_limit']:.0%} of rhs", tail, scfg["tail_limit"] * rhs), logger)
    return TraceRecord(lhs_continuum=inside + tail, lhs_points=lhs_points, rhs=rhs, tail_bound=tail)


@dataclass(frozen=True)
class FactorizationRecord:
    am: complex
    direct: complex
    tail_bound: float
    inconclusive: bool


def am_factorization(q: Potential, k: complex, R: float, model: Optional[SpectralModel] = None,
                     cfg: Optional[Dict[str, Any]] = None,
                     flags: Optional[List[QualityFlag]] = None) -> FactorizationRecord:
    """B_m(k) exp((1/πik) ∫_0^∞ t² ln|a(t)|² / (t² - k²) dt), compared with ψ1(0)."""
    k = complex(k)
    if k.imag <= 0:
        raise InvalidInputError(f"am_factorization needs Im k > 0, got {k}")
    if q.is_zero:
        return FactorizationRecord(1 + 0j, 1 + 0j, 0.0, False)
    model = model or build_model(q, R, cfg, flags=flags)
    ks, ws, L = _log_a2(model)
    integral = complex(np.sum(ws * ks ** 2 * L / (ks ** 2 - k * k)))
    log_am = integral / (1j * math.pi * k)
    value = model.blaschke()(k) * cmath.exp(log_am)

    upper = ks >= 0.5 * model.kmax
    tail = model.kmax * float(np.max(L[upper])) / (math.pi * abs(k)) if upper.any() else 0.0
    direct = solve_psi(model.q, k, R, cfg=cfg).am
    ref = abs(cmath.log(direct)) if direct != 0 else 0.0
    inconclusive = tail > 0.1 * ref
    if inconclusive:
        raise_flag(flags, QualityFlag("am_factorization", f"tail bound {tail:.2e} exceeds 10% of |log a_m| at k={k}",
                                      tail, 0.1 * ref), logger)
    return FactorizationRecord(am=value, direct=direct, tail_bound=tail, inconclusive=inconclusive)


# -------------------------------------------------------------------------
# Convergence probes
# -------------------------------------------------------------------------
@dataclass(frozen=True)
class WeakProbe:
    Rlist: Tuple[float, ...]
    values: Tuple[float, ...]
    target: float

    @property
    def gaps(self) -> List[float]:
        return [abs(v - self.target) for v in self.values]


def weak_convergence_probe(q: Potential, testfn: Callable[[np.ndarray], np.ndarray], Rlist: Sequence[float],
                           support: Tuple[float, float], cfg: Optional[Dict[str, Any]] = None) -> WeakProbe:
    """s(R) = ∫ testfn(E) π|j_m(k,R)|² dρ(E) against ∫ testfn(E) √E dE.

    dρ comes from the reference radius 2·max(Rlist); point masses sit at E < 0
    and do not meet the test support.
    """
    scfg = numerics(cfg, "spectral")
    lo, hi = support
    if lo < scfg["delta"] ** 2 or hi <= lo:
        raise InvalidInputError(f"test support must lie in [δ², ∞), got {support}")
    ks, ws = gl_panels(math.sqrt(lo), math.sqrt(hi), 0.25, int(scfg["panel_order"]))
    g = np.asarray(testfn(ks ** 2), dtype=float)
    target = float(np.sum(ws * g * 2.0 * ks * ks))
    R_ref = 2.0 * max(Rlist)
    jm_ref = np.array(parallel_map(lambda k: solve_psi(q, float(k), R_ref, cfg=cfg).jm, ks))
    mu_ref = ks / (math.pi * np.abs(jm_ref) ** 2)
    values = []
    for R in Rlist:
        jm = np.array(parallel_map(lambda k: solve_psi(q, float(k), R, cfg=cfg).jm, ks))
        values.append(float(np.sum(ws * g * math.pi * np.abs(jm) ** 2 * mu_ref * 2.0 * ks)))
    return WeakProbe(tuple(float(r) for r in Rlist), tuple(values), target)


def jm_ratio_convergence(q: Potential, interval: Tuple[float, float], Rlist: Sequence[float],
                         cfg: Optional[Dict[str, Any]] = None) -> List[float]:
    """∫_I |j_m(k,R)/j_m(k,R_ref) - 1|² dk with R_ref = 2·max(Rlist)."""
    scfg = numerics(cfg, "spectral")
    a, b = interval
    if a < scfg["delta"] or b <= a:
        raise InvalidInputError(f"interval must lie in [δ, ∞), got {interval}")
    if q.is_zero:
        return [0.0 for _ in Rlist]
    ks, ws = gl_panels(a, b, 0.25, int(scfg["panel_order"]))
    R_ref = 2.0 * max(Rlist)
    ref = np.array(parallel_map(lambda k: solve_psi(q, float(k), R_ref, cfg=cfg).jm, ks))
    out = []
    for R in Rlist:
        jm = np.array(parallel_map(lambda k: solve_psi(q, float(k), R, cfg=cfg).jm, ks))
        out.append(float(np.sum(ws * np.abs(jm / ref - 1.0) ** 2)))
    return out


def uniform_bound_probe(model: SpectralModel, s_list: Sequence[float],
                        cfg: Optional[Dict[str, Any]] = None) -> List[float]:
    """∫ (E u(s,k)² + u'(s,k)²) / (E² + 1) dρ(E) for each sample point s."""
    s_arr = np.sort(np.asarray(s_list, dtype=float))
    qm = model.q
    ks = np.concatenate([model.threshold_k, model.kgrid])
    rho = np.concatenate([model.threshold_rho_weights(), model.rho_weights()])
    E = ks ** 2
    total = np.zeros(len(s_arr))
    for sl, U, Up in regular_solution_chunks(qm, ks, s_arr, cfg):
        e = E[sl][:, None]
        total += np.sum(rho[sl][:, None] * (e * U ** 2 + Up ** 2) / (e ** 2 + 1.0), axis=0)
    kappas = np.array(model.dirichlet_kappas)
    if len(kappas):
        U, Up = regular_solution_batch(qm, 1j * kappas, s_arr, cfg)
        e = -(kappas ** 2)[:, None]
        total += np.sum(np.array(model.point_weights)[:, None] * (e * U ** 2 + Up ** 2) / (e ** 2 + 1.0), axis=0)
    return total.tolist()


@dataclass(frozen=True)
class EntropyRecord:
    value: float
    free_value: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.value >= self.bound


def entropy_bound_check(model: SpectralModel, interval: Tuple[float, float] = (0.5, 5.0),
                        C1: float = 1.0, C2: float = 1.0) -> EntropyRecord:
    """∫_I ln μ(t²) dt against the free value minus C1 + C2∫q²."""
    a, b = interval
    sel = (model.kgrid >= a) & (model.kgrid <= b)
    if not sel.any():
        raise InvalidInputError(f"interval {interval} misses the model grid")
    ks, ws = gl_panels(a, b, 0.25, 15)
    mu = np.interp(ks, model.kgrid, model.mu)
    value = float(np.sum(ws * np.log(mu)))
    free = float(np.sum(ws * np.log(ks / math.pi)))
    return EntropyRecord(value=value, free_value=free, bound=free - C1 - C2 * model.q.l2_moment)
