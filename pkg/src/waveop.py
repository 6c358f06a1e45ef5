"""
Modified free dynamics and the wave-operator probes.

    M(t, k)      = exp(ikt + (i/2k) ∫_0^t q)
    [W(t) f](x)  = (1/2π) ∫_0^∞ e^{-ikx} M(t, k) f̂_o(k) dk

f̂_o is the transform of the odd continuation of f. Profiles here are smooth
bumps in k supported on [k0 - w, k0 + w] ⊂ (0, ∞), optionally carrying a
phase e^{ik·center} so that f sits near x = center.

The x-synthesis uses piecewise-linear Filon panels in k: the factor
e^{-ik(x - t - center)} is integrated exactly and only the slowly varying part
g(k) = bump(k) e^{iQ/(2k)} is interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid

from src.config import numerics
from src.errors import InvalidInputError, QualityFlag, raise_flag
from src.jost import jost_shooting
from src.logging_config import get_logger
from src.potential import Potential, conditional_integral, decay_envelope_ok, potential_from_kv
from src.spectral import SpectralModel, gl_panels, regular_solution_chunks
from src.utils import kv_float, parse_kv

logger = get_logger(__name__)

_TAYLOR_THETA = 1e-2


@dataclass(frozen=True)
class FhatProfile:
    """f̂_o(k) = exp(-s²/(1-s²)) e^{ik·center} for |s| < 1, s = (k - k0)/width."""

    k0: float = 3.0
    width: float = 2.0
    center: float = 10.0

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise InvalidInputError(f"profile width must be positive, got {self.width}")
        if self.k0 - self.width <= 0:
            raise InvalidInputError(f"profile support [{self.k0 - self.width:g}, {self.k0 + self.width:g}] touches k = 0")

    @property
    def support(self) -> Tuple[float, float]:
        return self.k0 - self.width, self.k0 + self.width

    def envelope(self, k: np.ndarray) -> np.ndarray:
        s = (np.asarray(k, dtype=float) - self.k0) / self.width
        out = np.zeros_like(s)
        inside = np.abs(s) < 1.0
        out[inside] = np.exp(-s[inside] ** 2 / (1.0 - s[inside] ** 2))
        return out

    def __call__(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.envelope(k) * np.exp(1j * k * self.center)

    def norm2(self, order: int = 15) -> float:
        """||f||² = (1/2π) ∫ |f̂_o|²."""
        a, b = self.support
        ks, ws = gl_panels(a, b, self.width / 20.0, order)
        return float(np.sum(self.envelope(ks) ** 2 * ws)) / (2.0 * math.pi)

    @classmethod
    def from_kv(cls, text: str) -> "FhatProfile":
        values = parse_kv(text, allowed=("k0", "width", "center"))
        return cls(k0=kv_float(values, "k0", 3.0), width=kv_float(values, "width", 2.0),
                   center=kv_float(values, "center", 10.0))


@dataclass(frozen=True)
class ModifiedFreeState:
    t: float
    fhat: FhatProfile
    xgrid: np.ndarray
    samples: np.ndarray

    @property
    def norm(self) -> float:
        return math.sqrt(float(simpson(np.abs(self.samples) ** 2, x=self.xgrid)))

    @property
    def center(self) -> float:
        return self.t + self.fhat.center


def multiplier(q: Potential, t: float, k: float) -> complex:
    """M(t, k) = exp(ikt + (i/2k) ∫_0^t q)."""
    if k <= 0:
        raise InvalidInputError(f"multiplier needs k > 0, got {k}")
    if t < 0:
        raise InvalidInputError(f"multiplier needs t >= 0, got {t}")
    Q = conditional_integral(q, t) if t > 0 and not q.is_zero else 0.0
    return complex(np.exp(1j * (k * t + Q / (2.0 * k))))


def omega(q: Potential, t: float) -> float:
    """ω(t) = ∫_0^t |q| / √t."""
    if t <= 0:
        raise InvalidInputError(f"omega needs t > 0, got {t}")
    if q.is_zero:
        return 0.0
    return abs(conditional_integral(q, t, absolute=True)) / math.sqrt(t)


def _filon_weights(theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """E1 = ∫_0^1 e^{iθs} ds and E2 = ∫_0^1 s e^{iθs} ds."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < _TAYLOR_THETA
    th = np.where(small, 1.0, theta)
    e = np.exp(1j * th)
    E1 = (e - 1.0) / (1j * th)
    E2 = e / (1j * th) - (e - 1.0) / (1j * th) ** 2
    it = 1j * theta
    E1_small = 1.0 + it / 2.0 + it ** 2 / 6.0 + it ** 3 / 24.0
    E2_small = 0.5 + it / 3.0 + it ** 2 / 8.0 + it ** 3 / 30.0
    return np.where(small, E1_small, E1), np.where(small, E2_small, E2)


def default_xgrid(fhat: FhatProfile, t: float, cfg: Optional[Dict[str, Any]] = None) -> np.ndarray:
    wcfg = numerics(cfg, "waveop")
    c = t + fhat.center
    lo, hi = max(0.0, c - wcfg["x_halfwidth"]), c + wcfg["x_halfwidth"]
    return np.linspace(lo, hi, int(math.ceil((hi - lo) / wcfg["x_step"])) + 1)


def apply_W(q: Potential, fhat: FhatProfile, t: float, xgrid: Optional[np.ndarray] = None,
            cfg: Optional[Dict[str, Any]] = None) -> ModifiedFreeState:
    """[W(t)f](x) on xgrid."""
    wcfg = numerics(cfg, "waveop")
    if t < 0:
        raise InvalidInputError(f"apply_W needs t >= 0, got {t}")
    x = np.asarray(xgrid if xgrid is not None else default_xgrid(fhat, t, cfg), dtype=float)
    a, b = fhat.support
    reach = t + float(np.max(np.abs(x))) if len(x) else t
    panels = max(int(wcfg["k_panels"]), int(math.ceil(4.0 * reach * (b - a))))
    k = np.linspace(a, b, panels + 1)
    h = (b - a) / panels
    Q = conditional_integral(q, t) if t > 0 and not q.is_zero else 0.0
    g = fhat.envelope(k) * np.exp(0.5j * Q / k)
    dg = np.diff(g)
    kl = k[:-1]

    out = np.empty(len(x), dtype=complex)
    for start in range(0, len(x), 512):
        sl = slice(start, min(start + 512, len(x)))
        w = -(x[sl] - t - fhat.center)
        E = np.exp(1j * np.outer(w, kl))
        E1, E2 = _filon_weights(w * h)
        out[sl] = h * (E1 * (E @ g[:-1]) + E2 * (E @ dg))
    logger.debug(f"apply_W t={t:g}: {panels} panels, Q={Q:.6g}")
    return ModifiedFreeState(t=float(t), fhat=fhat, xgrid=x, samples=out / (2.0 * math.pi))


def band_limited_f(fhat: FhatProfile, x: np.ndarray, cfg: Optional[Dict[str, Any]] = None) -> np.ndarray:
    """f(x) = (1/2π) ∫_R e^{-ikx} f̂_o(k) dk on x > 0, from the odd continuation."""
    free = potential_from_kv("kind=zero")
    x = np.asarray(x, dtype=float)
    right = apply_W(free, fhat, 0.0, x, cfg).samples
    mirror = apply_W(free, fhat, 0.0, -x, cfg).samples
    return right - mirror


# -------------------------------------------------------------------------
# Spectral side
# -------------------------------------------------------------------------
def _pairing(model: SpectralModel, state: ModifiedFreeState, ks: np.ndarray,
             cfg: Optional[Dict[str, Any]] = None) -> np.ndarray:
    """∫ [W(t)f](x) u(x, k) dx."""
    out = np.empty(len(ks), dtype=complex)
    for sl, U, _ in regular_solution_chunks(model.q, ks, state.xgrid, cfg):
        out[sl] = simpson(U * state.samples[None, :], x=state.xgrid, axis=1)
    return out


def evolved_transform(model: SpectralModel, state: ModifiedFreeState,
                      cfg: Optional[Dict[str, Any]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """G_t(k) = e^{-ikt} ∫ W(t)f · u on the main and threshold grids (E < 0 dropped)."""
    t = state.t
    main = np.exp(-1j * model.kgrid * t) * _pairing(model, state, model.kgrid, cfg)
    thr = np.exp(-1j * model.threshold_k * t) * _pairing(model, state, model.threshold_k, cfg)
    return main, thr


def limit_transform(model: SpectralModel, fhat: FhatProfile) -> Tuple[np.ndarray, np.ndarray]:
    """G(f)(k) = conj(j_m(k)) f̂_o(k) / (2ik); zero on the threshold band."""
    k = model.kgrid
    return np.conj(model.jm) * fhat(k) / (2j * k), np.zeros(len(model.threshold_k), dtype=complex)


def _rho_distance2(model: SpectralModel, a: Tuple[np.ndarray, np.ndarray], b: Tuple[np.ndarray, np.ndarray]) -> float:
    return float(np.sum(np.abs(a[0] - b[0]) ** 2 * model.rho_weights())
                 + np.sum(np.abs(a[1] - b[1]) ** 2 * model.threshold_rho_weights()))


def zero_energy_mass(q: Potential, fhat: FhatProfile, t: float, delta: float, model: SpectralModel,
                     cfg: Optional[Dict[str, Any]] = None, state: Optional[ModifiedFreeState] = None) -> float:
    """dρ-mass of the transform of W(t)f on E ∈ [0, δ]."""
    if delta <= 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    wcfg = numerics(cfg, "waveop")
    state = state or apply_W(q, fhat, t, cfg=cfg)
    kmax = math.sqrt(delta)
    ks, ws = gl_panels(0.0, kmax, kmax / 4.0, int(wcfg["gl_order"]))
    mu = np.array([k / (math.pi * abs(jost_shooting(model.q, float(k), model.R_used)[0]) ** 2) for k in ks])
    vals = _pairing(model, state, ks, cfg)
    return float(np.sum(2.0 * ks * mu * ws * np.abs(vals) ** 2))


def localization_tail(state: ModifiedFreeState, q: Potential) -> float:
    """Fraction of ||W(t)f||² outside |x - t - center| < √(t ω(t))."""
    t = state.t
    radius = math.sqrt(t * omega(q, t)) if t > 0 else 0.0
    dens = np.abs(state.samples) ** 2
    total = float(simpson(dens, x=state.xgrid))
    outside = np.where(np.abs(state.xgrid - state.center) >= radius, dens, 0.0)
    return float(simpson(outside, x=state.xgrid)) / total if total > 0 else 0.0


def localization_second_moment(state: ModifiedFreeState) -> float:
    """∫ (x - t - center)² |W(t)f|² dx."""
    return float(simpson((state.xgrid - state.center) ** 2 * np.abs(state.samples) ** 2, x=state.xgrid))


def partial_integral_probe(state: ModifiedFreeState, alphas: Sequence[float], betas: Sequence[float],
                           ks: Sequence[float]) -> float:
    """sup |∫_α^β e^{ixk} [W(t)f](x) dx| over the given grids."""
    x = state.xgrid
    best = 0.0
    for k in ks:
        F = cumulative_trapezoid(np.exp(1j * k * x) * state.samples, x, initial=0.0)
        Fa = np.interp(alphas, x, F.real) + 1j * np.interp(alphas, x, F.imag)
        Fb = np.interp(betas, x, F.real) + 1j * np.interp(betas, x, F.imag)
        best = max(best, float(np.max(np.abs(Fb[None, :] - Fa[:, None]))))
    return best


def waveop_convergence(q: Potential, fhat: FhatProfile, tlist: Sequence[float], model: SpectralModel,
                       cfg: Optional[Dict[str, Any]] = None, flags: Optional[List[QualityFlag]] = None,
                       delta: float = 0.01) -> List[Dict[str, Any]]:
    """Cauchy gaps ||g_{t_i} - g_{t_{i-1}}|| of g_t = e^{-it√H₁} W(t) f, with side diagnostics."""
    if any(b <= a for a, b in zip(tlist, tlist[1:])):
        raise InvalidInputError(f"tlist must be increasing, got {list(tlist)}")
    if not decay_envelope_ok(q):
        raise_flag(flags, QualityFlag("waveop_convergence", f"{q.label} exceeds the C(1+x)^(-1/2) envelope",
                                      None, None), logger)
    records: List[Dict[str, Any]] = []
    prev = None
    for t in tlist:
        state = apply_W(q, fhat, float(t), cfg=cfg)
        G = evolved_transform(model, state, cfg)
        gap = math.sqrt(_rho_distance2(model, G, prev)) if prev is not None else None
        records.append({
            "t": float(t),
            "cauchy_gap": gap,
            "zero_energy_mass": zero_energy_mass(q, fhat, t, delta, model, cfg, state),
            "localization_tail": localization_tail(state, q) if t > 0 and not q.is_zero else None,
            "norm": state.norm,
        })
        logger.info(f"waveop t={t:g}: gap={gap}, ||W(t)f||={state.norm:.8f}")
        prev = G
    return records


def cesaro_gap(q: Potential, fhat: FhatProfile, T: float, model: SpectralModel,
               cfg: Optional[Dict[str, Any]] = None) -> float:
    """(1/T) ∫_0^T ||g_t - G(f)||² dt on a uniform t grid."""
    if T <= 0:
        raise InvalidInputError(f"T must be positive, got {T}")
    wcfg = numerics(cfg, "waveop")
    ts = np.linspace(0.0, T, int(wcfg["cesaro_points"]))
    target = limit_transform(model, fhat)
    d2 = [_rho_distance2(model, evolved_transform(model, apply_W(q, fhat, float(t), cfg=cfg), cfg), target) for t in ts]
    return float(trapezoid(d2, ts)) / T


# -------------------------------------------------------------------------
# Oscillatory principal-value bound
# -------------------------------------------------------------------------
@dataclass(frozen=True)
class OscProbeRecord:
    max_abs: float
    argmax: Tuple[float, float]
    values: Dict[Tuple[float, float], complex]

    def as_record(self) -> Dict[str, Any]:
        return {"max_abs": self.max_abs, "argmax": list(self.argmax)}


def _regular_part(gamma: float, T: float, delta: float, order: int) -> complex:
    """∫ over [1/2, 1-δ] ∪ [1+δ, 2] of (g(ξ) - g(1)) / (ξ - 1)."""
    rate = abs(gamma) + 4.0 * abs(T)
    per_unit = max(8.0, rate / math.pi)
    g1 = np.exp(1j * T)
    total = 0j
    for a, b in ((0.5, 1.0 - delta), (1.0 + delta, 2.0)):
        xs, ws = gl_panels(a, b, 1.0 / per_unit, order)
        g = np.exp(1j * (xs - 1.0) * gamma + 1j * T / xs)
        total += complex(np.sum(ws * (g - g1) / (xs - 1.0)))
    return total


def oscillatory_pv(gamma: float, T: float, cfg: Optional[Dict[str, Any]] = None,
                   flags: Optional[List[QualityFlag]] = None) -> complex:
    """v.p. ∫_{1/2}^2 e^{i(ξ-1)γ} e^{iT/ξ} / (ξ - 1) dξ.

    g(1) ln 2 carries the singular part; the rest is integrated outside a
    symmetric gap and extrapolated in the gap width (errors odd in δ).
    """
    wcfg = numerics(cfg, "waveop")
    order = int(wcfg["gl_order"])
    scale = 1.0 + abs(gamma) + abs(T)
    deltas = [d / scale for d in wcfg["vp_deltas"]]
    I = [_regular_part(gamma, T, d, order) for d in deltas]
    r1 = [(2.0 * I[i + 1] - I[i]) for i in range(len(I) - 1)]
    best = (8.0 * r1[1] - r1[0]) / 7.0 if len(r1) > 1 else r1[0]
    spread = abs(best - r1[-1])
    if spread > 1e-6 * max(1.0, abs(best)):
        raise_flag(flags, QualityFlag("oscillatory_bound_probe", f"gap extrapolation unsettled at γ={gamma:g}, T={T:g}",
                                      spread, 1e-6), logger)
    return complex(np.exp(1j * T) * math.log(2.0) + best)


def oscillatory_bound_probe(gamma_grid: Sequence[float], T_grid: Sequence[float],
                            cfg: Optional[Dict[str, Any]] = None,
                            flags: Optional[List[QualityFlag]] = None) -> OscProbeRecord:
    values: Dict[Tuple[float, float], complex] = {}
    for gamma in gamma_grid:
        for T in T_grid:
            values[(float(gamma), float(T))] = oscillatory_pv(float(gamma), float(T), cfg, flags)
    argmax = max(values, key=lambda key: abs(values[key]))
    return OscProbeRecord(max_abs=abs(values[argmax]), argmax=argmax, values=values)


def probe_grids(gamma_max: float, T_max: float, per_decade: int = 1) -> Tuple[List[float], List[float]]:
    """Symmetric log-spaced γ grid and a log-spaced T grid, both with 0."""
    def decades(top: float) -> np.ndarray:
        n = max(1, int(round(math.log10(top))) * per_decade)
        return np.logspace(1.0, math.log10(top), n) if top > 10 else np.array([top])

    g = decades(gamma_max)
    return sorted({0.0, *g.tolist(), *(-g).tolist()}), [0.0, *decades(T_max).tolist()]
