# evolution.py
"""
Wave evolution y_tt = y_xx - q y on the half-line, y(0, t) = 0.

Two routes:

- Spectral synthesis
      y(x,t) = ∫ [cos(kt) φ̆ + sin(kt)/k ψ̆] u(x,k) dρ
  on the model's Gauss-Legendre grid. Components on negative eigenvalues
  are projected out (they grow like e^{κt}) and the threshold band
  k < δ is excluded; both masses are reported in ``FieldState.meta``.

- Leapfrog finite differences on a uniform grid, used as an oracle. The
  first step uses the Taylor start y¹ = y⁰ + dt ψ + dt²/2 A y⁰ + dt³/6 A ψ and
  q is averaged at nodes that sit on a jump. The discrete energy
  ||(y^{n+1} - y^n)/dt||² + <y^{n+1}, H_h y^n> is conserved exactly and
  recorded along the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson

from src.config import numerics
from src.errors import ConfigError, InvalidInputError, QualityFlag, raise_flag
from src.logging_config import get_logger
from src.potential import Potential, check_integral_convergence, sample_nodes, sample_one_sided, segments, total_integral
from src.spectral import (
    SampledFunction,
    SpectralModel,
    build_model,
    generalized_transform,
    regular_solution_batch,
    regular_solution_chunks,
)
from src.utils import kv_float, parse_kv

logger = get_logger(__name__)


class PsiMode(str, Enum):
    ZERO = "zero"
    GIVEN = "given"
    MINUS_I_SQRT_H = "minus_i_sqrtH"


@dataclass(frozen=True)
class CauchyData:
    """Initial data (φ, ψ) with φ supported in ``support``."""

    phi: Callable[[np.ndarray], np.ndarray]
    support: Tuple[float, float]
    psi_mode: PsiMode = PsiMode.ZERO
    psi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kinks: Tuple[float, ...] = ()
    label: str = ""

    def grid(self, dx: float) -> np.ndarray:
        lo, hi = self.support
        pts = sorted({lo, hi, *[p for p in self.kinks if lo < p < hi]})
        pieces = [np.linspace(a, b, max(3, int(math.ceil((b - a) / dx)) + 1)) for a, b in zip(pts[:-1], pts[1:])]
        return np.unique(np.concatenate(pieces))

    def sampled(self, dx: float) -> SampledFunction:
        x = self.grid(dx)
        return SampledFunction(x=x, values=np.asarray(self.phi(x)))

    def psi_sampled(self, dx: float) -> Optional[SampledFunction]:
        if self.psi_mode != PsiMode.GIVEN or self.psi is None:
            return None
        x = self.grid(dx)
        return SampledFunction(x=x, values=np.asarray(self.psi(x)))

    def combine(self, other: "CauchyData", alpha: complex, beta: complex) -> "CauchyData":
        """α·self + β·other; both must share a ψ mode."""
        if self.psi_mode != other.psi_mode:
            raise InvalidInputError("cannot combine Cauchy data with different ψ modes")
        support = (min(self.support[0], other.support[0]), max(self.support[1], other.support[1]))
        psi = None
        if self.psi_mode == PsiMode.GIVEN:
            psi = lambda x: alpha * self.psi(x) + beta * other.psi(x)  # noqa: E731
        return CauchyData(
            phi=lambda x: alpha * self.phi(x) + beta * other.phi(x),
            support=support, psi_mode=self.psi_mode, psi=psi,
            kinks=tuple(sorted(set(self.kinks) | set(other.kinks))),
            label=f"{alpha}*({self.label})+{beta}*({other.label})",
        )

    @classmethod
    def from_samples(cls, x: np.ndarray, phi: np.ndarray, psi: Optional[np.ndarray] = None, label: str = "samples") -> "CauchyData":
        x = np.asarray(x, dtype=float)

        def interp(values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
            if np.iscomplexobj(values):
                return lambda s: np.interp(s, x, values.real, left=0.0, right=0.0) + 1j * np.interp(s, x, values.imag, left=0.0, right=0.0)
            return lambda s: np.interp(s, x, values, left=0.0, right=0.0)

        return cls(
            phi=interp(np.asarray(phi)),
            support=(float(x[0]), float(x[-1])),
            psi_mode=PsiMode.GIVEN if psi is not None else PsiMode.ZERO,
            psi=interp(np.asarray(psi)) if psi is not None else None,
            label=label,
        )


@dataclass(frozen=True)
class FieldState:
    xgrid: np.ndarray
    y: np.ndarray
    yt: np.ndarray
    t: float
    yx: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def rows(self) -> List[Tuple[float, float, float, float, float]]:
        y = np.asarray(self.y, dtype=complex)
        yt = np.asarray(self.yt, dtype=complex)
        return list(zip(self.xgrid.tolist(), y.real.tolist(), y.imag.tolist(), yt.real.tolist(), yt.imag.tolist()))


# -------------------------------------------------------------------------
# Data kinds
# -------------------------------------------------------------------------
_DATA_KEYS: Dict[str, Tuple[str, ...]] = {
    "ricker": ("center", "sigma"),
    "gaussian": ("center", "sigma"),
    "bump": ("lo", "hi"),
    "indicator": ("lo", "hi"),
    "sine_lobe": ("lo", "hi"),
    "bound_state": ("index",),
}


def _restrict(fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> Callable[[np.ndarray], np.ndarray]:
    def out(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where((x >= lo) & (x <= hi), fn(x), 0.0)

    return out


def _traveling_psi(phi: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> Callable[[np.ndarray], np.ndarray]:
    """ψ = -φ' (a right-moving wave in the free case), by centred differences."""
    h = 1e-5

    def psi(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where((x >= lo) & (x <= hi), -(phi(x + h) - phi(x - h)) / (2.0 * h), 0.0)

    return psi


def make_data(kind: str, params: Dict[str, float], psi_mode: PsiMode = PsiMode.ZERO,
              model: Optional[SpectralModel] = None) -> CauchyData:
    """Build Cauchy data; ``bound_state`` needs the model that holds the eigenvalues."""
    amp = params.get("amp", 1.0)
    kinks: Tuple[float, ...] = ()
    if kind in ("ricker", "gaussian"):
        c, s = params["center"], params["sigma"]
        if s <= 0:
            raise InvalidInputError(f"{kind} width must be positive, got {s}")
        lo, hi = max(0.0, c - 8.0 * s), c + 8.0 * s
        if kind == "ricker":
            norm = amp / math.sqrt(0.75 * s * math.sqrt(math.pi))
            base = lambda x: norm * (1.0 - ((x - c) / s) ** 2) * np.exp(-0.5 * ((x - c) / s) ** 2)  # noqa: E731
        else:
            norm = amp / math.sqrt(s * math.sqrt(math.pi))
            base = lambda x: norm * np.exp(-0.5 * ((x - c) / s) ** 2)  # noqa: E731
    elif kind in ("bump", "indicator", "sine_lobe"):
        lo, hi = params["lo"], params["hi"]
        if not 0 <= lo < hi:
            raise InvalidInputError(f"{kind} needs 0 <= lo < hi, got [{lo}, {hi}]")
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        if kind == "bump":
            base = lambda x: amp * np.clip(1.0 - ((x - mid) / half) ** 2, 0.0, None) ** 4  # noqa: E731
        elif kind == "indicator":
            base = lambda x: amp * np.ones_like(x)  # noqa: E731
            kinks = (lo, hi)
        else:
            base = lambda x: amp * np.sin(math.pi * (x - lo) / (hi - lo))  # noqa: E731
            kinks = (lo, hi)
    elif kind == "bound_state":
        if model is None or not model.dirichlet_eigs:
            raise InvalidInputError("bound_state data needs a model with a Dirichlet eigenvalue")
        idx = int(params.get("index", 0))
        kappa = model.dirichlet_kappas[idx]
        weight = model.point_weights[idx]
        lo, hi = 0.0, model.q.support_bound + 40.0 / kappa

        def base(x: np.ndarray, kappa=kappa, weight=weight) -> np.ndarray:
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            order = np.argsort(xs)
            U, _ = regular_solution_batch(model.q, [1j * kappa], xs[order])
            out = np.empty_like(xs)
            out[order] = U[0] * math.sqrt(weight) * amp
            return out.reshape(np.shape(x))
    else:
        raise InvalidInputError(f"unknown data kind '{kind}'")

    phi = _restrict(base, lo, hi)
    psi = _traveling_psi(phi, lo, hi) if psi_mode == PsiMode.GIVEN else None
    label = f"{kind}(" + ",".join(f"{k}={v:g}" for k, v in params.items()) + f";psi={psi_mode.value})"
    return CauchyData(phi=phi, support=(lo, hi), psi_mode=psi_mode, psi=psi, kinks=kinks, label=label)


def parse_data_spec(text: str, model: Optional[SpectralModel] = None) -> CauchyData:
    """``kind=ricker center=3 sigma=0.5 psi=minus_i_sqrtH``."""
    values = parse_kv(text)
    kind = values.pop("kind", None)
    if kind not in _DATA_KEYS:
        raise ConfigError(f"unknown data kind '{kind}' (expected one of {sorted(_DATA_KEYS)})")
    psi_text = values.pop("psi", PsiMode.ZERO.value)
    try:
        psi_mode = PsiMode(psi_text)
    except ValueError as e:
        raise ConfigError(f"unknown psi mode '{psi_text}'") from e
    allowed = set(_DATA_KEYS[kind]) | {"amp"}
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys {unknown} for data kind '{kind}'")
    params = {key: kv_float(values, key, 0.0 if key == "index" else None) for key in _DATA_KEYS[kind]}
    if "amp" in values:
        params["amp"] = kv_float(values, "amp")
    return make_data(kind, params, psi_mode, model)


# -------------------------------------------------------------------------
# Spectral route
# -------------------------------------------------------------------------
def evolution_model(q: Potential, t_max: float, data_hi: float, R: Optional[float] = None,
                    cfg: Optional[Dict[str, Any]] = None, flags: Optional[List[QualityFlag]] = None) -> SpectralModel:
    """Model with k panels narrow enough for synthesis up to t_max on [0, data_hi + t_max + padding]."""
    ecfg = numerics(cfg, "evolution")
    if R is None:
        if not q.is_compact:
            raise InvalidInputError(f"{q.label}: evolution of a non-compact potential needs a truncation radius")
        R = max(q.support_bound, 1e-6)
    span = 2.0 * t_max + 2.0 * data_hi + ecfg["padding"]
    width = min(1.0, 10.0 / span)
    return build_model(q, R, cfg, kmax=ecfg["kmax"], delta=math.sqrt(ecfg["delta_sq"]), panel_width=width, flags=flags)


@dataclass(frozen=True)
class SpectralCoefficients:
    phi: np.ndarray
    psi: np.ndarray
    excluded_mass: float
    projected_mass: float
    norm2: float


def spectral_coefficients(data: CauchyData, model: SpectralModel, cfg: Optional[Dict[str, Any]] = None,
                          flags: Optional[List[QualityFlag]] = None) -> SpectralCoefficients:
    """φ̆ and ψ̆ on the main grid plus the masses the synthesis leaves out."""
    ecfg = numerics(cfg, "evolution")
    f = data.sampled(ecfg["dx"])
    tp = generalized_transform(model.q, f, model, cfg)
    phi = tp.values
    if data.psi_mode == PsiMode.MINUS_I_SQRT_H:
        psi = -1j * model.kgrid * phi
    elif data.psi_mode == PsiMode.GIVEN:
        g = data.psi_sampled(ecfg["dx"])
        psi = generalized_transform(model.q, g, model, cfg).values if g is not None else np.zeros_like(phi)
    else:
        psi = np.zeros_like(phi)
    excluded = float(np.sum(np.abs(tp.threshold_values) ** 2 * model.threshold_rho_weights()))
    projected = float(np.sum(np.abs(tp.point_values) ** 2 * np.array(model.point_weights))) if len(tp.point_values) else 0.0
    if tp.norm2 > 0 and excluded > ecfg["excluded_mass_limit"] * tp.norm2:
        raise_flag(flags, QualityFlag("evolve_spectral", f"excluded threshold mass {excluded / tp.norm2:.2%} of ||φ||²",
                                      excluded / tp.norm2, ecfg["excluded_mass_limit"]), logger)
    return SpectralCoefficients(phi=phi, psi=psi, excluded_mass=excluded, projected_mass=projected, norm2=tp.norm2)


def synthesize(model: SpectralModel, coeffs: SpectralCoefficients, t: float, x: np.ndarray,
               cfg: Optional[Dict[str, Any]] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(y, y_t, y_x) at time t on a sorted grid."""
    k = model.kgrid
    rho = model.rho_weights()
    c, s = np.cos(k * t), np.sin(k * t)
    A = rho * (c * coeffs.phi + s / k * coeffs.psi)
    B = rho * (-k * s * coeffs.phi + c * coeffs.psi)
    y = np.zeros(len(x), dtype=complex)
    yt = np.zeros(len(x), dtype=complex)
    yx = np.zeros(len(x), dtype=complex)
    for sl, U, Up in regular_solution_chunks(model.q, k, x, cfg):
        y += A[sl] @ U
        yt += B[sl] @ U
        yx += A[sl] @ Up
    if not (np.iscomplexobj(coeffs.phi) or np.iscomplexobj(coeffs.psi)):
        return y.real, yt.real, yx.real
    return y, yt, yx


def default_xgrid(data: CauchyData, t: float, cfg: Optional[Dict[str, Any]] = None) -> np.ndarray:
    ecfg = numerics(cfg, "evolution")
    X = data.support[1] + t + ecfg["padding"]
    n = int(math.ceil(X / ecfg["dx"]))
    return np.arange(n + 1) * ecfg["dx"]


def evolve_spectral(q: Potential, data: CauchyData, t: float, model: SpectralModel,
                    xgrid: Optional[np.ndarray] = None, cfg: Optional[Dict[str, Any]] = None,
                    flags: Optional[List[QualityFlag]] = None,
                    coeffs: Optional[SpectralCoefficients] = None) -> FieldState:
    """Spectral synthesis of the a.c. part of the evolution at time t."""
    if t < 0:
        raise InvalidInputError(f"t must be nonnegative, got {t}")
    x = np.asarray(xgrid if xgrid is not None else default_xgrid(data, t, cfg), dtype=float)
    coeffs = coeffs or spectral_coefficients(data, model, cfg, flags)
    meta = {"excluded_mass": coeffs.excluded_mass, "projected_mass": coeffs.projected_mass, "norm2": coeffs.norm2}
    y, yt, yx = synthesize(model, coeffs, t, x, cfg)
    if t == 0:
        meta["data_gap"] = float(np.max(np.abs(y - data.phi(x)))) if len(x) else 0.0
    logger.debug(f"evolve_spectral t={t:g}: {len(model.kgrid)} k-nodes, {len(x)} x-points")
    return FieldState(xgrid=x, y=y, yt=yt, t=float(t), yx=yx, meta=meta)


def project_continuous(q: Potential, data: CauchyData, model: SpectralModel, dx: Optional[float] = None,
                       cfg: Optional[Dict[str, Any]] = None) -> CauchyData:
    """x-space samples of the data the spectral synthesis evolves (bound states and k < δ removed)."""
    ecfg = numerics(cfg, "evolution")
    dx = dx or ecfg["dx"]
    coeffs = spectral_coefficients(data, model, cfg)
    extra = 25.0 / min(model.dirichlet_kappas) if model.dirichlet_kappas else 0.0
    X = data.support[1] + extra
    x = np.arange(int(math.ceil(X / dx)) + 1) * dx
    y, yt, _ = synthesize(model, coeffs, 0.0, x, cfg)
    y[0] = 0.0
    psi = yt if data.psi_mode != PsiMode.ZERO else None
    return CauchyData.from_samples(x, y, psi, label=f"P_ac[{data.label}]")


# -------------------------------------------------------------------------
# Finite-difference route
# -------------------------------------------------------------------------
def _apply_A(y: np.ndarray, qn: np.ndarray, inv_dx2: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) * inv_dx2 - qn[1:-1] * y[1:-1]
    return out


def evolve_fdtd(q: Potential, data: CauchyData, t: float, dx: float, dt: float,
                X: Optional[float] = None, cfg: Optional[Dict[str, Any]] = None,
                record_every: int = 0) -> FieldState:
    """Leapfrog for y_tt = y_xx - q y with Dirichlet walls at 0 and X."""
    ecfg = numerics(cfg, "evolution")
    if dx <= 0 or dt <= 0:
        raise InvalidInputError("dx and dt must be positive")
    if dt > ecfg["cfl"] * dx:
        raise InvalidInputError(f"CFL violation: dt={dt:g} > {ecfg['cfl']:g}·dx={ecfg['cfl'] * dx:g}")
    if data.psi_mode == PsiMode.MINUS_I_SQRT_H and data.psi is None:
        raise InvalidInputError("ψ = -i√H φ has no x-space form here; pass the data through project_continuous first")
    X = X or data.support[1] + t + ecfg["padding"]
    n = int(math.ceil(X / dx))
    x = np.arange(n + 1) * dx
    qn = sample_nodes(q, x)
    inv_dx2 = 1.0 / (dx * dx)

    steps = int(math.ceil(t / dt)) if t > 0 else 0
    dt = t / steps if steps else dt
    y0 = np.asarray(data.phi(x))
    v0 = np.asarray(data.psi(x)) if data.psi is not None else np.zeros_like(y0)
    dtype = complex if (np.iscomplexobj(y0) or np.iscomplexobj(v0)) else float
    y0 = y0.astype(dtype)
    v0 = v0.astype(dtype)
    y0[0] = y0[-1] = 0.0
    v0[0] = v0[-1] = 0.0
    if steps == 0:
        return FieldState(xgrid=x, y=y0, yt=v0, t=0.0, meta={"steps": 0, "energy_trace": np.empty((0, 2))})

    record_every = record_every or max(1, steps // 200)

    def discrete_energy(y_new: np.ndarray, y_old: np.ndarray) -> float:
        vel = (y_new - y_old) / dt
        return float(np.sum(np.abs(vel) ** 2) * dx - np.real(np.vdot(y_new, _apply_A(y_old, qn, inv_dx2))) * dx)

    Ay0 = _apply_A(y0, qn, inv_dx2)
    y1 = y0 + dt * v0 + 0.5 * dt * dt * Ay0 + dt ** 3 / 6.0 * _apply_A(v0, qn, inv_dx2)
    y1[0] = y1[-1] = 0.0
    trace = [(0.5 * dt, discrete_energy(y1, y0))]
    prev, cur = y0, y1
    dt2 = dt * dt
    for step in range(1, steps + 1):
        nxt = 2.0 * cur - prev + dt2 * _apply_A(cur, qn, inv_dx2)
        nxt[0] = nxt[-1] = 0.0
        if step % record_every == 0:
            trace.append(((step + 0.5) * dt, discrete_energy(nxt, cur)))
        if step == steps:
            yt = (nxt - prev) / (2.0 * dt)
            state_y = cur
            break
        prev, cur = cur, nxt
    logger.debug(f"evolve_fdtd t={t:g}: {steps} steps, {len(x)} nodes")
    return FieldState(xgrid=x, y=state_y, yt=yt, t=float(t),
                      meta={"steps": steps, "dt": dt, "energy_trace": np.asarray(trace)})


def energy_drift(state: FieldState) -> float:
    """max |E - E_0| / E_0 along a recorded leapfrog energy trace."""
    trace = np.asarray(state.meta.get("energy_trace", np.empty((0, 2))))
    if len(trace) < 2 or trace[0, 1] == 0:
        return 0.0
    return float(np.max(np.abs(trace[:, 1] - trace[0, 1])) / abs(trace[0, 1]))


# -------------------------------------------------------------------------
# Diagnostics
# -------------------------------------------------------------------------
def energy(q: Potential, state: FieldState) -> float:
    """∫ (|y_t|² + |y_x|² + q|y|²) dx, Simpson on each interval where q is smooth."""
    x = state.xgrid
    yx = state.yx if state.yx is not None else np.gradient(state.y, x, edge_order=2)
    total = 0.0
    edges = segments(q, float(x[0]), float(x[-1]))
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (x >= a - 1e-12) & (x <= b + 1e-12)
        if np.count_nonzero(sel) < 2:
            continue
        xs = x[sel]
        qs = sample_one_sided(q, xs)
        dens = np.abs(state.yt[sel]) ** 2 + np.abs(yx[sel]) ** 2 + qs * np.abs(state.y[sel]) ** 2
        total += float(simpson(dens, x=xs))
    return total


def l2_distance(a: FieldState, b: FieldState, upto: Optional[float] = None) -> float:
    """||a.y - b.y|| on a's grid, with b interpolated onto it."""
    x = a.xgrid
    if upto is not None:
        x = x[x <= upto]
    ya = np.asarray(a.y[: len(x)], dtype=complex)
    yb = np.interp(x, b.xgrid, np.real(b.y)) + 1j * np.interp(x, b.xgrid, np.imag(np.asarray(b.y, dtype=complex)))
    return math.sqrt(float(simpson(np.abs(ya - yb) ** 2, x=x)))


def light_cone_leakage(state: FieldState, a: float, margin: float) -> float:
    """max |y| beyond x = a + t + margin."""
    sel = state.xgrid > a + state.t + margin
    return float(np.max(np.abs(state.y[sel]))) if sel.any() else 0.0


def ballistic_mass(state: FieldState) -> float:
    """∫_{t-√t}^{t+√t} |y(x,t)|² dx."""
    t = state.t
    if t < 1:
        raise InvalidInputError(f"ballistic window needs t >= 1, got {t}")
    lo, hi = t - math.sqrt(t), t + math.sqrt(t)
    x = state.xgrid
    if x[0] > lo + 1e-9 or x[-1] < hi - 1e-9:
        raise InvalidInputError(f"grid [{x[0]:g}, {x[-1]:g}] does not cover the window [{lo:g}, {hi:g}]")
    sel = (x >= lo) & (x <= hi)
    return float(simpson(np.abs(state.y[sel]) ** 2, x=x[sel]))


def ballistic_window(t: float, dx: float) -> np.ndarray:
    lo, hi = t - math.sqrt(t), t + math.sqrt(t)
    return np.linspace(lo, hi, int(math.ceil((hi - lo) / dx)) + 1)


def pure_point_localization(model: SpectralModel, t: float, index: int = 0, n: int = 4001) -> float:
    """Fraction of a bound-state eigenfunction's mass in [t-√t, t+√t].

    The evolution of an eigenfunction only rescales it in time, so the fraction
    is the same at every t.
    """
    if not model.dirichlet_eigs:
        raise InvalidInputError("model has no Dirichlet eigenvalue")
    kappa = model.dirichlet_kappas[index]
    x = ballistic_window(t, (2.0 * math.sqrt(t)) / (n - 1))
    U, _ = regular_solution_batch(model.q, [1j * kappa], x)
    return float(simpson(U[0] ** 2, x=x)) * model.point_weights[index]


def asymptotic_profile(q: Potential, f: CauchyData, model: SpectralModel, xwindow: np.ndarray,
                       cfg: Optional[Dict[str, Any]] = None) -> np.ndarray:
    """μ_f(x) = (1/πi) ∫ k f̆(k)/j_m(k) · exp(ikx - (i/2k)∫_0^∞ q) dk on xwindow."""
    ecfg = numerics(cfg, "evolution")
    if not q.is_compact:
        _, ok = check_integral_convergence(q)
        if not ok:
            raise InvalidInputError(f"{q.label}: ∫q does not pass the Cauchy test; μ_f is undefined")
    Q = total_integral(model.q) if not model.q.is_zero else 0.0
    k, w = model.kgrid, model.kweights
    fb = generalized_transform(model.q, f.sampled(ecfg["dx"]), model, cfg).values
    h = k * fb / model.jm * np.exp(-0.5j * Q / k)
    x = np.asarray(xwindow, dtype=float)
    return (np.exp(1j * np.outer(x, k)) @ (w * h)) / (1j * math.pi)


def convergence_test_ch1(q: Potential, f: CauchyData, Tlist: Sequence[float], xwindow: np.ndarray,
                         model: SpectralModel, cfg: Optional[Dict[str, Any]] = None) -> List[float]:
    """sup_x |y(T+x, T) - μ_f(x)| for data (f, -i√H f)."""
    x = np.asarray(xwindow, dtype=float)
    reach = 10.0 / (model.kgrid[1] - model.kgrid[0]) if len(model.kgrid) > 1 else math.inf
    data = CauchyData(phi=f.phi, support=f.support, psi_mode=PsiMode.MINUS_I_SQRT_H, kinks=f.kinks, label=f.label)
    coeffs = spectral_coefficients(data, model, cfg)
    profile = asymptotic_profile(q, data, model, x, cfg)
    out = []
    for T in Tlist:
        pts = T + x
        if pts[0] < 0:
            raise InvalidInputError(f"window [{pts[0]:g}, {pts[-1]:g}] leaves the half-line at T={T:g}")
        if 2.0 * T + pts[-1] > 40.0 * reach:
            logger.warning(f"T={T:g} outruns the k-panel resolution of the model")
        y, _, _ = synthesize(model, coeffs, T, pts, cfg)
        out.append(float(np.max(np.abs(y - profile))))
    return out


def time_reversal_check(q: Potential, data: CauchyData, t: float, model: SpectralModel,
                        cfg: Optional[Dict[str, Any]] = None) -> Dict[str, float]:
    """Evolve (φ, 0) to t, flip y_t, evolve t again; compare with the projected φ."""
    if data.psi_mode != PsiMode.ZERO:
        raise InvalidInputError("time reversal check takes data with ψ = 0")
    ecfg = numerics(cfg, "evolution")
    x = default_xgrid(data, t, cfg)
    coeffs = spectral_coefficients(data, model, cfg)
    y0, _, _ = synthesize(model, coeffs, 0.0, x, cfg)
    y1, yt1, _ = synthesize(model, coeffs, t, x, cfg)
    back = CauchyData.from_samples(x, y1, -yt1, label="reversed")
    coeffs2 = spectral_coefficients(back, model, cfg)
    y2, _, _ = synthesize(model, coeffs2, t, x, cfg)
    ref = np.asarray(data.phi(x))
    norm = math.sqrt(float(simpson(np.abs(ref) ** 2, x=x))) or 1.0
    one_way = math.sqrt(float(simpson(np.abs(y0 - ref) ** 2, x=x))) / norm
    reversal = math.sqrt(float(simpson(np.abs(y2 - y0) ** 2, x=x))) / norm
    return {"one_way_error": one_way, "reversal_error": reversal, "dx": ecfg["dx"]}


def linearity_check(q: Potential, d1: CauchyData, d2: CauchyData, alpha: complex, beta: complex,
                    t: float, model: SpectralModel, cfg: Optional[Dict[str, Any]] = None) -> float:
    """max |E(αd1 + βd2) - αE(d1) - βE(d2)| on a common grid."""
    hi = max(d1.support[1], d2.support[1])
    ecfg = numerics(cfg, "evolution")
    x = np.arange(int(math.ceil((hi + t + ecfg["padding"]) / ecfg["dx"])) + 1) * ecfg["dx"]
    s1 = evolve_spectral(q, d1, t, model, x, cfg)
    s2 = evolve_spectral(q, d2, t, model, x, cfg)
    s12 = evolve_spectral(q, d1.combine(d2, alpha, beta), t, model, x, cfg)
    return float(np.max(np.abs(s12.y - (alpha * s1.y + beta * s2.y))))
