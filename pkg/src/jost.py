# jost.py
"""
Modified Jost functions for truncated potentials.

For x <= R the Jost solution of -y'' + q_R y = k^2 y with y = e^{ikx} beyond R
is written as

    j(x) = e^{iθ(x)} ψ1(x) + e^{-iθ(x)} ψ2(x),   θ(x) = kx + φ(x,k,R),

with ψ1(R) = 1, ψ2(R) = 0. Setting χ = e^{-2iθ} ψ2 the pair solves the
Volterra system

    ψ1(x) = 1 + (i/2k) ∫_x^R q χ
    χ(x)  = -(i/2k) ∫_x^R q(t) e^{2i(θ(t) - θ(x))} ψ1(t) dt

which is solved by Picard iteration from (1, 0), trapezoid rule on a grid
with nodes at every breakpoint of q. The interval is cut into blocks that
each carry bounded mass ∫|q|/(2|k|) and bounded exponential growth of
e^{2iθ}; blocks are solved right to left. Three trapezoid levels (h, h/2,
h/4) are combined by Romberg extrapolation.

At x = 0: j_m = ψ1(0) + χ(0), a = e^{iφ0} ψ1(0), b = e^{iφ0} χ(0), and
j'(0) = ik(a - b).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from src.config import numerics
from src.errors import ConvergenceError, InvalidInputError
from src.logging_config import get_logger
from src.potential import Potential, clamped_scalar, phase, running_integral, sample_one_sided, segments

logger = get_logger(__name__)


@dataclass(frozen=True)
class WaveNumber:
    value: complex

    def __post_init__(self) -> None:
        v = complex(self.value)
        if v == 0:
            raise InvalidInputError("wavenumber k = 0 is not admissible")
        if v.imag < 0:
            raise InvalidInputError(f"wavenumber must satisfy Im k >= 0, got {v}")
        object.__setattr__(self, "value", v)

    @property
    def energy(self) -> complex:
        return self.value * self.value

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0


def as_k(k: "complex | WaveNumber") -> complex:
    """Validate and unwrap a wavenumber."""
    if isinstance(k, WaveNumber):
        return k.value
    return WaveNumber(k).value


@dataclass(frozen=True)
class JostData:
    k: complex
    R: float
    grid: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    phi0: complex
    jm: complex
    j: complex
    jprime0: complex
    a: complex
    b: complex
    am: complex
    iteration_count: int
    residual: float
    phi: np.ndarray
    chi: np.ndarray

    def as_record(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "R": self.R,
            "jm": self.jm,
            "j": self.j,
            "a": self.a,
            "b": self.b,
            "residual": self.residual,
            "iterations": self.iteration_count,
        }


# -------------------------------------------------------------------------
# Grid and blocks
# -------------------------------------------------------------------------
def _step(q: Potential, k: complex, R: float, cfg: Dict[str, Any]) -> float:
    h = float(cfg["hmax"])
    if q.max_abs > 0:
        h = min(h, cfg["step_fraction"] * 2.0 * abs(k) / q.max_abs)
    h = min(h, cfg["phase_step"] / abs(k))
    ls = q.length_scale(R)
    if math.isfinite(ls):
        h = min(h, ls / 20.0)
    return h


def _coarse_segments(q: Potential, R: float, h: float) -> List[np.ndarray]:
    edges = segments(q, 0.0, R)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(2, int(math.ceil((b - a) / h)))
        out.append(np.linspace(a, b, n + 1))
    return out


def _refine(seg: np.ndarray, times: int) -> np.ndarray:
    for _ in range(times):
        out = np.empty(2 * len(seg) - 1)
        out[0::2] = seg
        out[1::2] = 0.5 * (seg[1:] + seg[:-1])
        seg = out
    return seg


def _tail(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """∫_{x_i}^{x_last} f by the trapezoid rule."""
    return -cumulative_trapezoid(f[::-1], x[::-1], initial=0)[::-1]


def _blocks(x: np.ndarray, qv: np.ndarray, k: complex, cfg: Dict[str, Any]) -> List[Tuple[int, int]]:
    """Index pairs (lo, hi) on the coarse grid, listed right to left."""
    mass = _tail(np.abs(qv) / (2.0 * abs(k)), x).real
    growth = _tail(2.0 * np.abs(k.imag - (qv / (2.0 * k)).imag), x).real
    limit_m = float(cfg["block_mass"])
    limit_g = float(cfg["block_growth"])
    # both tails are nonincreasing in the index; search on the reversed arrays
    rev_m = mass[::-1]
    rev_g = growth[::-1]
    n = len(x)
    blocks = []
    hi = n - 1
    while hi > 0:
        lo_m = n - np.searchsorted(rev_m, mass[hi] + limit_m, side="right")
        lo_g = n - np.searchsorted(rev_g, growth[hi] + limit_g, side="right")
        lo = int(min(max(lo_m, lo_g, 0), hi - 1))
        blocks.append((lo, hi))
        hi = lo
    return blocks


def _solve_block(x: np.ndarray, qv: np.ndarray, theta: np.ndarray, P: complex, C: complex,
                 k: complex, tol: float, max_iter: int) -> Tuple[np.ndarray, np.ndarray, int, float]:
    c = 0.5j / k
    rel = theta - theta[-1]
    up = np.exp(2j * rel)
    down = np.exp(-2j * rel)
    psi1 = np.full(len(x), P, dtype=complex)
    chi = down * C
    diff = math.inf
    for it in range(1, max_iter + 1):
        new1 = P + c * _tail(qv * chi, x)
        newchi = down * (C - c * _tail(qv * up * new1, x))
        diff = float(max(np.max(np.abs(new1 - psi1)), np.max(np.abs(newchi - chi))))
        psi1, chi = new1, newchi
        scale = 1.0 + max(float(np.max(np.abs(psi1))), float(np.max(np.abs(chi))))
        if diff <= tol * scale:
            return psi1, chi, it, diff
    raise ConvergenceError(
        f"Picard iteration did not converge in {max_iter} sweeps on [{x[0]:g}, {x[-1]:g}] "
        f"(last change {diff:.3e}); grid too coarse for k={k}"
    )


def _solve_level(q: Potential, segs: List[np.ndarray], coarse_blocks: List[Tuple[int, int]],
                 k: complex, level: int, cfg: Dict[str, Any], tol: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int, float]:
    fine = [_refine(s, level) for s in segs]
    x = np.concatenate(fine)
    qv = np.concatenate([sample_one_sided(q, s) for s in fine])
    theta = k * x + running_integral(q, x) / (2.0 * k)

    offsets = np.cumsum([0] + [len(s) for s in fine[:-1]])
    scale = 2 ** level
    coarse_pos = np.concatenate([off + np.arange((len(s) - 1) // scale + 1) * scale for off, s in zip(offsets, fine)])

    psi1 = np.empty(len(x), dtype=complex)
    chi = np.empty(len(x), dtype=complex)
    P, C = 1.0 + 0j, 0j
    iters, resid = 0, 0.0
    for lo_c, hi_c in coarse_blocks:
        lo, hi = int(coarse_pos[lo_c]), int(coarse_pos[hi_c])
        sl = slice(lo, hi + 1)
        b1, bchi, it, d = _solve_block(x[sl], qv[sl], theta[sl], P, C, k, tol, int(cfg["max_iterations"]))
        psi1[sl], chi[sl] = b1, bchi
        P, C = b1[0], bchi[0]
        iters, resid = max(iters, it), max(resid, d)
    return psi1[coarse_pos], chi[coarse_pos], x[coarse_pos], iters, resid


def _richardson(values: List[Any]) -> Any:
    table = list(values)
    for m in range(1, len(table)):
        fac = 4.0 ** m
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0) for i in range(len(table) - 1)]
    return table[0]


# -------------------------------------------------------------------------
# Public operations
# -------------------------------------------------------------------------
def _free(k: complex, R: float) -> JostData:
    grid = np.array([0.0, R])
    data = JostData(
        k=k, R=R, grid=grid,
        psi1=np.ones(2, dtype=complex), psi2=np.zeros(2, dtype=complex),
        phi0=0j, jm=1 + 0j, j=1 + 0j, jprime0=1j * k,
        a=1 + 0j, b=0j, am=1 + 0j, iteration_count=1, residual=0.0,
        phi=np.zeros(2, dtype=complex), chi=np.zeros(2, dtype=complex),
    )
    return data


def solve_psi(q: Potential, k: "complex | WaveNumber", R: float, tol: Optional[float] = None,
              cfg: Optional[Dict[str, Any]] = None) -> JostData:
    """Solve the ψ system for q_R at wavenumber k."""
    jcfg = numerics(cfg, "jost")
    k = as_k(k)
    if R <= 0:
        raise InvalidInputError(f"R must be positive, got {R}")
    if k.imag == 0 and abs(k) < jcfg["k_cutoff"]:
        raise InvalidInputError(f"|k| = {abs(k):g} is below the real-axis cutoff {jcfg['k_cutoff']:g}")
    tol = tol or jcfg["tol"]
    if q.is_zero:
        return _free(k, R)

    R_eff = min(R, q.support_bound) if q.is_compact else R
    if R_eff <= 0:
        return _free(k, R)

    h = _step(q, k, R, jcfg)
    segs = _coarse_segments(q, R_eff, h)
    x_coarse = np.concatenate(segs)
    q_coarse = np.concatenate([sample_one_sided(q, s) for s in segs])
    blocks = _blocks(x_coarse, q_coarse, k, jcfg)

    levels = max(1, int(jcfg["richardson_levels"]))
    per_level = [_solve_level(q, segs, blocks, k, lvl, jcfg, tol) for lvl in range(levels)]
    psi1 = _richardson([p[0] for p in per_level])
    chi = _richardson([p[1] for p in per_level])
    iters = per_level[-1][3]
    resid = max(p[4] for p in per_level)

    keep = np.ones(len(x_coarse), dtype=bool)
    keep[1:] = np.diff(x_coarse) > 0
    grid, psi1, chi = x_coarse[keep], psi1[keep], chi[keep]
    phi = running_integral(q, grid) / (2.0 * k)
    if R > R_eff:
        grid = np.append(grid, R)
        psi1 = np.append(psi1, 1.0 + 0j)
        chi = np.append(chi, 0j)
        phi = np.append(phi, 0j)
    psi2 = np.exp(2j * (k * grid + phi)) * chi

    phi0 = phase(q, 0.0, k, R_eff)
    jm = complex(psi1[0] + chi[0])
    e = cmath.exp(1j * phi0)
    a = e * complex(psi1[0])
    b = e * complex(chi[0])
    data = JostData(
        k=k, R=float(R), grid=grid, psi1=psi1, psi2=psi2,
        phi0=phi0, jm=jm, j=e * jm, jprime0=1j * k * (a - b),
        a=a, b=b, am=complex(psi1[0]), iteration_count=iters, residual=resid,
        phi=phi, chi=chi,
    )
    logger.debug(f"solve_psi k={k} R={R:g}: h={h:.3g} blocks={len(blocks)} iters={iters} resid={resid:.2e}")
    return data


def modified_jost(q: Potential, k: "complex | WaveNumber", R: float, cfg: Optional[Dict[str, Any]] = None) -> complex:
    return solve_psi(q, k, R, cfg=cfg).jm


def jost_value(q: Potential, k: "complex | WaveNumber", R: float, cfg: Optional[Dict[str, Any]] = None) -> complex:
    """j(0,k,R)."""
    return solve_psi(q, k, R, cfg=cfg).j


def scattering_ab(q: Potential, k: "complex | WaveNumber", R: float,
                  cfg: Optional[Dict[str, Any]] = None) -> Tuple[complex, complex, complex]:
    """(a, b, a_m) for q_R; a_m is ψ1(0), checked against the shooting route."""
    data = solve_psi(q, k, R, cfg=cfg)
    k = data.k
    gap = abs(am_shooting(q, k, R) - data.am)
    if gap > 1e-6 * max(1.0, abs(data.am)):
        logger.warning(f"a_m routes disagree at k={k}, R={R:g}: |Δ|={gap:.3e}")
    return data.a, data.b, data.am


def am_shooting(q: Potential, k: "complex | WaveNumber", R: float) -> complex:
    """a_m = e^{-iφ(0)} (ik j(0) + j'(0)) / (2ik) from the shooting values of j."""
    k = as_k(k)
    j0, jp0 = jost_shooting(q, k, R)
    return (1j * k * j0 + jp0) / (2j * k) * cmath.exp(-1j * phase(q, 0.0, k, R))


def transmission_reflection(q: Potential, k: float, R: float, cfg: Optional[Dict[str, Any]] = None) -> Tuple[float, complex]:
    """T(k) = 1/|a|^2 and r(k) = b/a at real k."""
    if complex(k).imag != 0:
        raise InvalidInputError("transmission and reflection are defined for real k")
    a, b, _ = scattering_ab(q, k, R, cfg=cfg)
    return 1.0 / abs(a) ** 2, b / a


def djost_dR(q: Potential, k: float, R: float, cfg: Optional[Dict[str, Any]] = None) -> complex:
    """∂_R j(k,R) = (q(R)/(2ik)) (-j + conj(j) e^{2ikR}) for real k."""
    kc = complex(k)
    if kc.imag != 0:
        raise InvalidInputError("the R-derivative formula holds for real k only")
    kk = as_k(kc)
    qR = float(q(np.array(R)))
    if qR == 0.0:
        return 0j
    j = jost_value(q, kk, R, cfg=cfg)
    return qR / (2j * kk) * (-j + j.conjugate() * cmath.exp(2j * kk * R))


def wronskian_check(q: Potential, k: float, R: float, cfg: Optional[Dict[str, Any]] = None) -> float:
    """max |W(j, conj j) - 2ik| over the grid, with W = j' conj(j) - j conj(j)'."""
    kc = complex(k)
    if kc.imag != 0:
        raise InvalidInputError("the Wronskian check needs real k")
    data = solve_psi(q, kc, R, cfg=cfg)
    w = 2j * data.k * (np.abs(data.psi1) ** 2 - np.abs(data.psi2) ** 2)
    return float(np.max(np.abs(w - 2j * data.k)))


def jost_shooting(q: Potential, k: "complex | WaveNumber", R: float,
                  rtol: float = 1e-12, atol: float = 1e-14) -> Tuple[complex, complex]:
    """(j(0,k,R), j'(0,k,R)) by integrating the ODE from R down to 0."""
    k = as_k(k)
    y = np.array([cmath.exp(1j * k * R), 1j * k * cmath.exp(1j * k * R)], dtype=complex)
    if q.is_zero:
        return 1 + 0j, 1j * k
    R_eff = min(R, q.support_bound) if q.is_compact else R
    if R_eff < R:
        s = R - R_eff
        y = np.array([
            y[0] * cmath.cos(k * s) - y[1] * cmath.sin(k * s) / k,
            y[0] * k * cmath.sin(k * s) + y[1] * cmath.cos(k * s),
        ], dtype=complex)
    edges = segments(q, 0.0, R_eff)
    k2 = k * k
    for a, b in zip(edges[::-1][1:], edges[::-1][:-1]):
        qs = clamped_scalar(q, a, b)

        def rhs(x, v, qs=qs):
            return [v[1], (qs(x) - k2) * v[0]]

        sol = solve_ivp(rhs, (b, a), y, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise ConvergenceError(f"shooting failed on [{a:g}, {b:g}] at k={k}: {sol.message}")
        y = sol.y[:, -1]
    return complex(y[0]), complex(y[1])


def square_well_jost(k: complex, depth: float, width: float) -> Tuple[complex, complex]:
    """Closed form (j(0), j'(0)) for q = depth on [0, width)."""
    k = complex(k)
    kappa = cmath.sqrt(k * k - depth)
    e = cmath.exp(1j * k * width)
    if kappa == 0:
        return e * (1 - 1j * k * width), e * 1j * k
    c, s = cmath.cos(kappa * width), cmath.sin(kappa * width)
    return e * (c - 1j * k / kappa * s), e * (kappa * s + 1j * k * c)
