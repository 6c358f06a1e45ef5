import math

import numpy as np
import pytest
from scipy.special import sici

from src.errors import ConfigError, InvalidInputError
from src.pipeline import waveop_model
from src.spectral import build_model
from src.waveop import (
    FhatProfile,
    apply_W,
    band_limited_f,
    cesaro_gap,
    evolved_transform,
    limit_transform,
    localization_second_moment,
    multiplier,
    omega,
    oscillatory_bound_probe,
    oscillatory_pv,
    partial_integral_probe,
    probe_grids,
    waveop_convergence,
)


@pytest.fixture(scope="module")
def fhat():
    return FhatProfile(k0=3.0, width=2.0, center=10.0)


@pytest.fixture(scope="module")
def free_wave_model(free):
    return build_model(free, 1e-6, kmax=10.0, panel_width=0.5)


def test_profile_validation():
    with pytest.raises(InvalidInputError):
        FhatProfile(k0=3.0, width=0.0)
    with pytest.raises(InvalidInputError):
        FhatProfile(k0=2.0, width=2.0)
    prof = FhatProfile.from_kv("k0=4 width=1 center=5")
    assert (prof.k0, prof.width, prof.center) == (4.0, 1.0, 5.0)
    assert prof.support == (3.0, 5.0)
    with pytest.raises(ConfigError):
        FhatProfile.from_kv("k0=4 spread=1")


def test_envelope_vanishes_off_support(fhat):
    k = np.array([0.5, 1.0, 3.0, 5.0, 6.0])
    env = fhat.envelope(k)
    assert env[2] == 1.0
    assert env[0] == env[1] == env[3] == env[4] == 0.0


def test_free_multiplier_and_omega(free, well3):
    assert multiplier(free, 2.0, 1.5) == pytest.approx(np.exp(3j))
    assert omega(free, 10.0) == 0.0
    assert omega(well3, 4.0) == pytest.approx(1.5)
    M = multiplier(well3, 4.0, 2.0)
    assert M == pytest.approx(np.exp(1j * (8.0 - 3.0 / 4.0)))
    with pytest.raises(InvalidInputError):
        multiplier(free, 1.0, 0.0)
    with pytest.raises(InvalidInputError):
        omega(free, 0.0)


def test_free_W_is_isometric(free, fhat):
    state = apply_W(free, fhat, 20.0)
    assert state.norm ** 2 == pytest.approx(fhat.norm2(), rel=1e-5)
    assert state.center == 30.0
    with pytest.raises(InvalidInputError):
        apply_W(free, fhat, -1.0)


def test_band_limited_f_is_odd(fhat):
    assert abs(band_limited_f(fhat, np.array([0.0]))[0]) < 1e-14


def test_free_packet_translates(free, fhat):
    m20 = localization_second_moment(apply_W(free, fhat, 20.0))
    m40 = localization_second_moment(apply_W(free, fhat, 40.0))
    assert m40 == pytest.approx(m20, rel=1e-6)


def test_partial_integrals_bounded(free, fhat):
    state = apply_W(free, fhat, 20.0)
    value = partial_integral_probe(state, [10.0, 20.0], [40.0, 50.0], [0.0, 3.0])
    assert 0.0 < value < 10.0


def test_pv_without_oscillation():
    assert oscillatory_pv(0.0, 0.0) == pytest.approx(math.log(2.0))


def test_pv_against_sine_cosine_integrals():
    si10, ci10 = sici(10.0)
    si5, ci5 = sici(5.0)
    expected = (ci10 - ci5) + 1j * (si10 + si5)
    assert abs(oscillatory_pv(10.0, 0.0) - expected) < 1e-7


def test_probe_grids():
    gammas, Ts = probe_grids(1e3, 1e4, 1)
    assert gammas == [-1000.0, -100.0, -10.0, 0.0, 10.0, 100.0, 1000.0]
    assert Ts == pytest.approx([0.0, 10.0, 100.0, 1000.0, 10000.0])
    finer, _ = probe_grids(1e3, 1e4, 2)
    assert len(finer) > len(gammas)


def test_bound_probe_small_grid():
    rec = oscillatory_bound_probe([-10.0, 0.0, 10.0], [0.0, 10.0])
    assert len(rec.values) == 6
    assert rec.max_abs == max(abs(v) for v in rec.values.values())
    assert set(rec.as_record()) == {"max_abs", "argmax"}


def test_free_waveop_convergence(free, fhat, free_wave_model):
    records = waveop_convergence(free, fhat, [40.0, 80.0], free_wave_model)
    assert records[0]["cauchy_gap"] is None
    assert records[1]["cauchy_gap"] < 1e-3
    assert all(r["zero_energy_mass"] < 1e-6 for r in records)
    assert records[1]["localization_tail"] is None
    with pytest.raises(InvalidInputError):
        waveop_convergence(free, fhat, [80.0, 40.0], free_wave_model)


def test_free_transform_keeps_norm(free, fhat, free_wave_model):
    main, thr = evolved_transform(free_wave_model, apply_W(free, fhat, 40.0))
    mass = float(np.sum(np.abs(main) ** 2 * free_wave_model.rho_weights())
                 + np.sum(np.abs(thr) ** 2 * free_wave_model.threshold_rho_weights()))
    assert mass == pytest.approx(fhat.norm2(), rel=1e-4)


def test_cesaro_gap_rejects_bad_T(free, fhat, free_wave_model):
    with pytest.raises(InvalidInputError):
        cesaro_gap(free, fhat, 0.0, free_wave_model)


def _distance(model, G, target):
    return math.sqrt(float(np.sum(np.abs(G[0] - target[0]) ** 2 * model.rho_weights())
                           + np.sum(np.abs(G[1] - target[1]) ** 2 * model.threshold_rho_weights())))


@pytest.fixture(scope="module")
def well_wave_model(well3, fhat):
    return waveop_model(well3, 80.0, fhat)


def test_well_limit_transform_is_nontrivial(well_wave_model, fhat):
    main, thr = limit_transform(well_wave_model, fhat)
    free_limit = fhat(well_wave_model.kgrid) / (2j * well_wave_model.kgrid)
    assert np.max(np.abs(main - free_limit)) > 1e-2
    assert not thr.any()


def test_well_transform_reaches_limit(well3, fhat, well_wave_model):
    target = limit_transform(well_wave_model, fhat)
    scale = math.sqrt(fhat.norm2())
    for t in (20.0, 40.0):
        G = evolved_transform(well_wave_model, apply_W(well3, fhat, t))
        assert _distance(well_wave_model, G, target) < 1e-3 * scale


def test_well_waveop_convergence(well3, fhat, well_wave_model):
    records = waveop_convergence(well3, fhat, [20.0, 40.0, 80.0], well_wave_model)
    gaps = [r["cauchy_gap"] for r in records[1:]]
    assert max(gaps) < 1e-3
    assert all(r["localization_tail"] is not None for r in records)
    np.testing.assert_allclose([r["norm"] ** 2 for r in records], fhat.norm2(), rtol=1e-5)


def test_well_cesaro_gap_shrinks(well3, well_wave_model):
    near_wall = FhatProfile(k0=3.0, width=2.0, center=0.0)
    short = cesaro_gap(well3, near_wall, 5.0, well_wave_model)
    long = cesaro_gap(well3, near_wall, 20.0, well_wave_model)
    assert short > 0.0
    assert long < 0.5 * short


@pytest.mark.slow
def test_oscillatory_waveop_gaps_shrink(osc, fhat):
    tlist = [10.0, 20.0, 40.0, 80.0]
    model = waveop_model(osc, 80.0, fhat)
    records = waveop_convergence(osc, fhat, tlist, model)
    gaps = [r["cauchy_gap"] for r in records[1:]]
    assert gaps[-1] < gaps[0]
    target = limit_transform(model, fhat)
    early = _distance(model, evolved_transform(model, apply_W(osc, fhat, 10.0)), target)
    late = _distance(model, evolved_transform(model, apply_W(osc, fhat, 80.0)), target)
    assert late < early
