import numpy as np
import pytest

from src.errors import ConfigError, InvalidInputError
from src.evolution import (
    CauchyData,
    FieldState,
    PsiMode,
    asymptotic_profile,
    ballistic_mass,
    convergence_test_ch1,
    energy,
    energy_drift,
    evolution_model,
    evolve_fdtd,
    evolve_spectral,
    light_cone_leakage,
    linearity_check,
    make_data,
    parse_data_spec,
    project_continuous,
    pure_point_localization,
    time_reversal_check,
)
from src.spectral import build_model

DX = 0.005
DT = 0.9 * DX


def _odd(phi):
    return lambda s: np.sign(s) * phi(np.abs(s))


def dalembert(data, x, t):
    """Free half-line solution for (φ, 0) with a Dirichlet wall at 0."""
    phi = _odd(data.phi)
    return 0.5 * (phi(x - t) + phi(x + t))


@pytest.fixture(scope="module")
def gauss():
    return make_data("gaussian", {"center": 5.0, "sigma": 0.5})


@pytest.fixture(scope="module")
def ricker():
    return parse_data_spec("kind=ricker center=3 sigma=0.5")


@pytest.fixture(scope="module")
def free_model5(free):
    return evolution_model(free, 5.0, 7.0)


def test_ricker_unit_norm(ricker):
    assert ricker.sampled(0.001).norm2 == pytest.approx(1.0, rel=1e-6)
    assert ricker.psi_mode == PsiMode.ZERO


def test_data_parsing_errors():
    with pytest.raises(ConfigError):
        parse_data_spec("kind=sawtooth lo=1 hi=2")
    with pytest.raises(ConfigError):
        parse_data_spec("kind=ricker center=3 sigma=0.5 psi=sideways")
    with pytest.raises(ConfigError):
        parse_data_spec("kind=ricker center=3 sigma=0.5 width=1")
    with pytest.raises(InvalidInputError):
        parse_data_spec("kind=bump lo=2 hi=1")
    with pytest.raises(InvalidInputError):
        parse_data_spec("kind=bound_state index=0")


def test_given_psi_and_amp():
    data = parse_data_spec("kind=sine_lobe lo=1 hi=3 amp=2 psi=given")
    x = np.array([0.5, 2.0, 3.5])
    np.testing.assert_allclose(data.phi(x), [0.0, 2.0, 0.0], atol=1e-12)
    assert data.psi_sampled(0.01) is not None
    assert data.kinks == (1.0, 3.0)


def test_fdtd_matches_dalembert(free, gauss):
    t = 6.0
    state = evolve_fdtd(free, gauss, t, DX, DT)
    expected = dalembert(gauss, state.xgrid, t)
    assert np.max(np.abs(state.y - expected)) < 1e-3


def test_fdtd_preconditions(free, gauss):
    with pytest.raises(InvalidInputError):
        evolve_fdtd(free, gauss, 1.0, DX, DX)
    outgoing = make_data("ricker", {"center": 3.0, "sigma": 0.5}, PsiMode.MINUS_I_SQRT_H)
    with pytest.raises(InvalidInputError):
        evolve_fdtd(free, outgoing, 1.0, DX, DT)


def test_fdtd_discrete_energy(well3, gauss):
    state = evolve_fdtd(well3, gauss, 5.0, DX, DT)
    assert len(state.meta["energy_trace"]) > 10
    assert energy_drift(state) < 1e-9


def test_fdtd_light_cone(free, gauss):
    t = 3.0
    state = evolve_fdtd(free, gauss, t, DX, DT)
    hi = gauss.support[1]
    numerical = state.meta["steps"] * DX + 3 * DX - t
    assert light_cone_leakage(state, hi, numerical) == 0.0
    assert light_cone_leakage(state, hi, 0.25) < 1e-6


def test_spectral_matches_dalembert(free, ricker, free_model5):
    t = 5.0
    state = evolve_spectral(free, ricker, t, free_model5)
    sel = state.xgrid <= 15.0
    expected = dalembert(ricker, state.xgrid[sel], t)
    assert np.max(np.abs(state.y[sel] - expected)) < 1e-4


def test_spectral_and_fdtd_agree(free, ricker, free_model5):
    t = 4.0
    spec = evolve_spectral(free, ricker, t, free_model5)
    fd = evolve_fdtd(free, ricker, t, DX, DT)
    n = min(len(spec.xgrid), len(fd.xgrid))
    assert np.max(np.abs(spec.y[:n] - fd.y[:n])) < 1e-3


def test_spectral_energy_free(free, ricker, free_model5):
    e0 = energy(free, evolve_spectral(free, ricker, 0.5, free_model5))
    e1 = energy(free, evolve_spectral(free, ricker, 5.0, free_model5))
    assert abs(e1 - e0) < 1e-4 * e0


def test_time_reversal(free, ricker, free_model5):
    rec = time_reversal_check(free, ricker, 3.0, free_model5)
    assert rec["one_way_error"] < 1e-4
    assert rec["reversal_error"] < 1e-4
    outgoing = make_data("ricker", {"center": 3.0, "sigma": 0.5}, PsiMode.MINUS_I_SQRT_H)
    with pytest.raises(InvalidInputError):
        time_reversal_check(free, outgoing, 3.0, free_model5)


def test_linearity(free, gauss, free_model5):
    bump = make_data("bump", {"lo": 2.0, "hi": 4.0})
    gap = linearity_check(free, gauss, bump, 2.0, -1j, 2.0, free_model5)
    assert gap < 1e-9


def test_projection_of_zero_mean_data(free, ricker, free_model5):
    projected = project_continuous(free, ricker, free_model5)
    x = np.linspace(0.0, 7.0, 141)
    assert np.max(np.abs(projected.phi(x) - ricker.phi(x))) < 1e-4


def test_asymptotic_profile_free(free, ricker):
    model = evolution_model(free, 40.0, 12.0)
    window = np.linspace(-3.0, 3.0, 61)
    errors = convergence_test_ch1(free, ricker, [10.0, 20.0, 40.0], window, model)
    assert max(errors) < 1e-4
    with pytest.raises(InvalidInputError):
        convergence_test_ch1(free, ricker, [2.0], window, model)


def test_asymptotic_profile_well(well3):
    lobe = make_data("sine_lobe", {"lo": 1.0, "hi": 3.0})
    model = evolution_model(well3, 40.0, lobe.support[1] + 5.0)
    window = np.linspace(-3.0, 3.0, 61)
    profile = asymptotic_profile(well3, lobe, model, window)
    errors = convergence_test_ch1(well3, lobe, [10.0, 20.0, 40.0], window, model)
    assert errors[-1] < errors[0]
    assert errors[-1] < 0.05 * np.max(np.abs(profile))
    outgoing = make_data("sine_lobe", {"lo": 1.0, "hi": 3.0}, PsiMode.MINUS_I_SQRT_H)
    state = evolve_spectral(well3, outgoing, 40.0, model, 40.0 + window)
    assert np.max(np.abs(state.y - profile)) == pytest.approx(errors[-1], rel=1e-6, abs=1e-12)


def test_evolution_model_needs_radius(osc):
    with pytest.raises(InvalidInputError):
        evolution_model(osc, 5.0, 7.0)


def test_ballistic_window_errors():
    x = np.linspace(0.0, 10.0, 21)
    early = FieldState(xgrid=x, y=np.zeros_like(x), yt=np.zeros_like(x), t=0.5)
    with pytest.raises(InvalidInputError):
        ballistic_mass(early)
    late = FieldState(xgrid=x, y=np.zeros_like(x), yt=np.zeros_like(x), t=9.0)
    with pytest.raises(InvalidInputError):
        ballistic_mass(late)
    mid = FieldState(xgrid=x, y=np.ones_like(x), yt=np.zeros_like(x), t=4.0)
    assert ballistic_mass(mid) == pytest.approx(4.0)


def test_bound_state_stays_put(well4):
    model = build_model(well4, 1.0, kmax=10.0)
    assert pure_point_localization(model, 100.0) < 1e-10
    data = parse_data_spec("kind=bound_state index=0", model)
    assert data.sampled(0.005).norm2 == pytest.approx(1.0, rel=1e-3)


def test_from_samples_interpolates():
    x = np.linspace(0.0, 1.0, 11)
    data = CauchyData.from_samples(x, x ** 2)
    assert data.phi(np.array([0.5, 2.0])).tolist() == pytest.approx([0.25, 0.0])


@pytest.mark.slow
def test_spectral_energy_well(well3, gauss):
    model = evolution_model(well3, 5.0, gauss.support[1])
    e0 = energy(well3, evolve_spectral(well3, gauss, 0.5, model))
    e1 = energy(well3, evolve_spectral(well3, gauss, 5.0, model))
    assert abs(e1 - e0) < 1e-4 * abs(e0)


def test_spectral_start_is_continuous(barrier2, gauss):
    model = evolution_model(barrier2, 1.0, gauss.support[1])
    start = evolve_spectral(barrier2, gauss, 0.0, model)
    after = evolve_spectral(barrier2, gauss, 1e-9, model, start.xgrid)
    assert np.max(np.abs(start.y - after.y)) < 1e-6
    assert 0.0 < start.meta["data_gap"] < 0.05
    assert "data_gap" not in after.meta
