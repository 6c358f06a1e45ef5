import cmath

import numpy as np
import pytest

from src.errors import InvalidInputError
from src.jost import (
    WaveNumber,
    am_shooting,
    as_k,
    djost_dR,
    jost_shooting,
    jost_value,
    modified_jost,
    scattering_ab,
    solve_psi,
    square_well_jost,
    transmission_reflection,
    wronskian_check,
)
from src.potential import potential_from_kv

ORACLE_KS = [0.5, 1.0, 2.0, 1 + 0.5j, 2j]


def test_wavenumber_validation():
    assert WaveNumber(1 + 2j).energy == (1 + 2j) ** 2
    assert WaveNumber(2.0).is_real
    with pytest.raises(InvalidInputError):
        WaveNumber(0)
    with pytest.raises(InvalidInputError):
        as_k(1 - 0.1j)


def test_free_jost(free):
    data = solve_psi(free, 1.3, 5.0)
    assert data.jm == 1 + 0j
    assert data.j == 1 + 0j
    assert data.b == 0j
    np.testing.assert_allclose(data.jprime0, 1.3j)
    assert jost_shooting(free, 1.3, 5.0) == (1 + 0j, 1.3j)


@pytest.mark.parametrize("k", ORACLE_KS)
def test_square_well_closed_form(well3, k):
    kappa = cmath.sqrt(k * k + 3.0)
    oracle = cmath.exp(1j * k) * (cmath.cos(kappa) - 1j * (k / kappa) * cmath.sin(kappa))
    assert abs(jost_value(well3, k, 1.0) - oracle) < 1e-7
    j0, jp0 = square_well_jost(k, -3.0, 1.0)
    np.testing.assert_allclose(j0, oracle, rtol=1e-12)
    np.testing.assert_allclose(solve_psi(well3, k, 1.0).jprime0, jp0, rtol=1e-6)


@pytest.mark.parametrize("k", [0.7, 1.5 + 0.25j])
def test_shooting_matches_picard(well4, k):
    j0, jp0 = jost_shooting(well4, k, 1.0)
    data = solve_psi(well4, k, 1.0)
    np.testing.assert_allclose(data.j, j0, rtol=1e-7)
    np.testing.assert_allclose(data.jprime0, jp0, rtol=1e-6)


def test_radius_beyond_support_changes_nothing(well3):
    inner = solve_psi(well3, 1.5, 1.0)
    outer = solve_psi(well3, 1.5, 4.0)
    np.testing.assert_allclose(outer.jm, inner.jm, rtol=1e-13)
    np.testing.assert_allclose(outer.j, inner.j, rtol=1e-13)
    assert outer.grid[-1] == 4.0


def test_decomposition_and_unitarity(well4):
    for k in (0.3, 1.0, 4.0):
        data = solve_psi(well4, k, 1.0)
        assert abs(data.j - (data.a + data.b)) < 1e-8
        assert abs(abs(data.a) ** 2 - abs(data.b) ** 2 - 1.0) < 1e-8
        np.testing.assert_allclose(data.j, cmath.exp(1j * data.phi0) * data.jm, rtol=1e-14)


def _closed_form_am(k, depth, width):
    j0, jp0 = square_well_jost(k, depth, width)
    return (1j * k * j0 + jp0) / (2j * k) * cmath.exp(-0.5j * depth * width / k)


@pytest.mark.parametrize("depth, k", [(2.0, 2.0), (-3.0, 1.0), (-3.0, 1.0 + 0.5j)])
def test_am_against_closed_form(depth, k):
    q = potential_from_kv(f"kind=square_well depth={depth} width=1")
    expected = _closed_form_am(k, depth, 1.0)
    _, _, am = scattering_ab(q, k, 1.0)
    np.testing.assert_allclose(am, expected, rtol=1e-6)
    np.testing.assert_allclose(am_shooting(q, k, 1.0), expected, rtol=1e-9)


def test_am_routes_on_oscillatory_tail(osc):
    for k in (1.5, 2.0 + 0.5j):
        np.testing.assert_allclose(solve_psi(osc, k, 8.0).am, am_shooting(osc, k, 8.0), rtol=1e-6)


def test_transmission_plus_reflection(barrier2):
    for k in (0.5, 1.0, 3.0):
        T, r = transmission_reflection(barrier2, k, 1.0)
        assert 0 < T <= 1
        np.testing.assert_allclose(T + abs(r) ** 2, 1.0, atol=1e-8)
    with pytest.raises(InvalidInputError):
        transmission_reflection(barrier2, 1 + 1j, 1.0)


def test_wronskian(well3):
    assert wronskian_check(well3, 1.2, 1.0) < 1e-7


def test_radius_derivative_formula(well3):
    h = 1e-4
    for R, k in ((0.3, 1.0), (0.8, 2.5)):
        fd = (jost_value(well3, k, R + h) - jost_value(well3, k, R - h)) / (2 * h)
        exact = djost_dR(well3, k, R)
        assert abs(fd - exact) / abs(exact) < 1e-4
    assert djost_dR(well3, 1.0, 2.0) == 0j
    with pytest.raises(InvalidInputError):
        djost_dR(well3, 1 + 1j, 0.5)


def test_modified_jost_large_k_limit(well4):
    # j_m → 1 as |k| grows in the upper half-plane
    gaps = [abs(modified_jost(well4, k, 1.0) - 1.0) for k in (5.0, 10.0, 20.0)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[-1] < 0.05


def test_precondition_errors(well3):
    with pytest.raises(InvalidInputError):
        solve_psi(well3, 1.0, 0.0)
    with pytest.raises(InvalidInputError):
        solve_psi(well3, 1e-4, 1.0)
