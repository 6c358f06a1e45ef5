import math

import numpy as np
import pytest
from scipy import integrate, optimize

from src.errors import InvalidInputError
from src.potential import potential_from_kv
from src.spectral import (
    BlaschkeProduct,
    SampledFunction,
    am_factorization,
    bound_states,
    build_model,
    density_table,
    entropy_bound_check,
    generalized_transform,
    jm_ratio_convergence,
    m_function,
    point_mass_weight,
    regular_solution,
    spectral_density,
    trace_identity_check,
    uniform_bound_probe,
    weak_convergence_probe,
)


def _dirichlet_kappa(depth):
    """-κ² for -u'' - depth·u on [0, 1], u(0) = 0, decaying beyond 1."""
    def f(kappa):
        beta = math.sqrt(depth - kappa ** 2)
        return beta / math.tan(beta) + kappa
    return optimize.brentq(f, 0.05, math.sqrt(depth) - 1e-9)


def _glued_xi(depth):
    """Even bound state of the symmetric well of width 1 on the line."""
    def f(kappa):
        beta = math.sqrt(depth - kappa ** 2)
        return beta * math.tan(0.5 * beta) - kappa
    return optimize.brentq(f, 1e-6, math.sqrt(depth) - 1e-9)


@pytest.fixture(scope="module")
def free_model(free):
    return build_model(free, 1.0, kmax=40.0)


@pytest.fixture(scope="module")
def model4(well4):
    return build_model(well4, 1.0, kmax=10.0)


@pytest.fixture(scope="module")
def weak():
    return potential_from_kv("kind=square_well depth=-0.1 width=1")


def test_free_density_and_m(free_model):
    np.testing.assert_allclose(free_model.mu, free_model.kgrid / math.pi, rtol=1e-12)
    np.testing.assert_allclose(free_model.m_values, 1j * free_model.kgrid, rtol=1e-12)
    np.testing.assert_allclose(free_model.threshold_mu, free_model.threshold_k / math.pi, rtol=1e-12)
    assert free_model.bound_xis == ()
    assert free_model.dirichlet_eigs == ()


def test_free_regular_solution(free):
    sol = regular_solution(free, 2.0, 3.0)
    np.testing.assert_allclose(sol.u, np.sin(2.0 * sol.grid) / 2.0, atol=1e-12)
    np.testing.assert_allclose(sol.uprime, np.cos(2.0 * sol.grid), atol=1e-12)


def test_density_table_and_m(free, well3):
    rows = density_table(free, [0.5, 1.0, 2.0], 1.0)
    for row in rows:
        assert row["E"] == row["k"] ** 2
        assert row["mu"] == pytest.approx(row["k"] / math.pi)
        assert row["m"] == pytest.approx(1j * row["k"])
    assert m_function(free, 1.5, 1.0) == pytest.approx(1.5j)
    with pytest.raises(InvalidInputError):
        spectral_density(well3, 0.01, 1.0)


def test_density_from_modified_jost(well3):
    from src.jost import solve_psi

    k = 1.7
    expected = k / (math.pi * abs(solve_psi(well3, k, 1.0).jm) ** 2)
    assert spectral_density(well3, k, 1.0) == pytest.approx(expected, rel=1e-12)


def test_dirichlet_eigenvalue_and_weight(model4, well4):
    kappa = _dirichlet_kappa(4.0)
    assert len(model4.dirichlet_eigs) == 1
    assert abs(model4.dirichlet_kappas[0] - kappa) < 1e-8

    beta = math.sqrt(4.0 - kappa ** 2)
    inside = (0.5 - math.sin(2.0 * beta) / (4.0 * beta)) / beta ** 2
    edge = (math.sin(beta) / beta) ** 2 / (2.0 * kappa)
    assert model4.point_weights[0] == pytest.approx(1.0 / (inside + edge), rel=1e-6)
    assert point_mass_weight(well4, kappa) == pytest.approx(1.0 / (inside + edge), rel=1e-6)


def test_glued_bound_state(well4):
    scan = bound_states(well4, 1.0, "line_glued")
    assert len(scan) == 1
    assert abs(scan[0] - _glued_xi(4.0)) < 1e-8
    assert not scan.threshold_state


def test_shallow_well_state_below_cutoff(weak):
    flags = []
    scan = bound_states(weak, 1.0, "line_glued", flags=flags)
    xi = _glued_xi(0.1)
    assert xi < 0.05
    assert len(scan) == 1
    assert abs(scan[0] - xi) < 1e-8
    assert scan.threshold_state
    assert flags and flags[0].source == "bound_states"
    assert len(bound_states(weak, 1.0, "halfline_dirichlet")) == 0


def test_no_bound_states_for_barrier(barrier2, free):
    assert len(bound_states(barrier2, 1.0)) == 0
    assert len(bound_states(free, 1.0, "halfline_dirichlet")) == 0
    with pytest.raises(InvalidInputError):
        bound_states(barrier2, 1.0, "dirichlet")


def test_blaschke_factor():
    assert abs(BlaschkeProduct.factor(0.7, 0.7j)) < 1e-15
    assert abs(BlaschkeProduct((0.5, 1.2))(1e6) - 1.0) < 1e-9
    assert BlaschkeProduct()(3.0) == 1 + 0j


def test_free_uniform_bound(free_model):
    expected = (2.0 / math.pi) * integrate.quad(lambda k: k * k / (k ** 4 + 1.0), 0.0, 40.0)[0]
    values = uniform_bound_probe(free_model, [0.5, 2.0])
    np.testing.assert_allclose(values, expected, rtol=1e-7)


def test_free_entropy(free_model):
    rec = entropy_bound_check(free_model)
    assert rec.value == pytest.approx(rec.free_value, rel=1e-9)
    assert rec.ok
    with pytest.raises(InvalidInputError):
        entropy_bound_check(free_model, (50.0, 60.0))


def test_weak_probe_compact(well3):
    probe = weak_convergence_probe(well3, lambda E: np.exp(-(E - 2.0) ** 2), [2.0, 4.0], (1.0, 4.0))
    assert max(probe.gaps) < 1e-8 * max(1.0, probe.target)
    with pytest.raises(InvalidInputError):
        weak_convergence_probe(well3, np.ones_like, [2.0], (0.0, 1.0))


def test_jm_ratio_compact(well3, free):
    np.testing.assert_allclose(jm_ratio_convergence(well3, (0.5, 3.0), [2.0, 4.0]), 0.0, atol=1e-12)
    assert jm_ratio_convergence(free, (0.5, 3.0), [2.0]) == [0.0]


def test_free_plancherel(free, free_model):
    f = SampledFunction.from_callable(lambda x: np.exp(-0.5 * (x - 5.0) ** 2), 0.0, 12.0)
    tp = generalized_transform(free, f, free_model)
    assert tp.defect < 1e-6 * tp.norm2


def test_well_plancherel_with_point_mass(well4, model4):
    f = SampledFunction.from_callable(lambda x: np.exp(-2.0 * (x - 3.0) ** 2), 0.0, 8.0)
    tp = generalized_transform(well4, f, model4)
    assert len(tp.point_values) == 1
    assert tp.defect < 1e-3 * tp.norm2
    without = generalized_transform(well4, f, model4, include_points=False)
    assert without.plancherel_total < tp.plancherel_total


def test_trace_identity_shallow_well(weak):
    rec = trace_identity_check(weak, 1.0, build_model(weak, 1.0, kmax=10.0))
    assert rec.rhs == pytest.approx(1.25e-3, rel=1e-9)
    assert rec.lhs_points == pytest.approx((2.0 / 3.0) * _glued_xi(0.1) ** 3, rel=1e-6)
    assert rec.relative_gap < 0.05


def test_trace_identity_free(free):
    assert trace_identity_check(free, 1.0).lhs == 0.0


def test_am_factorization_shallow_well(weak):
    model = build_model(weak, 1.0, kmax=10.0)
    rec = am_factorization(weak, 1.0j, 1.0, model)
    assert abs(rec.am - rec.direct) < 1e-3 * abs(rec.direct)
    with pytest.raises(InvalidInputError):
        am_factorization(weak, 1.0, 1.0, model)


@pytest.mark.slow
def test_trace_identity_wells(well3, barrier2):
    for q in (well3, barrier2):
        rec = trace_identity_check(q, 1.0)
        assert rec.relative_gap < 0.05
