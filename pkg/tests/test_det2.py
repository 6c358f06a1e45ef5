import cmath

import numpy as np
import pytest

from src.det2 import (
    det2_lu,
    det2_modified_jost,
    det2_split_check,
    fourier_hat,
    fourier_hat_truncated,
    kernel_matrix,
    resolvent_kernel,
)
from src.errors import InvalidInputError
from src.jost import solve_psi


def test_zero_potential_gives_one(free):
    res = det2_modified_jost(free, 1 + 1j, 5.0)
    assert res.jm == 1 + 0j
    assert res.converged


def test_resolvent_kernel_dirichlet_and_symmetric():
    k = 1.5 + 0.3j
    ys = np.linspace(0.0, 2.0, 7)
    np.testing.assert_allclose(resolvent_kernel(k, 0.0, ys), 0.0, atol=1e-15)
    assert resolvent_kernel(k, 0.3, 1.1) == pytest.approx(resolvent_kernel(k, 1.1, 0.3))
    with pytest.raises(InvalidInputError):
        resolvent_kernel(1.0, 0.1, 0.2)


def test_fourier_hat_of_well(well3):
    k = 2.0
    expected = -3.0 * (cmath.exp(1j * k) - 1.0) / (1j * k)
    assert abs(fourier_hat(well3, k) - expected) < 1e-10
    assert abs(fourier_hat_truncated(well3, k, 5.0) - expected) < 1e-10
    with pytest.raises(InvalidInputError):
        fourier_hat(well3, 1 - 1j)


@pytest.mark.parametrize("k", [1 + 0.5j, 2 + 1j, 0.5j])
@pytest.mark.parametrize("R", [1.0, 2.0])
def test_routes_agree(well3, k, R):
    res = det2_modified_jost(well3, k, R)
    direct = solve_psi(well3, k, R).jm
    assert res.converged
    assert abs(res.jm - direct) < 1e-6


def test_barrier_routes_agree(barrier2):
    k = 1 + 0.5j
    assert abs(det2_modified_jost(barrier2, k, 1.0).jm - solve_psi(barrier2, k, 1.0).jm) < 1e-6


def test_preconditions(well3):
    with pytest.raises(InvalidInputError):
        det2_modified_jost(well3, 1 + 1j, 1.0, n=32)
    with pytest.raises(InvalidInputError):
        det2_modified_jost(well3, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        det2_modified_jost(well3, 1 + 1j, 1.0, rule="simpson")


def test_lu_matches_eigenvalue_forms(well3):
    K = kernel_matrix(well3, 1 + 0.5j, 1.0, 64).entries
    check = det2_split_check(K)
    value = det2_lu(K)
    assert check["product_gap"] < 1e-9 * max(1.0, abs(value))
    if "log_gap" in check:
        assert check["log_gap"] < 1e-9 * max(1.0, abs(value))


def test_gauss_rule(well3):
    cfg = {"numerics": {"det2": {"max_nodes": 512}}}
    res = det2_modified_jost(well3, 1 + 0.5j, 1.0, cfg=cfg, rule="gauss")
    assert abs(res.jm - solve_psi(well3, 1 + 0.5j, 1.0).jm) < 1e-3


def test_record_fields(well3):
    rec = det2_modified_jost(well3, 1 + 0.5j, 1.0).as_record()
    assert set(rec) == {"jm", "nodes_used", "doubling_gap", "converged"}
    assert rec["nodes_used"] >= 64
