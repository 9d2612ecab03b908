import numpy as np
import pytest

from conftest import grid_search_projection, random_qp_instance, store_from_rows
from mapshare.constraints import ConstraintStore
from mapshare.decoder import (
    PriorModel,
    estimate,
    kkt_certificate,
    saa_check,
)


def test_empty_store_returns_mean():
    store = ConstraintStore(8)
    est = estimate(store, PriorModel(mean=0.5))
    assert np.all(est.values == 0.5)
    assert est.objective == 0.0
    assert not est.known_mask.any()


def test_symmetric_average_splits_evenly():
    store = ConstraintStore(4)
    store.add_row({0: 0.5, 1: 0.5}, 0.6)
    store.reduce_independent()
    est = estimate(store)
    assert est.values[0] == pytest.approx(0.6, abs=1e-9)
    assert est.values[1] == pytest.approx(0.6, abs=1e-9)
    assert est.values[2] == 0.5 and est.values[3] == 0.5


def test_box_boundary_forces_both_coordinates():
    store = ConstraintStore(4)
    store.add_row({0: 0.5, 1: 0.5}, 1.0)
    store.reduce_independent()
    est = estimate(store)
    assert est.values[0] == pytest.approx(1.0, abs=1e-9)
    assert est.values[1] == pytest.approx(1.0, abs=1e-9)


def test_known_cells_pinned_exactly():
    store = ConstraintStore(6)
    store.add_exact([(2, 0.125), (4, 1.0)])
    est = estimate(store)
    assert est.values[2] == 0.125
    assert est.values[4] == 1.0
    assert est.known_mask[2] and est.known_mask[4]


def test_unreduced_store_rejected():
    store = ConstraintStore(4)
    store.add_row({0: 1.0}, 0.5)
    with pytest.raises(ValueError, match="reduce_independent"):
        estimate(store)


def test_matches_grid_search_oracle():
    rng = np.random.default_rng(2024)
    mu_half = 0.5
    for trial in range(60):
        n, rows, rhs = random_qp_instance(rng)
        store = store_from_rows(rows, rhs, n)
        est = estimate(store)
        mu = np.full(n, mu_half)
        x_grid, f_grid = grid_search_projection(rows, rhs, n, mu)
        # grid quantization shifts pivot coordinates by (entry ratio) per
        # free step, up to ~0.04 here; the objective gap scales as |dx|^2
        assert np.max(np.abs(est.values - x_grid)) <= 5e-2, f"trial {trial}"
        assert est.objective <= f_grid + 1e-12, f"trial {trial}"
        assert abs(est.objective - f_grid) <= 1e-3, f"trial {trial}"


def test_objective_counts_all_cells():
    store = ConstraintStore(3)
    store.add_exact([(0, 1.0)])
    est = estimate(store, PriorModel(mean=0.5))
    assert est.objective == pytest.approx(0.25)


def test_covariance_is_irrelevant():
    rng = np.random.default_rng(77)
    for _ in range(20):
        n, rows, rhs = random_qp_instance(rng)
        store = store_from_rows(rows, rhs, n)
        base = estimate(store, PriorModel(mean=0.5))
        sigma = rng.random((n, n))
        other = estimate(store, PriorModel(mean=0.5, covariance=sigma @ sigma.T))
        assert np.array_equal(base.values, other.values)


def test_projection_is_nonexpansive():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n, rows, rhs = random_qp_instance(rng)
        store = store_from_rows(rows, rhs, n)
        mu1 = rng.random(n)
        mu2 = rng.random(n)
        e1 = estimate(store, PriorModel(mean=mu1))
        e2 = estimate(store, PriorModel(mean=mu2))
        assert np.linalg.norm(e1.values - e2.values) <= np.linalg.norm(
            mu1 - mu2
        ) + 1e-9


def test_kkt_certificate_on_random_instances():
    rng = np.random.default_rng(31)
    for _ in range(50):
        n, rows, rhs = random_qp_instance(rng)
        store = store_from_rows(rows, rhs, n)
        est = estimate(store)
        report = kkt_certificate(store, None, est.values)
        assert report.stationarity_residual <= 1e-5
        assert report.min_bound_multiplier >= -1e-7
        assert report.equality_residual <= 1e-6
        assert report.box_violation <= 1e-8


def test_adding_constraints_pins_reestimates():
    store = ConstraintStore(5)
    store.add_row({0: 0.5, 1: 0.5}, 0.9)
    store.reduce_independent()
    first = estimate(store)
    store.add_exact([(0, 1.0)])
    second = estimate(store, warm_start=first.values)
    assert second.values[0] == pytest.approx(1.0)
    assert second.values[1] == pytest.approx(0.8, abs=1e-9)


def test_warm_start_does_not_change_answer():
    rng = np.random.default_rng(9)
    n, rows, rhs = random_qp_instance(rng)
    store = store_from_rows(rows, rhs, n)
    cold = estimate(store)
    warm = estimate(store, warm_start=rng.random(n))
    assert np.max(np.abs(cold.values - warm.values)) <= 1e-8


def test_saa_matches_projection_of_sample_mean():
    store = ConstraintStore(4)
    store.add_row({0: 0.5, 1: 0.5}, 0.7)
    store.reduce_independent()
    rng = np.random.default_rng(12)
    samples = rng.random((500, 4))
    xbar = samples.mean(axis=0)
    manual = estimate(store, PriorModel(mean=xbar))
    base = estimate(store)
    gap = float(np.max(np.abs(manual.values - base.values)))
    reported = saa_check(store, None, 500, rng=np.random.default_rng(12))
    assert reported == pytest.approx(gap, abs=1e-12)


def test_saa_discrepancy_shrinks_with_samples():
    store = ConstraintStore(4)
    store.add_row({0: 0.5, 1: 0.5}, 0.7)
    store.add_row({2: 0.5, 3: 0.5}, 0.2)
    store.reduce_independent()
    small = saa_check(store, None, 16, rng=1)
    large = saa_check(store, None, 10_000, rng=1)
    assert large <= 0.05
    assert large <= small + 1e-9
