import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterdenoise.bounds import cluster_mse_bound, clustering_cost
from clusterdenoise.clustering import ClusterModel, cluster_spectrum


def test_zero_eigenvalues():
    assert cluster_mse_bound(np.zeros(64), 10, 20.0, n=8) == 0.0


def test_infinite_eigenvalues():
    sigma, n_members, n = 20.0, 10, 8
    bound = cluster_mse_bound(np.full(n * n, np.inf), n_members, sigma, n=n)
    assert bound == pytest.approx(sigma**2 * n * n / n_members, rel=1e-12)


def test_large_eigenvalues_approach_limit():
    sigma, n_members = 5.0, 4
    bound = cluster_mse_bound(np.full(4, 1e12), n_members, sigma, n=2)
    assert bound == pytest.approx(sigma**2 * 4 / n_members, rel=1e-9)


def test_half_term():
    sigma, n_members = 3.0, 7
    lam = [sigma**2 / n_members]
    assert cluster_mse_bound(lam, n_members, sigma, n=1) == pytest.approx(
        sigma**2 / (2 * n_members), rel=1e-12
    )


def test_bound_validation():
    with pytest.raises(ValueError):
        cluster_mse_bound([1.0], 0, 1.0)
    with pytest.raises(ValueError):
        cluster_mse_bound([1.0], 1, 0.0)
    with pytest.raises(ValueError):
        cluster_mse_bound([-1.0], 1, 1.0)
    with pytest.raises(ValueError):
        cluster_mse_bound(np.ones(5), 1, 1.0, n=2)


lam_lists = st.lists(st.floats(0, 1e6), min_size=1, max_size=16)


@settings(max_examples=100, deadline=None)
@given(lam_lists, st.integers(0, 15), st.floats(0, 1e4), st.integers(1, 500), st.floats(0.1, 50))
def test_monotone_in_each_eigenvalue(lam, j, bump, n_members, sigma):
    lam = np.array(lam)
    j %= lam.size
    raised = lam.copy()
    raised[j] += bump
    assert cluster_mse_bound(raised, n_members, sigma) >= cluster_mse_bound(lam, n_members, sigma) - 1e-12


@settings(max_examples=100, deadline=None)
@given(lam_lists, st.integers(1, 500), st.integers(0, 500), st.floats(0.1, 50))
def test_non_increasing_in_members(lam, n_members, extra, sigma):
    assert cluster_mse_bound(lam, n_members + extra, sigma) <= cluster_mse_bound(lam, n_members, sigma) + 1e-12


def test_single_cluster_cost_equals_bound():
    lam = np.array([50.0, 3.0, 0.0])
    cost = clustering_cost([(lam, 12)], sigma=2.0)
    assert cost.total == pytest.approx(cluster_mse_bound(lam, 12, 2.0))


def test_splitting_zero_cluster_keeps_cost():
    sigma = 2.0
    busy = (np.array([80.0, 10.0]), 30)
    whole = clustering_cost([busy, (np.zeros(2), 40)], sigma)
    split = clustering_cost([busy, (np.zeros(2), 25), (np.zeros(2), 15)], sigma)
    assert whole.total == split.total


def test_non_smooth_variant_skips_smooth_clusters():
    sigma = 2.0
    busy = (np.array([80.0, 10.0]), 30)
    smooth = (np.array([1.0, 0.5]), 200)
    cost = clustering_cost([busy, smooth], sigma)
    assert cost.n_smooth_clusters == 1
    assert cost.non_smooth == pytest.approx(cluster_mse_bound(*busy, sigma))
    assert cost.total > cost.non_smooth
    assert clustering_cost([busy, smooth], sigma, smooth_cutoff=0.1).non_smooth == cost.total


def test_cost_from_spectrum():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(40, 4))
    model = ClusterModel("klines", np.eye(4)[:2], np.repeat([0, 1], 20))
    spectrum = cluster_spectrum(data, model, 0.5)
    cost = clustering_cost(spectrum, 0.5)
    manual = sum(cluster_mse_bound(l, n, 0.5) for l, n in spectrum.pairs())
    assert cost.total == pytest.approx(manual)


def test_cost_requires_clusters():
    with pytest.raises(ValueError):
        clustering_cost([], 1.0)
