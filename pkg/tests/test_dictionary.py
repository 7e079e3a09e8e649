import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterdenoise.clustering import ClusterModel, cluster_spectrum, klines
from clusterdenoise.dictionary import (
    DC_CLUSTER,
    Dictionary,
    build_dictionary,
    dc_atom,
    select_rank,
)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_select_rank_examples():
    s2 = 4.0
    assert select_rank(np.zeros(16), s2) == 0
    assert select_rank([10 * s2, 3 * s2, 0.5 * s2, 0.0], s2) == 2
    # strictly greater
    assert select_rank([s2, s2], s2) == 0


def _rank_r_cluster(rng, r, n_members, sigma, dim=16, signal_var=30.0):
    basis = np.linalg.qr(rng.normal(size=(dim, r)))[0]
    coef = rng.normal(size=(n_members, r)) * np.sqrt(signal_var)
    return coef @ basis.T + rng.normal(0, sigma, (n_members, dim)), basis


@pytest.mark.parametrize("r", [1, 2, 3])
def test_select_rank_recovers_rank(r):
    rng = np.random.default_rng(r)
    sigma = 2.0
    data, _ = _rank_r_cluster(rng, r, 4000, sigma)
    model = ClusterModel("klines", np.eye(16)[:1], np.zeros(len(data), int))
    lam = cluster_spectrum(data, model, sigma).eigenvalues[0]
    assert select_rank(lam, sigma**2) == r


def test_single_repeated_block():
    b = np.arange(1.0, 17.0)
    data = np.tile(b, (10, 1))
    model = ClusterModel("klines", _unit(b)[None], np.zeros(10, int))
    d = build_dictionary(data, model, sigma=100.0, include_dc=False)
    assert d.n_atoms == 1
    np.testing.assert_allclose(d.atoms[:, 0], _unit(b), atol=1e-12)
    with_dc = build_dictionary(data, model, sigma=100.0)
    assert with_dc.n_atoms == 2
    assert with_dc.provenance[0] == (DC_CLUSTER, 0)
    np.testing.assert_allclose(with_dc.atoms[:, 0], dc_atom(4))


def test_atom_count_without_extra_components():
    rng = np.random.default_rng(0)
    k = 5
    dirs = np.array([_unit(rng.normal(size=9)) for _ in range(k)])
    data = np.vstack([rng.normal(size=(20, 1)) * d for d in dirs])
    model = ClusterModel("klines", dirs, np.repeat(np.arange(k), 20))
    # huge sigma: nothing clears the threshold, one component per cluster
    assert build_dictionary(data, model, 1e3, include_dc=False).n_atoms == k
    assert build_dictionary(data, model, 1e3, include_dc=True).n_atoms == k + 1


def test_three_lines_recovered():
    rng = np.random.default_rng(1)
    dirs = np.array([_unit(rng.normal(size=4)) for _ in range(3)])
    data = np.vstack([rng.normal(0, 5, (200, 1)) * d for d in dirs])
    data += rng.normal(0, 0.05, data.shape)
    model = klines(data, 3, n_init=5, seed=2)
    # sigma above the line energy: one atom per cluster
    d = build_dictionary(data, model, sigma=10.0, include_dc=False)
    assert d.n_atoms == 3
    for true in dirs:
        cos = np.max(np.abs(d.atoms.T @ true))
        assert np.degrees(np.arccos(min(cos, 1.0))) < 2.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 3.0), st.booleans())
def test_dictionary_invariants(seed, sigma, include_dc):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(80, 16)) * np.linspace(3, 0.1, 16)
    model = klines(data, 4, seed=seed)
    d = build_dictionary(data, model, sigma, include_dc=include_dc)
    np.testing.assert_allclose(np.linalg.norm(d.atoms, axis=0), 1.0, atol=1e-9)
    for k in range(model.n_clusters):
        atoms = d.cluster_atoms(k)
        gram = atoms.T @ atoms
        assert np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-8
    expected = int(include_dc)
    spectrum = cluster_spectrum(data, model, sigma)
    for k, lam in zip(spectrum.cluster_ids, spectrum.eigenvalues):
        # a cluster cannot hold more orthonormal atoms than its rank
        rank = min(np.count_nonzero(model.assignments == k), data.shape[1])
        expected += min(1 + select_rank(lam, sigma**2), rank)
    assert d.n_atoms == expected


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 2.0), st.floats(1.0, 4.0))
def test_rank_non_increasing_in_sigma(seed, sigma, factor):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(60, 9)) * np.linspace(4, 0.2, 9)
    model = klines(data, 3, seed=seed)
    low = build_dictionary(data, model, sigma, include_dc=False)
    high = build_dictionary(data, model, sigma * factor, include_dc=False)
    for k in range(3):
        assert high.cluster_atoms(k).shape[1] <= low.cluster_atoms(k).shape[1]


@pytest.mark.parametrize("r", [1, 2, 3])
def test_noiseless_atoms_span_cluster(r):
    rng = np.random.default_rng(10 + r)
    data, _ = _rank_r_cluster(rng, r, 300, sigma=0.0)
    model = ClusterModel("klines", np.eye(16)[:1], np.zeros(len(data), int))
    d = build_dictionary(data, model, sigma=1e-9, include_dc=False)
    atoms = d.cluster_atoms(0)
    assert atoms.shape[1] >= r
    resid = data - (data @ atoms) @ atoms.T
    assert np.abs(resid).max() <= 1e-6 * np.abs(data).max()


def test_json_round_trip():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(40, 16))
    d = build_dictionary(data, klines(data, 3), 0.5)
    back = Dictionary.from_json(d.to_json())
    np.testing.assert_array_equal(back.atoms, d.atoms)
    assert back.provenance == d.provenance
    assert back.includes_dc and back.block_size == 4


def test_validation():
    with pytest.raises(ValueError):
        Dictionary(np.ones((4, 1)))
    with pytest.raises(ValueError):
        Dictionary(np.eye(3))
    with pytest.raises(ValueError):
        Dictionary.from_dict({"atoms": [[1, 0, 0, 0]]})
    model = ClusterModel("klines", np.eye(4)[:1], np.zeros(3, int))
    with pytest.raises(ValueError):
        build_dictionary(np.zeros((3, 4)), model, 1.0, include_dc=False)
    with pytest.raises(ValueError):
        build_dictionary(np.ones((2, 4)), model, 1.0)
