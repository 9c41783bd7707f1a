import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from benign_gcn.errors import ConfigError
from benign_gcn.snm_sbm import (DataConfig, aggregate, attach_test_node, build_dataset, dump_dataset,
                                load_dataset, make_signal, sample_adjacency, sample_noise)


def small(**kw):
    base = dict(n=20, d=30, snr=0.5, sigma_p=1.0, p=0.5, s=0.1, seed=3)
    base.update(kw)
    return build_dataset(DataConfig(**base))


def test_signal_norm_default_setting():
    mu = make_signal(500, 0.05, 20.0, np.random.default_rng(0))
    assert np.linalg.norm(mu) == pytest.approx(0.05 * 20 * math.sqrt(500), rel=1e-12)
    assert np.linalg.norm(mu) == pytest.approx(22.360679, rel=1e-7)


def test_signal_one_dimensional():
    for seed in range(5):
        mu = make_signal(1, 1.0, 1.0, np.random.default_rng(seed))
        assert abs(mu[0]) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 200), snr=st.floats(1e-3, 10), sigma_p=st.floats(1e-2, 50), seed=st.integers(0, 2**31))
def test_signal_rescaling_exact(d, snr, sigma_p, seed):
    mu = make_signal(d, snr, sigma_p, np.random.default_rng(seed))
    assert mu @ mu / (snr ** 2 * sigma_p ** 2 * d) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 300), seed=st.integers(0, 2**31))
def test_noise_orthogonal_to_signal(d, seed):
    rng = np.random.default_rng(seed)
    mu = make_signal(d, 0.3, 2.0, rng)
    xi = sample_noise(mu, 2.0, rng, size=5)
    assert np.all(np.abs(xi @ mu) <= 1e-10 * np.linalg.norm(mu) * np.linalg.norm(xi, axis=1))


def test_noise_norm_bracket_and_mean():
    rng = np.random.default_rng(11)
    mu = make_signal(500, 0.05, 20.0, rng)
    xi = sample_noise(mu, 20.0, rng, size=1000)
    norms = np.einsum("ij,ij->i", xi, xi)
    assert norms.min() >= 1e5 and norms.max() <= 3e5
    # one degree of freedom is projected out
    assert norms.mean() == pytest.approx(400 * 499, rel=0.03)


def test_empty_and_complete_graphs():
    ds = small(p=0.0, s=0.0)
    assert not ds.A.any()
    assert np.array_equal(ds.A_tilde, np.eye(ds.n))
    assert np.all(ds.D == 1)
    assert np.array_equal(ds.y_agg, ds.y) and np.array_equal(ds.Xi_agg, ds.Xi)

    full = small(p=1.0, s=1.0)
    assert np.array_equal(full.A, np.ones((20, 20)) - np.eye(20))
    assert np.all(full.D == 20)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), p=st.floats(0, 1), frac=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_adjacency_symmetric_binary_no_loops(n, p, frac, seed):
    rng = np.random.default_rng(seed)
    y = rng.choice([-1.0, 1.0], size=n)
    A = sample_adjacency(y, p, p * frac, rng)
    assert np.array_equal(A, A.T)
    assert set(np.unique(A)) <= {0.0, 1.0}
    assert not np.diag(A).any()


def test_aggregation_matches_dense_oracle():
    ds = small()
    At = ds.A + np.eye(ds.n)
    P = np.diag(1 / At.sum(1)) @ At
    np.testing.assert_allclose(ds.y_agg, P @ ds.y, rtol=0, atol=1e-13)
    np.testing.assert_allclose(ds.Xi_agg, P @ ds.Xi, rtol=0, atol=1e-12)
    D, ya, Xa = aggregate(ds.A, ds.y, ds.Xi)
    assert np.array_equal(D, ds.D)


def test_degree_bracket_at_scale():
    ds = build_dataset(DataConfig(n=1000, d=2, sigma_p=1.0, snr=1.0, p=0.5, s=0.08, seed=0))
    assert ds.D.min() >= 145 and ds.D.max() <= 435


def test_label_homophily_at_scale():
    ds = build_dataset(DataConfig(n=1000, d=2, sigma_p=1.0, snr=1.0, p=0.5, s=0.08, seed=0))
    H = ds.homophily
    assert H == pytest.approx(0.42 / 0.58)
    assert np.all(np.abs(ds.y_agg) >= H / 2) and np.all(np.abs(ds.y_agg) <= 1.5 * H)
    assert np.array_equal(np.sign(ds.y_agg), ds.y)


def test_deterministic_given_seed():
    a, b = small(), small()
    for name in ("mu", "y", "Xi", "A"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(small(seed=4).Xi, a.Xi)


def test_arrays_read_only():
    ds = small()
    with pytest.raises(ValueError):
        ds.Xi[0, 0] = 1.0


def test_config_validation():
    with pytest.raises(ConfigError):
        DataConfig(n=5)
    with pytest.raises(ConfigError):
        DataConfig(p=0.1, s=0.2)
    DataConfig(p=0.1, s=0.2, allow_heterophily=True)


def test_dump_round_trip():
    ds = small()
    back = load_dataset(dump_dataset(ds))
    for name in ("mu", "y", "Xi", "A", "D", "y_agg", "Xi_agg"):
        assert np.array_equal(getattr(back, name), getattr(ds, name))
    assert dump_dataset(back) == dump_dataset(ds)


def test_attach_test_node_isolated_graph():
    ds = small(p=0.0, s=0.0)
    sig, noise, deg = attach_test_node(ds, -1.0, np.random.default_rng(0))
    np.testing.assert_array_equal(sig, -ds.mu)
    assert deg == 1
    assert abs(noise @ ds.mu) < 1e-9


def test_attach_test_node_complete_graph():
    ds = small(p=1.0, s=1.0)
    for y_test in (1.0, -1.0):
        sig, noise, deg = attach_test_node(ds, y_test, np.random.default_rng(1))
        assert deg == ds.n + 1
        # balanced labels: neighbours cancel
        np.testing.assert_allclose(sig, y_test / (ds.n + 1) * ds.mu, atol=1e-14)


def test_attach_test_node_label_concentration():
    ds = build_dataset(DataConfig(n=1000, d=2, sigma_p=1.0, snr=1.0, p=0.5, s=0.08, seed=2))
    rng = np.random.default_rng(5)
    H = ds.homophily
    hits = 0
    for _ in range(1000):
        y_test = rng.choice([-1.0, 1.0])
        sig, _, _ = attach_test_node(ds, y_test, rng)
        ya = sig[0] / ds.mu[0]
        hits += H / 2 <= abs(ya) <= 1.5 * H
    assert hits / 1000 >= 0.99
