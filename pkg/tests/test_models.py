import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from benign_gcn.errors import ConfigError
from benign_gcn.models import (ModelConfig, ModelParams, act, act_prime, forward_all, forward_cnn,
                               forward_gcn, forward_pair, init_weights)
from benign_gcn.snm_sbm import DataConfig, build_dataset

finite = st.floats(-3, 3, allow_nan=False)


def test_activation_values():
    assert act(-1.5, 3) == 0 and act_prime(-1.5, 3) == 0
    assert act(2.0, 3) == 8 and act_prime(2.0, 3) == 12


def test_activation_derivative_by_differences():
    h = 1e-6
    fd = (act(0.7 + h, 3) - act(0.7 - h, 3)) / (2 * h)
    assert fd == pytest.approx(1.47, rel=1e-6)
    assert act_prime(0.7, 3) == pytest.approx(1.47, rel=1e-14)


def test_forward_pair_hand_example():
    f = forward_pair(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]]),
                     np.array([2.0, 0.0]), np.array([-1.0, 5.0]), 3)
    assert f == 8.0


@settings(max_examples=50, deadline=None)
@given(W=arrays(np.float64, (2, 3, 4), elements=finite), p1=arrays(np.float64, 4, elements=finite),
       p2=arrays(np.float64, 4, elements=finite), q=st.integers(2, 5))
def test_bank_swap_negates(W, p1, p2, q):
    f = forward_pair(W[0], W[1], p1, p2, q)
    assert forward_pair(W[1], W[0], p1, p2, q) == -f


@settings(max_examples=50, deadline=None)
@given(W=arrays(np.float64, (2, 3, 4), elements=finite), p1=arrays(np.float64, 4, elements=finite),
       p2=arrays(np.float64, 4, elements=finite), c=st.floats(0.1, 4), q=st.integers(2, 5))
def test_positive_homogeneity(W, p1, p2, c, q):
    f = forward_pair(W[0], W[1], p1, p2, q)
    g = forward_pair(c * W[0], c * W[1], p1, p2, q)
    assert g == pytest.approx(c ** q * f, rel=1e-9, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(W=arrays(np.float64, (2, 5, 4), elements=finite), p1=arrays(np.float64, 4, elements=finite),
       p2=arrays(np.float64, 4, elements=finite), seed=st.integers(0, 1000))
def test_neuron_permutation_invariance(W, p1, p2, seed):
    perm = np.random.default_rng(seed).permutation(5)
    f = forward_pair(W[0], W[1], p1, p2, 3)
    assert forward_pair(W[0][perm], W[1][perm], p1, p2, 3) == pytest.approx(f, rel=1e-12, abs=1e-12)


def test_zero_weights_give_zero_output():
    ds = build_dataset(DataConfig(n=10, d=12, sigma_p=1.0, snr=1.0, seed=1))
    params = ModelParams(np.zeros((2, 4, 12)), q=3)
    assert not forward_all(params, ds, "cnn").any()
    assert not forward_all(params, ds, "gcn").any()


def test_gcn_equals_cnn_without_edges():
    ds = build_dataset(DataConfig(n=12, d=10, sigma_p=1.0, snr=1.0, p=0.0, s=0.0, seed=2))
    params = init_weights(4, 10, 0.5, np.random.default_rng(0))
    for i in range(ds.n):
        assert forward_gcn(params, ds, i) == forward_cnn(params, ds, i)


def test_gcn_matches_dense_reference():
    ds = build_dataset(DataConfig(n=8, d=16, sigma_p=1.0, snr=1.0, p=0.6, s=0.2, seed=7))
    params = init_weights(4, 16, 0.5, np.random.default_rng(3))
    At = ds.A + np.eye(8)
    P = At / At.sum(1, keepdims=True)
    X1 = P @ (ds.y[:, None] * ds.mu[None, :])
    X2 = P @ ds.Xi
    for i in range(8):
        ref = 0.0
        for jb, sign in enumerate((1.0, -1.0)):
            for w in params.W[jb]:
                ref += sign * (max(w @ X1[i], 0.0) ** 3 + max(w @ X2[i], 0.0) ** 3) / 4
        assert forward_gcn(params, ds, i) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_index_out_of_range():
    ds = build_dataset(DataConfig(n=4, d=5, sigma_p=1.0, snr=1.0, seed=0))
    params = init_weights(2, 5, 0.1, np.random.default_rng(0))
    with pytest.raises(IndexError):
        forward_gcn(params, ds, 4)


def test_init_variance():
    params = init_weights(1000, 500, 1e-3, np.random.default_rng(0))
    assert params.W.shape == (2, 1000, 500)
    assert params.W[0].var() == pytest.approx(1e-6, rel=0.01)


def test_model_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(q=1)
    with pytest.raises(ConfigError):
        ModelConfig(q=2)
    assert ModelConfig(q=2, allow_q2=True).q == 2
