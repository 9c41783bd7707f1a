import numpy as np
import pytest

from benign_gcn import decomposition as dec
from benign_gcn.errors import DegenerateBasisError
from benign_gcn.models import ModelConfig, init_weights
from benign_gcn.snm_sbm import DataConfig, build_dataset
from benign_gcn.trainer import TrainConfig, _gradient, train

# small instance where both models train stably and the GCN learns the signal
SMALL = dict(n=60, d=400, sigma_p=1.0, snr=0.5, p=0.5, s=0.08)
SMALL_MODEL = ModelConfig(m=8, q=3, sigma_0=0.1)
SMALL_ETA = 0.5


def small_ds(seed=0, **kw):
    return build_dataset(DataConfig(**{**SMALL, "seed": seed, **kw}))


def run(kind, seed=0, epochs=50, **kw):
    ds = small_ds(seed, **kw)
    rec = train(ds, SMALL_MODEL, TrainConfig(eta=SMALL_ETA, epochs=epochs, model_kind=kind, n_test=100, seed=seed))
    return ds, rec


def test_zero_state():
    ds = small_ds()
    W0 = init_weights(8, 400, 0.1, np.random.default_rng(0)).W
    state = dec.init_coeffs_for(ds, 8)
    assert np.array_equal(dec.reconstruct_weights(state, W0, ds.mu, ds.Xi), W0)
    assert dec.summary(state) == (0.0, 0.0, 0.0)
    proj = dec.project_coeffs(W0, W0, ds.mu, ds.Xi)
    assert not proj.gamma.any() and not proj.rho.any() and proj.residual == 0


def test_first_step_signs():
    ds = small_ds()
    assert np.all(ds.y * ds.y_agg > 0)
    params = init_weights(8, 400, 0.1, np.random.default_rng(1))
    for kind in ("cnn", "gcn"):
        coef, noise = ds.patches(kind)
        _, _, lp = _gradient(params, ds.mu, ds.y, coef, noise)
        s0 = dec.init_coeffs_for(ds, 8)
        s1 = dec.step_coeffs(kind, s0, params, ds, lp, SMALL_ETA)
        assert np.all(s1.gamma >= 0)
        assert np.all(s1.rho_bar >= 0) and np.all(s1.rho_under <= 0)


def test_indicator_structure_cnn():
    ds = small_ds()
    params = init_weights(8, 400, 0.1, np.random.default_rng(2))
    _, _, lp = _gradient(params, ds.mu, ds.y, ds.y, ds.Xi)
    s1 = dec.step_coeffs_cnn(dec.init_coeffs_for(ds, 8), params, ds, lp, SMALL_ETA)
    pos = ds.y == 1
    assert not s1.rho_bar[0][:, ~pos].any() and not s1.rho_bar[1][:, pos].any()
    assert not s1.rho_under[0][:, pos].any() and not s1.rho_under[1][:, ~pos].any()


def test_cnn_step_is_gcn_step_without_edges():
    ds = small_ds(p=0.0, s=0.0)
    params = init_weights(8, 400, 0.1, np.random.default_rng(3))
    _, _, lp = _gradient(params, ds.mu, ds.y, ds.y, ds.Xi)
    s0 = dec.init_coeffs_for(ds, 8)
    a = dec.step_coeffs_cnn(s0, params, ds, lp, SMALL_ETA)
    b = dec.step_coeffs_gcn(s0, params, ds, lp, SMALL_ETA)
    for name in ("gamma", "rho_bar", "rho_under"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


@pytest.mark.parametrize("kind", ["cnn", "gcn"])
def test_reconstruction_after_training(kind):
    ds, rec = run(kind)
    assert max(m.recon_residual for m in rec.metrics) <= 1e-10


@pytest.mark.parametrize("kind", ["cnn", "gcn"])
def test_projection_agrees_with_iterated(kind):
    ds, rec = run(kind)
    proj = dec.project_coeffs(rec.final_params.W, rec.initial_params.W, ds.mu, ds.Xi)
    st = rec.coeffs
    assert np.abs(proj.gamma - st.gamma).max() <= 1e-6 * np.abs(st.gamma).max()
    assert np.abs(proj.rho - st.rho).max() <= 1e-6 * np.abs(st.rho).max()
    assert proj.residual <= 1e-10


@pytest.mark.parametrize("kind", ["cnn", "gcn"])
def test_gamma_is_signal_inner_product(kind):
    ds, rec = run(kind, epochs=20)
    delta = rec.final_params.W - rec.initial_params.W
    recovered = np.array([1.0, -1.0])[:, None] * (delta @ ds.mu)
    np.testing.assert_allclose(recovered, rec.coeffs.gamma, rtol=1e-9, atol=1e-9 * np.abs(rec.coeffs.gamma).max())


def test_projection_single_signal_step():
    ds = small_ds()
    W0 = init_weights(8, 400, 0.1, np.random.default_rng(4)).W
    for jb, expected in ((0, 3.0), (1, -3.0)):
        W = W0.copy()
        W[jb, 2] += 3 * ds.mu / ds.mu_norm2
        proj = dec.project_coeffs(W, W0, ds.mu, ds.Xi)
        # raw coefficient on mu is 3; gamma carries the bank sign
        assert proj.gamma[jb, 2] * (1 if jb == 0 else -1) == pytest.approx(3.0, abs=1e-10)
        assert proj.gamma[jb, 2] == pytest.approx(expected, abs=1e-10)
        assert np.abs(proj.rho).max() <= 1e-10


def test_projection_rejects_degenerate_basis():
    ds = small_ds()
    Xi = np.vstack([ds.Xi[:-1], ds.Xi[:1]])
    W0 = np.zeros((2, 8, 400))
    with pytest.raises(DegenerateBasisError):
        dec.project_coeffs(W0, W0, ds.mu, Xi)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_benign_run_is_signal_dominated(seed):
    _, rec = run("gcn", seed=seed)
    g_plus, g_minus, rho = dec.summary(rec.coeffs)
    gamma = max(g_plus, g_minus)
    assert gamma >= 1 and rho <= 0.1 * gamma


def test_max_gamma_monotone_when_labels_aligned():
    _, rec = run("gcn")
    assert rec.label_alignment >= 0
    g = [max(m.max_gamma_plus, m.max_gamma_minus) for m in rec.metrics]
    assert all(b >= a for a, b in zip(g, g[1:]))
    assert all(m.gamma_monotone for m in rec.metrics[1:])


def test_bound_monitor():
    assert dec.coefficient_bound(100) == pytest.approx(4 * np.log(100))
    state = dec.init_coeffs(2, 3)
    assert dec.bound_violations(state, 100) == []
    big = dec.CoeffState(state.gamma + 100, state.rho_bar, state.rho_under, 1.0, np.ones(3))
    assert dec.bound_violations(big, 100)
