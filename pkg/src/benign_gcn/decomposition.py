"""Signal-noise decomposition of first-layer weights.

Under full-batch gradient descent every weight delta lies in
``span{mu, xi_1, ..., xi_n}``, so

    w_{j,r}(t) = w_{j,r}(0) + j * gamma_{j,r} * mu / ||mu||^2
                 + sum_i (rho_bar_{j,r,i} + rho_under_{j,r,i}) * xi_i / ||xi_i||^2.

``gamma`` and the two noise accumulators are advanced in lockstep with the
trainer.  ``project_coeffs`` recovers the same coefficients directly from the
weights by a least-squares solve, as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasisError, ShapeError
from .models import BANK_SIGNS, ModelParams, act_prime
from .snm_sbm import Dataset


@dataclass(frozen=True, eq=False)
class CoeffState:
    gamma: np.ndarray       # (2, m)
    rho_bar: np.ndarray     # (2, m, n), >= 0
    rho_under: np.ndarray   # (2, m, n), <= 0
    mu_norm2: float
    xi_norm2: np.ndarray    # (n,)

    @property
    def rho(self) -> np.ndarray:
        return self.rho_bar + self.rho_under

    @property
    def m(self) -> int:
        return self.gamma.shape[1]

    @property
    def n(self) -> int:
        return self.rho_bar.shape[2]


def init_coeffs(m: int, n: int, mu_norm2: float = 1.0, xi_norm2: np.ndarray | None = None) -> CoeffState:
    if xi_norm2 is None:
        xi_norm2 = np.ones(n)
    return CoeffState(
        gamma=np.zeros((2, m)),
        rho_bar=np.zeros((2, m, n)),
        rho_under=np.zeros((2, m, n)),
        mu_norm2=float(mu_norm2),
        xi_norm2=np.asarray(xi_norm2, dtype=np.float64),
    )


def init_coeffs_for(dataset: Dataset, m: int) -> CoeffState:
    return init_coeffs(m, dataset.n, dataset.mu_norm2, dataset.xi_norm2)


def _advance(state: CoeffState, params: ModelParams, mu, y, signal_coef, noise, adj_tilde, deg, loss_derivs, eta):
    n = y.shape[0]
    loss_derivs = np.asarray(loss_derivs, dtype=np.float64)
    if loss_derivs.shape != (n,):
        raise ShapeError(f"expected {n} loss derivatives, got shape {loss_derivs.shape}")
    W, q = params.W, params.q
    m = W.shape[1]
    if state.gamma.shape != (2, m) or state.n != n:
        raise ShapeError("coefficient state does not match weights / dataset")
    scale = eta / (n * m)

    sig_pre = (W @ mu)[:, :, None] * signal_coef[None, None, :]
    d_gamma = -scale * np.einsum("jri,i->jr", act_prime(sig_pre, q), loss_derivs * y * signal_coef) * state.mu_norm2

    B = act_prime(W @ noise.T, q) * (loss_derivs / deg)[None, None, :]   # (2, m, n) indexed by k
    same = (y[None, :] == BANK_SIGNS[:, None])[:, None, :]            # 1(y_k = j)
    B_same = np.where(same, B, 0.0)
    B_other = np.where(same, 0.0, B)
    if adj_tilde is not None:
        # sum over k in N(i); adj_tilde is symmetric
        B_same = B_same @ adj_tilde
        B_other = B_other @ adj_tilde
    d_bar = -scale * B_same * state.xi_norm2
    d_under = scale * B_other * state.xi_norm2

    return CoeffState(
        gamma=state.gamma + d_gamma,
        rho_bar=state.rho_bar + d_bar,
        rho_under=state.rho_under + d_under,
        mu_norm2=state.mu_norm2,
        xi_norm2=state.xi_norm2,
    )


def step_coeffs_gcn(state: CoeffState, params: ModelParams, dataset: Dataset, loss_derivs, eta: float) -> CoeffState:
    """Advance the coefficients by one GCN gradient step.

    ``params`` and ``loss_derivs`` must be the pre-update weights and the
    loss derivatives evaluated at them.
    """
    return _advance(state, params, dataset.mu, dataset.y, dataset.y_agg, dataset.Xi_agg,
                    dataset.A_tilde, dataset.D, loss_derivs, eta)


def step_coeffs_cnn(state: CoeffState, params: ModelParams, dataset: Dataset, loss_derivs, eta: float) -> CoeffState:
    """Same update on the identity graph (each node is its own only neighbour)."""
    return _advance(state, params, dataset.mu, dataset.y, dataset.y, dataset.Xi,
                    None, np.ones(dataset.n), loss_derivs, eta)


def step_coeffs(kind: str, state, params, dataset, loss_derivs, eta) -> CoeffState:
    if kind == "gcn":
        return step_coeffs_gcn(state, params, dataset, loss_derivs, eta)
    if kind == "cnn":
        return step_coeffs_cnn(state, params, dataset, loss_derivs, eta)
    raise ValueError(f"unknown model kind {kind!r}")


def reconstruct_weights(state: CoeffState, W0: np.ndarray, mu: np.ndarray, Xi: np.ndarray) -> np.ndarray:
    mu2 = float(mu @ mu)
    xi2 = np.einsum("ij,ij->i", Xi, Xi)
    signal = (BANK_SIGNS[:, None] * state.gamma)[:, :, None] * (mu / mu2)
    noise = (state.rho / xi2) @ Xi
    return W0 + signal + noise


def reconstruction_residual(state: CoeffState, W: np.ndarray, W0: np.ndarray, mu, Xi) -> float:
    """``||W_hat - W||_F / max(||W - W0||_F, tiny)``."""
    W_hat = reconstruct_weights(state, W0, mu, Xi)
    denom = max(float(np.linalg.norm(W - W0)), np.finfo(float).tiny)
    return float(np.linalg.norm(W_hat - W)) / denom


@dataclass(frozen=True, eq=False)
class ProjectedCoeffs:
    gamma: np.ndarray   # (2, m), sign convention matches CoeffState.gamma
    rho: np.ndarray     # (2, m, n), signed
    residual: float     # relative Frobenius norm of the out-of-span part
    condition: float


def project_coeffs(W: np.ndarray, W0: np.ndarray, mu: np.ndarray, Xi: np.ndarray,
                   max_condition: float = 1e12) -> ProjectedCoeffs:
    """Least-squares coefficients of ``W - W0`` in the basis ``{mu/||mu||^2, xi_i/||xi_i||^2}``.

    The Gram system is formed on unit-normalised basis vectors (to keep its
    conditioning independent of the very different norms of mu and xi) and
    solved by Cholesky.
    """
    n, d = Xi.shape
    if W.shape != W0.shape or W.shape[2] != d or mu.shape != (d,):
        raise ShapeError("weights, signal and noise dimensions disagree")
    basis = np.vstack([mu[None, :], Xi])                     # (n+1, d)
    norms = np.linalg.norm(basis, axis=1)
    U = basis / norms[:, None]
    G = U @ U.T
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > max_condition:
        raise DegenerateBasisError(f"Gram matrix condition number {cond:.3g} exceeds {max_condition:.3g}")
    delta = (W - W0).reshape(-1, d)
    L = np.linalg.cholesky(G)
    rhs = U @ delta.T
    c_unit = np.linalg.solve(L.T, np.linalg.solve(L, rhs))  # (n+1, 2m)
    # coefficient on b_k = basis_k / ||basis_k||^2 is c_unit * ||basis_k||
    coef = (c_unit * norms[:, None]).T.reshape(W.shape[0], W.shape[1], n + 1)
    fitted = (c_unit.T @ U)
    resid = float(np.linalg.norm(delta - fitted)) / max(float(np.linalg.norm(delta)), np.finfo(float).tiny)
    gamma = BANK_SIGNS[:, None] * coef[:, :, 0]
    return ProjectedCoeffs(gamma=gamma, rho=coef[:, :, 1:], residual=resid, condition=cond)


def summary(state: CoeffState) -> tuple[float, float, float]:
    """``(max_r gamma_{+1,r}, max_r gamma_{-1,r}, max |rho_bar + rho_under|)``."""
    return (
        float(state.gamma[0].max()),
        float(state.gamma[1].max()),
        float(np.abs(state.rho).max()) if state.rho.size else 0.0,
    )


def neuron_trace(state: CoeffState):
    """Per-neuron ``(gamma, max_i rho_bar, min_i rho_under)``, each ``(2, m)``."""
    return state.gamma.copy(), state.rho_bar.max(axis=2), state.rho_under.min(axis=2)


def coefficient_bound(horizon: int) -> float:
    """Monitoring threshold ``4 log T`` for a horizon of ``T`` steps."""
    return 4.0 * math.log(max(horizon, 2))


def bound_violations(state: CoeffState, horizon: int) -> list[str]:
    alpha = coefficient_bound(horizon)
    out = []
    if state.gamma.min() < 0 or state.gamma.max() > alpha:
        out.append(f"gamma outside [0, {alpha:.3g}]: [{state.gamma.min():.3g}, {state.gamma.max():.3g}]")
    if state.rho_bar.max(initial=0.0) > alpha:
        out.append(f"rho_bar max {state.rho_bar.max():.3g} > {alpha:.3g}")
    if state.rho_under.min(initial=0.0) < -alpha:
        out.append(f"rho_under min {state.rho_under.min():.3g} < {-alpha:.3g}")
    return out
