"""Two-layer CNN / GCN with polynomial ReLU and a fixed +/-1 output layer.

Weights are stored as one ``(2, m, d)`` array: bank 0 feeds ``F_{+1}`` and
bank 1 feeds ``F_{-1}``; the network output is ``F_{+1} - F_{-1}``.  The GCN
is the CNN applied to graph-aggregated patches, so both share the code here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .snm_sbm import DataConfig, Dataset

BANK_SIGNS = np.array([1.0, -1.0])


@dataclass(frozen=True)
class ModelConfig:
    m: int = 20
    q: int = 3
    sigma_0: float = 1e-3
    allow_q2: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if int(self.q) != self.q or self.q < 2:
            raise ConfigError(f"q must be an integer >= 2, got {self.q}")
        if self.q == 2 and not self.allow_q2:
            raise ConfigError("q = 2 is only allowed for diagnostics (set allow_q2)")
        if not self.sigma_0 > 0:
            raise ConfigError(f"sigma_0 must be > 0, got {self.sigma_0}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    W: np.ndarray  # (2, m, d)
    q: int = 3
    sigma_0: float = 1e-3

    def __post_init__(self):
        if self.W.ndim != 3 or self.W.shape[0] != 2:
            raise ShapeError(f"weights must have shape (2, m, d), got {self.W.shape}")

    @classmethod
    def from_banks(cls, W_plus, W_minus, q=3, sigma_0=1e-3) -> ModelParams:
        W_plus, W_minus = np.atleast_2d(W_plus), np.atleast_2d(W_minus)
        if W_plus.shape != W_minus.shape:
            raise ShapeError(f"bank shapes differ: {W_plus.shape} vs {W_minus.shape}")
        return cls(np.stack([W_plus, W_minus]).astype(np.float64), q, sigma_0)

    @property
    def W_plus(self) -> np.ndarray:
        return self.W[0]

    @property
    def W_minus(self) -> np.ndarray:
        return self.W[1]

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @property
    def d(self) -> int:
        return self.W.shape[2]

    def with_weights(self, W: np.ndarray) -> ModelParams:
        return ModelParams(W, self.q, self.sigma_0)


def act(z, q: int):
    return np.maximum(z, 0.0) ** q


def act_prime(z, q: int):
    return q * np.maximum(z, 0.0) ** (q - 1)


def init_weights(m: int, d: int, sigma_0: float, rng: np.random.Generator, q: int = 3) -> ModelParams:
    if not sigma_0 > 0:
        raise ConfigError(f"sigma_0 must be > 0, got {sigma_0}")
    if m < 1 or d < 1:
        raise ConfigError(f"m and d must be >= 1, got m={m}, d={d}")
    return ModelParams(sigma_0 * rng.standard_normal((2, m, d)), q, sigma_0)


def forward_pair(W_plus, W_minus, patch1, patch2, q: int) -> float:
    """Network output on a single two-patch input."""
    W_plus, W_minus = np.atleast_2d(W_plus), np.atleast_2d(W_minus)
    patch1, patch2 = np.asarray(patch1, float), np.asarray(patch2, float)
    d = W_plus.shape[1]
    if W_minus.shape != W_plus.shape or patch1.shape != (d,) or patch2.shape != (d,):
        raise ShapeError("weight banks and patches must share dimension d")
    m = W_plus.shape[0]
    f_plus = (act(W_plus @ patch1, q) + act(W_plus @ patch2, q)).sum() / m
    f_minus = (act(W_minus @ patch1, q) + act(W_minus @ patch2, q)).sum() / m
    return float(f_plus - f_minus)


def preactivations(W: np.ndarray, mu: np.ndarray, signal_coef: np.ndarray, noise: np.ndarray):
    """Inner products of every neuron with every signal and noise patch.

    ``signal_coef[i] * mu`` is sample i's signal patch.  Returns two
    ``(2, m, k)`` arrays ``(<w, c_i mu>, <w, noise_i>)``.
    """
    two, m, d = W.shape
    if mu.shape != (d,) or noise.ndim != 2 or noise.shape[1] != d:
        raise ShapeError(f"patch dimension mismatch: weights have d={d}")
    sig = (W @ mu)[:, :, None] * signal_coef[None, None, :]
    nz = (W.reshape(two * m, d) @ noise.T).reshape(two, m, -1)
    return sig, nz


def outputs_from_preacts(sig: np.ndarray, nz: np.ndarray, q: int) -> np.ndarray:
    F = (act(sig, q) + act(nz, q)).mean(axis=1)
    return F[0] - F[1]


def forward_batch(params: ModelParams, mu: np.ndarray, signal_coef: np.ndarray, noise: np.ndarray) -> np.ndarray:
    sig, nz = preactivations(params.W, mu, signal_coef, noise)
    return outputs_from_preacts(sig, nz, params.q)


def forward_all(params: ModelParams, dataset: Dataset, kind: str) -> np.ndarray:
    """Outputs on every training node for ``kind`` in {'cnn', 'gcn'}."""
    coef, noise = dataset.patches(kind)
    return forward_batch(params, dataset.mu, coef, noise)


def _check_index(dataset: Dataset, i: int):
    if not 0 <= i < dataset.n:
        raise IndexError(f"sample index {i} out of range for n={dataset.n}")


def forward_cnn(params: ModelParams, dataset: Dataset, i: int) -> float:
    _check_index(dataset, i)
    return forward_pair(params.W_plus, params.W_minus, dataset.y[i] * dataset.mu, dataset.Xi[i], params.q)


def forward_gcn(params: ModelParams, dataset: Dataset, i: int) -> float:
    _check_index(dataset, i)
    return forward_pair(params.W_plus, params.W_minus, dataset.y_agg[i] * dataset.mu, dataset.Xi_agg[i], params.q)


def init_scale_bound(data: DataConfig, model: ModelConfig) -> float:
    """Value of the initialization-scale upper bound with all hidden constants set to 1.

    ``m^{-2/(q-2)} n^{-max(1/(q-2), 1)} min{(sigma_p sqrt(d/(n(p+s))))^{-1}, (Xi ||mu||)^{-1}}``.
    Only meaningful for q > 2.
    """
    n, q, m = data.n, model.q, model.m
    if q <= 2:
        return float("inf")
    mu_norm = data.snr * data.sigma_p * np.sqrt(data.d)
    deg = n * (data.p + data.s)
    noise_scale = data.sigma_p * np.sqrt(data.d / deg) if deg > 0 else data.sigma_p * np.sqrt(data.d)
    homophily = data.homophily if deg > 0 else 1.0
    term = min(1.0 / noise_scale, 1.0 / (homophily * mu_norm)) if homophily > 0 else 1.0 / noise_scale
    return float(m ** (-2.0 / (q - 2)) * n ** (-max(1.0 / (q - 2), 1.0)) * term)
