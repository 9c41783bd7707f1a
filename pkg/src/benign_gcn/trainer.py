"""Full-batch gradient descent on the logistic loss for the CNN and GCN."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy.special import expit

from . import decomposition as dec
from .errors import ConfigError, ShapeError, TrainingDiverged
from .models import (BANK_SIGNS, ModelConfig, ModelParams, act, act_prime, forward_batch, init_weights,
                     outputs_from_preacts, preactivations)
from .seeding import STREAM_INIT, STREAM_TEST, make_rng
from .snm_sbm import Dataset, sample_test_batch

ModelKind = Literal["cnn", "gcn"]
LOSS_CAP = 1e6


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.03
    epochs: int = 100
    model_kind: ModelKind = "gcn"
    n_test: int = 500
    track_decomposition: bool = True
    grad_check_every: int | None = None
    test_every_epoch: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.model_kind not in ("cnn", "gcn"):
            raise ConfigError(f"model_kind must be 'cnn' or 'gcn', got {self.model_kind!r}")
        if self.n_test < 1:
            raise ConfigError(f"n_test must be >= 1, got {self.n_test}")
        if self.grad_check_every is not None and self.grad_check_every < 1:
            raise ConfigError(f"grad_check_every must be >= 1, got {self.grad_check_every}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float = math.nan
    test_acc: float = math.nan
    max_gamma_plus: float | None = None
    max_gamma_minus: float | None = None
    max_abs_rho: float | None = None
    recon_residual: float | None = None
    rho_bar_monotone: bool | None = None
    rho_under_monotone: bool | None = None
    gamma_monotone: bool | None = None
    grad_check_error: float | None = None


@dataclass(eq=False)
class TrainRecord:
    model_config: ModelConfig
    train_config: TrainConfig
    metrics: list[EpochMetrics]
    initial_params: ModelParams
    final_params: ModelParams
    coeffs: dec.CoeffState | None = None
    label_alignment: float = 1.0        # min_i y_i * (aggregated y_i)
    coeff_trace: list = field(default_factory=list)
    bound_warnings: list[str] = field(default_factory=list)

    @property
    def final(self) -> EpochMetrics:
        return self.metrics[-1]


# --- loss ---------------------------------------------------------------

def softplus_loss(z):
    """``log(1 + exp(-z))`` without overflow."""
    return np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def loss_derivative(z):
    """``d/dz log(1 + exp(-z)) = -1 / (1 + exp(z))``."""
    return -expit(-np.asarray(z, dtype=np.float64))


def predict_sign(f):
    """Class prediction with ``sign(0) = +1``."""
    return np.where(np.asarray(f) >= 0, 1.0, -1.0)


def empirical_loss(params: ModelParams, dataset: Dataset, kind: str) -> float:
    coef, noise = dataset.patches(kind)
    f = forward_batch(params, dataset.mu, coef, noise)
    return float(softplus_loss(dataset.y * f).mean())


# --- gradients ------------------------------------------------------------

def _gradient(params: ModelParams, mu, y, signal_coef, noise):
    """Gradient of the mean logistic loss.  Returns ``(grad, f, loss_derivs)``."""
    W, q = params.W, params.q
    two, m, d = W.shape
    n = y.shape[0]
    if noise.shape != (n, d):
        raise ShapeError(f"noise patches have shape {noise.shape}, expected {(n, d)}")
    sig, nz = preactivations(W, mu, signal_coef, noise)
    f = outputs_from_preacts(sig, nz, q)
    lp = loss_derivative(y * f)
    c = lp * y                                                   # d loss_i / d f_i
    sig_w = np.einsum("jri,i->jr", act_prime(sig, q), c * signal_coef)
    noise_w = (act_prime(nz, q) * c).reshape(two * m, n) @ noise
    grad = sig_w[:, :, None] * mu + noise_w.reshape(two, m, d)
    grad *= BANK_SIGNS[:, None, None] / (n * m)
    return grad, f, lp


def gcn_gradient(params: ModelParams, dataset: Dataset) -> np.ndarray:
    return _gradient(params, dataset.mu, dataset.y, dataset.y_agg, dataset.Xi_agg)[0]


def cnn_gradient(params: ModelParams, dataset: Dataset) -> np.ndarray:
    return _gradient(params, dataset.mu, dataset.y, dataset.y, dataset.Xi)[0]


def gradient(params: ModelParams, dataset: Dataset, kind: str) -> np.ndarray:
    coef, noise = dataset.patches(kind)
    return _gradient(params, dataset.mu, dataset.y, coef, noise)[0]


def gradient_check(params: ModelParams, dataset: Dataset, kind: str, n_coords: int = 100,
                   rng: np.random.Generator | None = None, step_scale: float = 1e-5,
                   precise: bool = True) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates are sampled uniformly; the step for coordinate ``w`` is
    ``step_scale * (1 + |w|)``.  Relative error is
    ``|a - b| / max(|a|, |b|, 1e-8 * max|a|)``.

    With ``precise`` the loss difference ``L(w + h) - L(w - h)`` is formed per
    sample from the perturbed neuron's output change, using
    ``l(z1) - l(z2) = log1p(expm1(z2 - z1) * expit(-z2))``.  This is the same
    central difference, minus the cancellation error of subtracting two
    losses near ``log 2``.  Only the forward definition is used.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    analytic = gradient(params, dataset, kind)
    flat = params.W.reshape(-1)
    idx = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
    floor = 1e-8 * float(np.abs(analytic).max()) or np.finfo(float).tiny
    coef, noise = dataset.patches(kind)
    y, q, m = dataset.y, params.q, params.m
    if precise:
        sig, nz = preactivations(params.W, dataset.mu, coef, noise)
        f = outputs_from_preacts(sig, nz, q)
    worst = 0.0
    for k in idx:
        h = step_scale * (1.0 + abs(flat[k]))
        if precise:
            jb, r, c = np.unravel_index(k, params.W.shape)
            s_sig, s_nz = sig[jb, r], nz[jb, r]
            dsig, dnz = h * coef * dataset.mu[c], h * noise[:, c]
            base = act(s_sig, q) + act(s_nz, q)
            plus = act(s_sig + dsig, q) + act(s_nz + dnz, q)
            minus = act(s_sig - dsig, q) + act(s_nz - dnz, q)
            z_plus = y * (f + BANK_SIGNS[jb] * (plus - base) / m)
            z_minus = y * (f + BANK_SIGNS[jb] * (minus - base) / m)
            diff = np.log1p(np.expm1(z_minus - z_plus) * expit(-z_minus))
            fd = float(diff.mean()) / (2 * h)
        else:
            Wp, Wm = flat.copy(), flat.copy()
            Wp[k] += h
            Wm[k] -= h
            lp = empirical_loss(params.with_weights(Wp.reshape(params.W.shape)), dataset, kind)
            lm = empirical_loss(params.with_weights(Wm.reshape(params.W.shape)), dataset, kind)
            fd = (lp - lm) / (2 * h)
        a = analytic.reshape(-1)[k]
        worst = max(worst, abs(fd - a) / max(abs(fd), abs(a), floor))
    return worst


# --- evaluation -----------------------------------------------------------

def evaluate(params: ModelParams, dataset: Dataset, model_kind: str, n_test: int,
             rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo test loss and accuracy on ``n_test`` fresh nodes."""
    if n_test < 1:
        raise ConfigError(f"n_test must be >= 1, got {n_test}")
    batch = sample_test_batch(dataset, n_test, rng, graph=(model_kind == "gcn"))
    f = forward_batch(params, dataset.mu, batch.signal_coef, batch.noise)
    loss = float(softplus_loss(batch.y * f).mean())
    acc = float((predict_sign(f) == batch.y).mean())
    return loss, acc


# --- training loop --------------------------------------------------------

def initial_params(dataset: Dataset, model: ModelConfig, seed: int) -> ModelParams:
    return init_weights(model.m, dataset.d, model.sigma_0, make_rng(seed, STREAM_INIT), q=model.q)


def train(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig,
          params0: ModelParams | None = None) -> TrainRecord:
    """Run ``epochs`` full-batch updates, recording metrics before the first and after each."""
    kind = train_config.model_kind
    eta = train_config.eta
    if params0 is None:
        params0 = initial_params(dataset, model_config, train_config.seed)
    params = params0
    coef, noise = dataset.patches(kind)
    y = dataset.y
    label_alignment = float(np.min(y * coef))

    track = train_config.track_decomposition
    state = dec.init_coeffs_for(dataset, params.m) if track else None
    metrics: list[EpochMetrics] = []
    trace = []
    mono = (None, None, None)

    for epoch in range(train_config.epochs + 1):
        grad, f, lp = _gradient(params, dataset.mu, y, coef, noise)
        losses = softplus_loss(y * f)
        train_loss = float(losses.mean())
        if not np.isfinite(train_loss) or train_loss > LOSS_CAP:
            raise TrainingDiverged(epoch, f"train loss {train_loss}")
        if not np.all(np.isfinite(params.W)):
            raise TrainingDiverged(epoch, "non-finite weights")
        train_acc = float((predict_sign(f) == y).mean())

        test_loss = test_acc = math.nan
        if train_config.test_every_epoch or epoch == train_config.epochs:
            test_loss, test_acc = evaluate(params, dataset, kind, train_config.n_test,
                                           make_rng(train_config.seed, STREAM_TEST, epoch))

        extra = {}
        if track:
            g_plus, g_minus, rho_max = dec.summary(state)
            extra = dict(
                max_gamma_plus=g_plus, max_gamma_minus=g_minus, max_abs_rho=rho_max,
                recon_residual=dec.reconstruction_residual(state, params.W, params0.W, dataset.mu, dataset.Xi),
                rho_bar_monotone=mono[0], rho_under_monotone=mono[1], gamma_monotone=mono[2],
            )
            trace.append(dec.neuron_trace(state))
        if train_config.grad_check_every and epoch % train_config.grad_check_every == 0:
            extra["grad_check_error"] = gradient_check(params, dataset, kind, rng=make_rng(train_config.seed, 99, epoch))

        metrics.append(EpochMetrics(epoch, train_loss, train_acc, test_loss, test_acc, **extra))
        if epoch == train_config.epochs:
            break

        if track:
            new_state = dec.step_coeffs(kind, state, params, dataset, lp, eta)
            mono = (
                bool(np.all(new_state.rho_bar >= state.rho_bar)),
                bool(np.all(new_state.rho_under <= state.rho_under)),
                bool(np.all(new_state.gamma >= state.gamma)),
            )
            state = new_state
        params = params.with_weights(params.W - eta * grad)

    bound_warnings = dec.bound_violations(state, train_config.epochs) if track else []
    for msg in bound_warnings:
        warnings.warn(f"{kind}: coefficient bound exceeded: {msg}", stacklevel=2)

    return TrainRecord(
        model_config=model_config, train_config=train_config, metrics=metrics,
        initial_params=params0, final_params=params, coeffs=state,
        label_alignment=label_alignment, coeff_trace=trace, bound_warnings=bound_warnings,
    )


# --- CSV output -----------------------------------------------------------

DYNAMICS_HEADER = ["epoch", "train_loss", "test_loss", "train_acc", "test_acc",
                   "max_gamma_plus", "max_gamma_minus", "max_abs_rho", "recon_residual"]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def dynamics_csv(record: TrainRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DYNAMICS_HEADER)
    for row in record.metrics:
        d = asdict(row)
        w.writerow([_cell(d[k]) for k in DYNAMICS_HEADER])
    return buf.getvalue()


def coeff_trace_csv(record: TrainRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "j", "r", "gamma", "max_rho_bar", "min_rho_under"])
    for epoch, (gamma, rbar, runder) in enumerate(record.coeff_trace):
        for jb, j in enumerate((1, -1)):
            for r in range(gamma.shape[1]):
                w.writerow([epoch, j, r, repr(float(gamma[jb, r])), repr(float(rbar[jb, r])), repr(float(runder[jb, r]))])
    return buf.getvalue()
