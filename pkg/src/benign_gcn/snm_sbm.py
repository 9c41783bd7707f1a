"""Signal-noise features on a two-block stochastic block model graph.

Each node carries two patches: a signal patch ``y * mu`` and a Gaussian noise
patch ``xi`` that is exactly orthogonal to ``mu``.  Same-class node pairs are
joined with probability ``p`` and cross-class pairs with probability ``s``.
The graph convolution used throughout is the row-normalised average over the
closed neighbourhood, ``D^-1 (A + I)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ConfigError
from .seeding import STREAM_DATA, make_rng

LabelMode = Literal["balanced", "iid"]


@dataclass(frozen=True)
class DataConfig:
    n: int = 250
    d: int = 500
    snr: float = 0.05
    sigma_p: float = 20.0
    p: float = 0.5
    s: float = 0.08
    label_mode: LabelMode = "balanced"
    seed: int = 0
    allow_heterophily: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.label_mode not in ("balanced", "iid"):
            raise ConfigError(f"label_mode must be 'balanced' or 'iid', got {self.label_mode!r}")
        if self.label_mode == "balanced" and self.n % 2:
            raise ConfigError(f"n must be even for balanced labels, got {self.n}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not self.snr > 0:
            raise ConfigError(f"snr must be > 0, got {self.snr}")
        if not self.sigma_p > 0:
            raise ConfigError(f"sigma_p must be > 0, got {self.sigma_p}")
        for name in ("p", "s"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.s > self.p and not self.allow_heterophily:
            raise ConfigError(
                f"s <= p required (homophilous graph), got p={self.p}, s={self.s}; "
                "set allow_heterophily to override"
            )

    @property
    def homophily(self) -> float:
        total = self.p + self.s
        return (self.p - self.s) / total if total > 0 else float("nan")

    @property
    def expected_degree(self) -> float:
        """Expected closed-neighbourhood size under balanced labels."""
        return self.n * (self.p + self.s) / 2 + 1 - self.p


@dataclass(frozen=True, eq=False)
class Dataset:
    """One SNM-SBM draw with its graph-aggregated quantities.

    Arrays are marked read-only after construction.
    """

    mu: np.ndarray          # (d,)
    y: np.ndarray           # (n,) of +/-1
    Xi: np.ndarray          # (n, d) noise patches
    A: np.ndarray           # (n, n) 0/1, symmetric, zero diagonal
    D: np.ndarray           # (n,) degrees of A + I
    y_agg: np.ndarray       # (n,)
    Xi_agg: np.ndarray      # (n, d)
    config: DataConfig | None = field(default=None)

    def __post_init__(self):
        for name in ("mu", "y", "Xi", "A", "D", "y_agg", "Xi_agg"):
            getattr(self, name).flags.writeable = False

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def A_tilde(self) -> np.ndarray:
        return self.A + np.eye(self.n)

    @property
    def homophily(self) -> float:
        if self.config is None:
            return float("nan")
        return self.config.homophily

    @property
    def mu_norm2(self) -> float:
        return float(self.mu @ self.mu)

    @property
    def xi_norm2(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.Xi, self.Xi)

    @property
    def snr(self) -> float:
        """Realised ||mu|| / (sigma_p sqrt(d)); needs the config for sigma_p."""
        if self.config is None:
            return float("nan")
        return float(np.sqrt(self.mu_norm2) / (self.config.sigma_p * np.sqrt(self.d)))

    def patches(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        """Signal coefficient (per node) and noise patches fed to ``kind``."""
        if kind == "cnn":
            return self.y, self.Xi
        if kind == "gcn":
            return self.y_agg, self.Xi_agg
        raise ValueError(f"unknown model kind {kind!r}")


def make_signal(d: int, snr: float, sigma_p: float, rng: np.random.Generator) -> np.ndarray:
    """Uniformly oriented signal vector with norm exactly ``snr * sigma_p * sqrt(d)``."""
    if d < 1 or not snr > 0 or not sigma_p > 0:
        raise ConfigError(f"need d >= 1, snr > 0, sigma_p > 0; got d={d}, snr={snr}, sigma_p={sigma_p}")
    g = rng.standard_normal(d)
    while not np.any(g):
        g = rng.standard_normal(d)
    return g * (snr * sigma_p * np.sqrt(d) / np.linalg.norm(g))


def sample_noise(mu: np.ndarray, sigma_p: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Gaussian noise with covariance ``sigma_p^2 (I - mu mu^T / ||mu||^2)``.

    Returns a single ``(d,)`` vector, or ``(size, d)`` rows when ``size`` is given.
    """
    mu2 = float(mu @ mu)
    if mu2 == 0.0:
        raise ConfigError("signal vector must be nonzero")
    shape = (mu.shape[0],) if size is None else (size, mu.shape[0])
    g = sigma_p * rng.standard_normal(shape)
    return g - np.multiply.outer(g @ mu / mu2, mu)


def make_labels(n: int, mode: LabelMode, rng: np.random.Generator) -> np.ndarray:
    if mode == "balanced":
        # interleaved: even indices +1, odd indices -1
        return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return rng.choice(np.array([-1.0, 1.0]), size=n)


def sample_adjacency(y: np.ndarray, p: float, s: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 adjacency; each unordered pair is drawn once."""
    n = y.shape[0]
    prob = np.where(np.equal.outer(y, y), p, s)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    return (upper | upper.T).astype(np.float64)


def aggregate(A: np.ndarray, y: np.ndarray, Xi: np.ndarray):
    """Degrees, aggregated labels and aggregated noise over closed neighbourhoods."""
    A_tilde = A + np.eye(A.shape[0])
    D = A_tilde.sum(axis=1)
    y_agg = (A_tilde @ y) / D
    Xi_agg = (A_tilde @ Xi) / D[:, None]
    return D, y_agg, Xi_agg


def build_dataset(config: DataConfig) -> Dataset:
    rng = make_rng(config.seed, STREAM_DATA)
    mu = make_signal(config.d, config.snr, config.sigma_p, rng)
    y = make_labels(config.n, config.label_mode, rng)
    Xi = sample_noise(mu, config.sigma_p, rng, size=config.n)
    A = sample_adjacency(y, config.p, config.s, rng)
    D, y_agg, Xi_agg = aggregate(A, y, Xi)
    return Dataset(mu=mu, y=y, Xi=Xi, A=A, D=D, y_agg=y_agg, Xi_agg=Xi_agg, config=config)


@dataclass(frozen=True)
class TestBatch:
    """Fresh test nodes: labels and the patches each model sees."""

    y: np.ndarray           # (k,)
    signal_coef: np.ndarray  # (k,) y for CNN, aggregated label for GCN
    noise: np.ndarray       # (k, d)
    degree: np.ndarray      # (k,)


def sample_test_batch(
    dataset: Dataset, k: int, rng: np.random.Generator, graph: bool = True
) -> TestBatch:
    """Draw ``k`` independent test nodes.

    Labels and noise are drawn first, then (if ``graph``) each test node is
    linked to every training node independently, with probability ``p`` for a
    class match and ``s`` otherwise.  Test nodes never link to each other and
    the training graph is left untouched.  The draw order means a CNN batch
    and a GCN batch from equal generator states share labels and noise.
    """
    cfg = dataset.config
    y = rng.choice(np.array([-1.0, 1.0]), size=k)
    xi = sample_noise(dataset.mu, cfg.sigma_p, rng, size=k)
    if not graph:
        return TestBatch(y=y, signal_coef=y, noise=xi, degree=np.ones(k))
    prob = np.where(np.equal.outer(y, dataset.y), cfg.p, cfg.s)
    E = (rng.random((k, dataset.n)) < prob).astype(np.float64)
    deg = 1.0 + E.sum(axis=1)
    y_agg = (y + E @ dataset.y) / deg
    xi_agg = (xi + E @ dataset.Xi) / deg[:, None]
    return TestBatch(y=y, signal_coef=y_agg, noise=xi_agg, degree=deg)


def attach_test_node(dataset: Dataset, y_test: float, rng: np.random.Generator):
    """Attach one test node with label ``y_test``.

    Returns ``(signal_patch, noise_patch, degree)`` where the signal patch is
    ``y_agg * mu``.
    """
    cfg = dataset.config
    xi = sample_noise(dataset.mu, cfg.sigma_p, rng)
    prob = np.where(dataset.y == y_test, cfg.p, cfg.s)
    e = (rng.random(dataset.n) < prob).astype(np.float64)
    deg = 1.0 + e.sum()
    y_agg = (y_test + e @ dataset.y) / deg
    xi_agg = (xi + e @ dataset.Xi) / deg
    return y_agg * dataset.mu, xi_agg, int(deg)


# --- plain-text dump -------------------------------------------------------

_MAGIC = "snm-sbm v1"


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dump_dataset(dataset: Dataset) -> str:
    """Serialise to the ``snm-sbm v1`` text container.

    Floats use Python's shortest round-trip ``repr``; the adjacency is written
    as lower-triangle bit rows (row ``i`` holds bits for columns ``0..i-1``).
    """
    cfg = dataset.config
    out = io.StringIO()
    out.write(f"{_MAGIC} {dataset.n} {dataset.d} {cfg.p!r} {cfg.s!r} {cfg.sigma_p!r} {cfg.snr!r} {cfg.seed}\n")
    out.write(_fmt(dataset.mu) + "\n")
    out.write(" ".join(str(int(v)) for v in dataset.y) + "\n")
    for row in dataset.Xi:
        out.write(_fmt(row) + "\n")
    A = dataset.A.astype(np.uint8)
    for i in range(dataset.n):
        out.write("".join("1" if b else "0" for b in A[i, :i]) + "\n")
    return out.getvalue()


def load_dataset(text: str) -> Dataset:
    lines = text.split("\n")
    head = lines[0].split()
    if " ".join(head[:2]) != _MAGIC or len(head) != 9:
        raise ValueError("not an snm-sbm v1 container")
    n, d = int(head[2]), int(head[3])
    p, s, sigma_p, snr = (float(v) for v in head[4:8])
    seed = int(head[8])
    mu = np.array([float(v) for v in lines[1].split()])
    y = np.array([float(v) for v in lines[2].split()])
    Xi = np.array([[float(v) for v in lines[3 + i].split()] for i in range(n)]).reshape(n, d)
    A = np.zeros((n, n))
    for i in range(n):
        bits = lines[3 + n + i]
        if len(bits) != i:
            raise ValueError(f"adjacency row {i} has {len(bits)} bits, expected {i}")
        A[i, :i] = [c == "1" for c in bits]
    A = A + A.T
    mode = "balanced" if n % 2 == 0 and np.array_equal(y, make_labels(n, "balanced", None)) else "iid"
    cfg = DataConfig(n=n, d=d, snr=snr, sigma_p=sigma_p, p=p, s=s, label_mode=mode, seed=seed,
                     allow_heterophily=s > p)
    D, y_agg, Xi_agg = aggregate(A, y, Xi)
    return Dataset(mu=mu, y=y, Xi=Xi, A=A, D=D, y_agg=y_agg, Xi_agg=Xi_agg, config=cfg)
