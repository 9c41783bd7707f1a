"""Dynamics runs and SNR x n phase sweeps with file outputs.

Seeds: a dataset for sweep cell ``(ni, si)`` and repeat ``r`` uses
``mix_seed(master, STREAM_DATA, ni, si, r)`` and is shared by both models;
the model run itself (weight init and test draws) uses
``mix_seed(master, model_id, ni, si, r)`` with ``model_id`` 1 for CNN and 2
for GCN.  Any cell can be recomputed alone from these.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, TrainingDiverged
from .models import ModelConfig
from .seeding import STREAM_DATA, mix_seed
from .snm_sbm import DataConfig, build_dataset
from .trainer import TrainConfig, TrainRecord, coeff_trace_csv, dynamics_csv, initial_params, train

log = logging.getLogger(__name__)

MODEL_IDS = {"cnn": 1, "gcn": 2}
DESK_SNRS = tuple(float(v) for v in np.geomspace(0.045, 0.98, 6))
DESK_NS = (200, 450, 1000, 2250)
FULL_SNRS = tuple(float(v) for v in np.geomspace(0.045, 0.98, 12))
FULL_NS = tuple(range(200, 7201, 1000))


@dataclass(frozen=True)
class SweepConfig:
    snr_values: tuple[float, ...] = DESK_SNRS
    n_values: tuple[int, ...] = DESK_NS
    models: tuple[str, ...] = ("cnn", "gcn")
    d: int = 500
    sigma_p: float = 20.0
    p: float = 0.5
    s: float = 0.08
    q: int = 3
    eta: float = 0.03
    m: int = 20
    sigma_0: float = 1e-3
    epochs: int = 200
    n_test: int = 500
    repeats: int = 3
    master_seed: int = 0

    def __post_init__(self):
        if not self.snr_values or not self.n_values or not self.models:
            raise ConfigError("sweep axes and model list must be nonempty")
        if any(not v > 0 for v in self.snr_values) or any(v < 2 for v in self.n_values):
            raise ConfigError("snr values must be > 0 and n values >= 2")
        if set(self.models) - set(MODEL_IDS):
            raise ConfigError(f"unknown models {set(self.models) - set(MODEL_IDS)}")
        if self.epochs < 1 or self.repeats < 1:
            raise ConfigError("epochs and repeats must be >= 1")

    def data_config(self, ni: int, si: int, r: int) -> DataConfig:
        return DataConfig(n=self.n_values[ni], d=self.d, snr=self.snr_values[si], sigma_p=self.sigma_p,
                          p=self.p, s=self.s, seed=mix_seed(self.master_seed, STREAM_DATA, ni, si, r))

    def model_config(self) -> ModelConfig:
        return ModelConfig(m=self.m, q=self.q, sigma_0=self.sigma_0)

    def train_config(self, model: str, ni: int, si: int, r: int) -> TrainConfig:
        return TrainConfig(eta=self.eta, epochs=self.epochs, model_kind=model, n_test=self.n_test,
                           track_decomposition=False, test_every_epoch=False,
                           seed=mix_seed(self.master_seed, MODEL_IDS[model], ni, si, r))


@dataclass
class SweepGrid:
    snr_values: tuple[float, ...]
    n_values: tuple[int, ...]
    test_acc: dict[str, np.ndarray]        # model -> (len(n), len(snr)) mean final test accuracy
    train_acc: dict[str, np.ndarray]
    rows: list[dict] = field(default_factory=list)

    def benign_cells(self, model: str, threshold: float = 0.95) -> set[tuple[int, int]]:
        acc = self.test_acc[model]
        return {(i, j) for i in range(acc.shape[0]) for j in range(acc.shape[1]) if acc[i, j] >= threshold}


# --- dynamics -------------------------------------------------------------

def run_dynamics(data: DataConfig, model: ModelConfig, train_cfg: TrainConfig,
                 out_dir: str | Path | None = None) -> dict[str, TrainRecord]:
    """Train CNN and GCN on one shared dataset draw with decomposition tracking on.

    Both models start from the same initial weights (derived from
    ``train_cfg.seed``), so with ``p = s = 0`` their trajectories coincide.
    """
    ds = build_dataset(data)
    params0 = initial_params(ds, model, train_cfg.seed)
    records = {}
    for kind in ("cnn", "gcn"):
        cfg = replace(train_cfg, model_kind=kind, track_decomposition=True)
        records[kind] = train(ds, model, cfg, params0=params0)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for kind, rec in records.items():
            (out / f"dynamics_{kind}.csv").write_text(dynamics_csv(rec))
            (out / f"coeffs_{kind}.csv").write_text(coeff_trace_csv(rec))
    return records


DYNAMICS_FILES = ("dynamics_cnn.csv", "dynamics_gcn.csv", "coeffs_cnn.csv", "coeffs_gcn.csv")


# --- sweep ----------------------------------------------------------------

SWEEP_HEADER = ["model", "n", "snr", "repeat", "seed", "final_train_acc", "final_test_acc"]


def run_cell(cfg: SweepConfig, ni: int, si: int, r: int) -> list[dict]:
    """One dataset draw, every requested model.  Pure function of its arguments."""
    data = cfg.data_config(ni, si, r)
    ds = build_dataset(data)
    model = cfg.model_config()
    rows = []
    for kind in cfg.models:
        tcfg = cfg.train_config(kind, ni, si, r)
        try:
            final = train(ds, model, tcfg).final
            tr, te = final.train_acc, final.test_acc
        except TrainingDiverged as exc:
            warnings.warn(f"{kind} n={data.n} snr={data.snr:.4g} repeat={r}: {exc}", stacklevel=2)
            tr = te = math.nan
        rows.append(dict(model=kind, n=data.n, snr=data.snr, repeat=r, seed=tcfg.seed,
                         final_train_acc=tr, final_test_acc=te, ni=ni, si=si))
    log.info("cell n=%d snr=%.4g repeat=%d done", data.n, data.snr, r)
    return rows


def _run_cell_star(args):
    return run_cell(*args)


def run_phase_sweep(cfg: SweepConfig, workers: int = 1, out_dir: str | Path | None = None) -> SweepGrid:
    tasks = [(cfg, ni, si, r) for ni in range(len(cfg.n_values))
             for si in range(len(cfg.snr_values)) for r in range(cfg.repeats)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_star, tasks))
    else:
        results = [run_cell(*t) for t in tasks]
    # assembly is by task index, never by completion order
    rows = [row for cell in results for row in cell]

    shape = (len(cfg.n_values), len(cfg.snr_values))
    test_acc, train_acc = {}, {}
    for model in cfg.models:
        te = np.full(shape, np.nan)
        tr = np.full(shape, np.nan)
        for ni in range(shape[0]):
            for si in range(shape[1]):
                cell = [r for r in rows if r["model"] == model and r["ni"] == ni and r["si"] == si]
                vals = [r["final_test_acc"] for r in cell if not math.isnan(r["final_test_acc"])]
                if len(vals) < len(cell):
                    warnings.warn(f"{model} cell n={cfg.n_values[ni]} snr={cfg.snr_values[si]:.4g}: "
                                  f"{len(cell) - len(vals)} diverged repeat(s) excluded", stacklevel=2)
                if vals:
                    te[ni, si] = float(np.mean(vals))
                    tr[ni, si] = float(np.mean([r["final_train_acc"] for r in cell
                                                if not math.isnan(r["final_train_acc"])]))
        test_acc[model], train_acc[model] = te, tr
    grid = SweepGrid(tuple(cfg.snr_values), tuple(cfg.n_values), test_acc, train_acc, rows)
    if out_dir is not None:
        write_sweep_outputs(grid, out_dir)
    return grid


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def sweep_csv(grid: SweepGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in sorted(grid.rows, key=lambda r: (r["model"], r["ni"], r["si"], r["repeat"])):
        w.writerow([row["model"]] + [_num(row[k]) for k in SWEEP_HEADER[1:]])
    return buf.getvalue()


def render_heatmap(grid: SweepGrid, model: str) -> bytes:
    """Plain (P2) graymap: one column per SNR, one row per n with the largest n on top.

    Pixel value is ``floor(255 * acc + 0.5)``; missing cells are 0.
    """
    acc = grid.test_acc.get(model)
    if acc is None or acc.size == 0:
        raise ValueError(f"no grid data for model {model!r}")
    order = sorted(range(len(grid.n_values)), key=lambda i: grid.n_values[i], reverse=True)
    lines = ["P2", f"{acc.shape[1]} {acc.shape[0]}", "255"]
    for i in order:
        px = [0 if math.isnan(a) else int(math.floor(255 * a + 0.5)) for a in acc[i]]
        lines.append(" ".join(str(v) for v in px))
    return ("\n".join(lines) + "\n").encode("ascii")


def write_sweep_outputs(grid: SweepGrid, out_dir: str | Path) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(grid))
    files = ["sweep.csv"]
    for model in grid.test_acc:
        name = f"heatmap_{model}.pgm"
        (out / name).write_bytes(render_heatmap(grid, model))
        files.append(name)
    return files
