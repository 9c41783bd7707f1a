"""Train CNN and GCN on the default SNM-SBM instance and plot the curves.

    python scripts/reproduce_dynamics.py --seeds 0 1 2 --out out/dynamics

Writes the per-seed CSVs and, if matplotlib is installed, curves.png.
"""

import argparse
import warnings
from dataclasses import replace
from pathlib import Path

from benign_gcn.experiments import run_dynamics
from benign_gcn.models import ModelConfig
from benign_gcn.snm_sbm import DataConfig
from benign_gcn.trainer import TrainConfig


def plot(records, path):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping plot")
        return
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for seed, recs in records.items():
        for kind, style in (("cnn", "--"), ("gcn", "-")):
            ms = recs[kind].metrics
            ep = [m.epoch for m in ms]
            axes[0].plot(ep, [m.train_loss for m in ms], style, label=f"{kind} seed {seed}")
            axes[1].plot(ep, [m.test_acc for m in ms], style, label=f"{kind} seed {seed}")
    axes[0].set(xlabel="epoch", ylabel="train loss", yscale="log")
    axes[1].set(xlabel="epoch", ylabel="test accuracy", ylim=(0.4, 1.02))
    axes[1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--out", type=Path, default=Path("out/dynamics"))
    args = ap.parse_args()

    data, model = DataConfig(), ModelConfig()
    records = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in args.seeds:
            tc = TrainConfig(epochs=args.epochs, seed=seed)
            records[seed] = run_dynamics(replace(data, seed=seed), model, tc, args.out / f"seed{seed}")
    for seed, recs in records.items():
        g, c = recs["gcn"].final, recs["cnn"].final
        print(f"seed {seed}: gcn train {g.train_acc:.3f} test {g.test_acc:.3f} | "
              f"cnn train {c.train_acc:.3f} test {c.test_acc:.3f}")
    plot(records, args.out / "curves.png")


if __name__ == "__main__":
    main()
