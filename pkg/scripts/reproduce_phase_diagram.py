"""SNR x n phase sweep for both models, with the predicted boundaries overlaid.

    python scripts/reproduce_phase_diagram.py --workers 4 --out out/phase
    python scripts/reproduce_phase_diagram.py --full --workers 4   # n up to 7200, slow
"""

import argparse
import warnings
from pathlib import Path

import numpy as np

from benign_gcn.experiments import FULL_NS, FULL_SNRS, SweepConfig, run_phase_sweep
from benign_gcn.theory_checks import phase_condition


def plot(grid, cfg, path):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping plot")
        return
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    order = np.argsort(grid.n_values)[::-1]
    for ax, model in zip(axes, ("cnn", "gcn")):
        acc = grid.test_acc[model][order]
        im = ax.imshow(acc, vmin=0.5, vmax=1.0, cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(grid.snr_values)), [f"{s:.3g}" for s in grid.snr_values], rotation=45)
        ax.set_yticks(range(len(order)), [str(grid.n_values[i]) for i in order])
        ax.set(title=model, xlabel="SNR")
        for r, i in enumerate(order):
            for c, snr in enumerate(grid.snr_values):
                v = phase_condition(grid.n_values[i], snr, cfg.p, cfg.s, cfg.q)
                if (v.cnn_benign if model == "cnn" else v.gcn_benign):
                    ax.text(c, r, "+", ha="center", va="center", color="white")
    axes[0].set_ylabel("n")
    fig.colorbar(im, ax=axes, shrink=0.8, label="test accuracy")
    fig.savefig(path, dpi=120, bbox_inches="tight")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--full", action="store_true", help="extended grid (n to 7200)")
    ap.add_argument("--out", type=Path, default=Path("out/phase"))
    args = ap.parse_args()

    cfg = SweepConfig(repeats=args.repeats)
    if args.full:
        cfg = SweepConfig(snr_values=FULL_SNRS, n_values=FULL_NS, repeats=args.repeats)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid = run_phase_sweep(cfg, workers=args.workers, out_dir=args.out)
    for model in cfg.models:
        print(f"{model}: {len(grid.benign_cells(model))} of {grid.test_acc[model].size} cells at >= 0.95")
    plot(grid, cfg, args.out / "phase.png")


if __name__ == "__main__":
    main()
