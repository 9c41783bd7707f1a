"""Command-line front end.

Configuration files are flat ``key = value`` lines with ``#`` comments.
Command-line flags override the file, which overrides the defaults.  Every
run writes ``manifest.txt`` into ``--out``; its key/value section is itself
a valid config file that reproduces the run.

Exit status: 0 success, 1 numerical or acceptance failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, TrainingDiverged
from .experiments import DESK_NS, DESK_SNRS, DYNAMICS_FILES, FULL_NS, FULL_SNRS, SweepConfig, run_dynamics, run_phase_sweep, write_sweep_outputs
from .models import ModelConfig, init_scale_bound
from .snm_sbm import DataConfig, build_dataset, dump_dataset
from .theory_checks import phase_condition, run_all_checks
from .trainer import TrainConfig, gradient_check, initial_params

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
GRADCHECK_TOL = 1e-4


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    type: object
    default: object
    help: str
    check: object = None      # predicate on the parsed value
    constraint: str = ""


KEYS: dict[str, Key] = {
    # data
    "n": Key(int, 250, "training nodes", lambda v: v >= 2, "n >= 2"),
    "d": Key(int, 500, "patch dimension", lambda v: v >= 1, "d >= 1"),
    "snr": Key(float, 0.05, "signal-to-noise ratio ||mu|| / (sigma_p sqrt(d))", lambda v: v > 0, "snr > 0"),
    "sigma_p": Key(float, 20.0, "noise standard deviation", lambda v: v > 0, "sigma_p > 0"),
    "p": Key(float, 0.5, "same-class edge probability", lambda v: 0 <= v <= 1, "0 <= p <= 1"),
    "s": Key(float, 0.08, "cross-class edge probability", lambda v: 0 <= v <= 1, "0 <= s <= 1"),
    "label_mode": Key(str, "balanced", "balanced | iid", lambda v: v in ("balanced", "iid"), "label_mode in {balanced, iid}"),
    "seed": Key(int, 0, "master seed"),
    "allow_heterophily": Key(_bool, False, "permit s > p"),
    # model
    "m": Key(int, 20, "neurons per output bank", lambda v: v >= 1, "m >= 1"),
    "q": Key(int, 3, "activation exponent", lambda v: v >= 2, "q >= 2"),
    "sigma_0": Key(float, 1e-3, "initialisation scale", lambda v: v > 0, "sigma_0 > 0"),
    "allow_q2": Key(_bool, False, "permit q = 2 (diagnostics)"),
    # training
    "eta": Key(float, 0.03, "learning rate", lambda v: v >= 0, "eta >= 0"),
    "epochs": Key(int, 100, "gradient steps for train", lambda v: v >= 1, "epochs >= 1"),
    "n_test": Key(int, 500, "Monte-Carlo test nodes", lambda v: v >= 1, "n_test >= 1"),
    "grad_check_every": Key(int, 0, "finite-difference check interval during train (0 = off)", lambda v: v >= 0, "grad_check_every >= 0"),
    # sweep
    "snr_values": Key(_float_list, DESK_SNRS, "comma-separated SNR axis", lambda v: len(v) > 0 and min(v) > 0, "nonempty, all > 0"),
    "n_values": Key(_int_list, DESK_NS, "comma-separated n axis", lambda v: len(v) > 0 and min(v) >= 2, "nonempty, all >= 2"),
    "models": Key(_str_list, ("cnn", "gcn"), "models to sweep", lambda v: len(v) > 0 and set(v) <= {"cnn", "gcn"}, "subset of {cnn, gcn}"),
    "repeats": Key(int, 3, "repeats per sweep cell", lambda v: v >= 1, "repeats >= 1"),
    "sweep_epochs": Key(int, 200, "gradient steps per sweep run", lambda v: v >= 1, "sweep_epochs >= 1"),
    "full_grid": Key(_bool, False, "use the extended n/SNR grid instead of the desk grid"),
    # checks
    "trials": Key(int, 20, "trials per lemma check", lambda v: v >= 1, "trials >= 1"),
    "delta": Key(float, 0.01, "failure probability in lemma bounds", lambda v: 0 < v < 1, "0 < delta < 1"),
}


def _parse_value(key: str, raw, where: str):
    spec = KEYS[key]
    try:
        value = spec.type(raw) if not isinstance(raw, (tuple, bool)) else raw
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}key {key!r}: cannot parse {raw!r} ({exc})") from None
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"{where}key {key!r} = {raw!r} violates constraint {spec.constraint}")
    return value


def parse_config(text: str = "", overrides: dict | None = None) -> dict:
    """Resolve a flat config: defaults < file ``text`` < ``overrides``."""
    resolved = {k: v.default for k, v in KEYS.items()}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        resolved[key] = _parse_value(key, raw, f"line {lineno}: ")
    for key, raw in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        resolved[key] = _parse_value(key, raw, "flag ")
    if resolved["s"] > resolved["p"] and not resolved["allow_heterophily"]:
        raise ConfigError(f"keys 's'/'p': s = {resolved['s']} exceeds p = {resolved['p']}; "
                          "constraint s <= p (set allow_heterophily = true to override)")
    if resolved["label_mode"] == "balanced" and resolved["n"] % 2:
        raise ConfigError(f"key 'n' = {resolved['n']}: balanced labels need even n")
    if resolved["q"] == 2 and not resolved["allow_q2"]:
        raise ConfigError("key 'q' = 2: constraint q > 2 unless allow_q2 = true")
    return resolved


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def data_config(c: dict) -> DataConfig:
    return DataConfig(n=c["n"], d=c["d"], snr=c["snr"], sigma_p=c["sigma_p"], p=c["p"], s=c["s"],
                      label_mode=c["label_mode"], seed=c["seed"], allow_heterophily=c["allow_heterophily"])


def model_config(c: dict) -> ModelConfig:
    return ModelConfig(m=c["m"], q=c["q"], sigma_0=c["sigma_0"], allow_q2=c["allow_q2"])


def train_config(c: dict) -> TrainConfig:
    return TrainConfig(eta=c["eta"], epochs=c["epochs"], n_test=c["n_test"], seed=c["seed"],
                       grad_check_every=c["grad_check_every"] or None)


def sweep_config(c: dict) -> SweepConfig:
    snrs, ns = (FULL_SNRS, FULL_NS) if c["full_grid"] else (c["snr_values"], c["n_values"])
    return SweepConfig(snr_values=snrs, n_values=ns, models=c["models"], d=c["d"], sigma_p=c["sigma_p"],
                       p=c["p"], s=c["s"], q=c["q"], eta=c["eta"], m=c["m"], sigma_0=c["sigma_0"],
                       epochs=c["sweep_epochs"], n_test=c["n_test"], repeats=c["repeats"], master_seed=c["seed"])


@dataclass
class RunManifest:
    command: str
    config: dict
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0
    version: str = __version__
    notes: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [
            "# benign-gcn run manifest",
            f"# version = {self.version}",
            f"# command = {self.command}",
            f"# master_seed = {self.config['seed']}",
            f"# duration_s = {self.duration_s:.3f}",
        ]
        lines += [f"# output = {name}" for name in self.outputs]
        lines += [f"# {note}" for note in self.notes]
        lines += [f"{k} = {format_value(v)}" for k, v in self.config.items()]
        return "\n".join(lines) + "\n"


# --- subcommands ----------------------------------------------------------

def cmd_generate(c, out: Path, args):
    ds = build_dataset(data_config(c))
    (out / "dataset.txt").write_text(dump_dataset(ds))
    print(f"wrote dataset.txt (n={ds.n}, d={ds.d}, edges={int(ds.A.sum() // 2)})")
    return EXIT_OK, ["dataset.txt"], []


def cmd_train(c, out: Path, args):
    mc, tc = model_config(c), train_config(c)
    dc = data_config(c)
    records = run_dynamics(dc, mc, tc, out_dir=out)
    for kind, rec in records.items():
        f = rec.final
        print(f"{kind}: train_loss={f.train_loss:.4g} train_acc={f.train_acc:.4g} test_loss={f.test_loss:.4g} "
              f"test_acc={f.test_acc:.4g} max_gamma=({f.max_gamma_plus:.4g}, {f.max_gamma_minus:.4g}) "
              f"max_abs_rho={f.max_abs_rho:.4g} recon_residual={max(m.recon_residual for m in rec.metrics):.3g}")
    notes = [f"sigma_0 bound (constants = 1) = {init_scale_bound(dc, mc):.4g}"]
    return EXIT_OK, list(DYNAMICS_FILES), notes


def cmd_sweep(c, out: Path, args):
    cfg = sweep_config(c)
    grid = run_phase_sweep(cfg, workers=args.workers)
    files = write_sweep_outputs(grid, out)
    for model in cfg.models:
        print(f"{model}: cells with mean test acc >= 0.95: {len(grid.benign_cells(model))}/{grid.test_acc[model].size}")
    notes = ["axes n_values = " + format_value(tuple(cfg.n_values)),
             "axes snr_values = " + format_value(tuple(cfg.snr_values))]
    return EXIT_OK, files, notes


def cmd_verify(c, out: Path, args):
    reports = run_all_checks(seed=c["seed"], trials=c["trials"], delta=c["delta"], m=c["m"], sigma_0=c["sigma_0"])
    failed = False
    lines = []
    for r in reports:
        lines.append(r.line())
        failed |= r.required and not r.ok
    text = "\n".join(lines) + "\n"
    print(text, end="")
    (out / "lemma_checks.txt").write_text(text)
    return (EXIT_FAIL if failed else EXIT_OK), ["lemma_checks.txt"], []


def cmd_phase(c, out: Path, args):
    v = phase_condition(c["n"], c["snr"], c["p"], c["s"], c["q"])
    print(f"n={v.n} snr={v.snr:g} p={v.p:g} s={v.s:g} q={v.q}")
    print(f"cnn_score {v.cnn_score:.6g} {'benign' if v.cnn_benign else 'harmful'}")
    print(f"gcn_score {v.gcn_score:.6g} {'benign' if v.gcn_benign else 'harmful'}")
    return EXIT_OK, [], []


def cmd_gradcheck(c, out: Path, args):
    ds = build_dataset(data_config(c))
    params = initial_params(ds, model_config(c), c["seed"])
    worst = 0.0
    for kind in ("cnn", "gcn"):
        err = gradient_check(params, ds, kind, n_coords=100, rng=np.random.default_rng(c["seed"]))
        print(f"{kind}: max relative error {err:.3e}")
        worst = max(worst, err)
    print(f"max relative error {worst:.3e} (tolerance {GRADCHECK_TOL:g})")
    return (EXIT_OK if worst <= GRADCHECK_TOL else EXIT_FAIL), [], []


COMMANDS = {
    "generate": (cmd_generate, "draw one SNM-SBM dataset and dump it as text"),
    "train": (cmd_train, "train CNN and GCN on one dataset, write dynamics CSVs"),
    "sweep": (cmd_sweep, "run the SNR x n phase sweep, write sweep CSV and heatmaps"),
    "verify-lemmas": (cmd_verify, "Monte-Carlo checks of the concentration bounds"),
    "phase": (cmd_phase, "print the CNN/GCN phase scores for one setting"),
    "gradcheck": (cmd_gradcheck, "compare analytic gradients with finite differences"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benign-gcn", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--workers", type=int, default=1, help="parallel workers for sweep (default: 1)")
        p.add_argument("-v", "--verbose", action="store_true")
        for key, spec in KEYS.items():
            flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
            p.add_argument(*flags, dest=f"cfg_{key}", default=None, metavar="V",
                           help=f"{spec.help} (default: {format_value(spec.default)})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    try:
        text = args.config.read_text() if args.config else ""
        config = parse_config(text, overrides)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    handler, _ = COMMANDS[args.command]
    start = time.perf_counter()
    try:
        status, files, notes = handler(config, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        status, files, notes = EXIT_FAIL, [], [str(exc)]
    manifest = RunManifest(args.command, config, files, time.perf_counter() - start, notes=notes)
    (out / "manifest.txt").write_text(manifest.render())
    return status


if __name__ == "__main__":
    sys.exit(main())
