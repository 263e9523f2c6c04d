"""Command-line interface.

Subcommands::

    chokit generate --config cfg.json --out DIR
    chokit train    --config cfg.json --data DIR --method pls --out channels.chocm
    chokit eval     --model file.chocm|file.choobs --data DIR [--split test] --out summary.txt
    chokit sweep    --config cfg.json --out DIR [--threads N]
    chokit export   channels|results --in FILE --out DIR

Exit codes: 0 success, 2 usage error, 3 malformed config, 4 missing file,
5 dataset/dimension error, 1 any other failure.  Diagnostics go to stderr.
The environment variable ``CHOKIT_OUTPUT_ROOT``, when set, anchors relative
``--out`` paths.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import channels as channels_mod
from . import observers as observers_mod
from .config import CHANNEL_METHODS, load_config
from .datasets import combine, load_dataset
from .errors import ConfigError, DatasetError
from .evaluation import summarize_scores, write_summary
from .imaging import estimate_signal
from .rng import derive_seed
from .sweep import ensure_datasets, read_results, run_sweep

log = logging.getLogger("chokit")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_DATA = 5
EXIT_FAILURE = 1


def _resolve_out(path: str) -> Path:
    root = os.environ.get("CHOKIT_OUTPUT_ROOT")
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _apply_seed_override(config, seed: int | None):
    if seed is None:
        return config
    from dataclasses import replace

    return replace(config, seed=seed)


def _cmd_generate(args) -> int:
    config = _apply_seed_override(load_config(args.config), args.seed)
    out = _resolve_out(args.out)
    ensure_datasets(config, out)
    print(f"datasets written to {out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _apply_seed_override(load_config(args.config), args.seed)
    if args.method not in CHANNEL_METHODS:
        raise ConfigError(f"'train' supports channel methods only, got {args.method!r}")
    data_dir = _resolve_out(args.data)
    train = load_dataset(Path(data_dir) / "train.chods", split="train")
    delta = estimate_signal(train)
    m = args.m or max(config.grids.channel_counts)
    if args.method in ("ae_task", "ae_traditional"):
        ae = config.grids.ae
        hp = channels_mod.AeHyperparams(
            m=m,
            learning_rate=args.learning_rate or ae.learning_rates[0],
            epochs=ae.epochs,
            minibatch_size=ae.minibatch_size,
            init_std=ae.init_std,
            loss_kind="task_specific" if args.method == "ae_task" else "traditional",
            seed=derive_seed(config.seed, "cli-train", args.method),
            pretrain=channels_mod.PretrainConfig(enabled=ae.pretrain),
            center=ae.center,
        )
        result = channels_mod.train_ae_channels(train, delta, hp)
    elif args.method == "pls":
        result = channels_mod.pls_channels(train, m)
    elif args.method == "lg":
        width = args.width or config.grids.lg_widths[0]
        result = channels_mod.lg_channels(m, width, config.side, center=config.signal.center)
    elif args.method == "conv_lg":
        width = args.width or config.grids.lg_widths[0]
        base = channels_mod.lg_channels(m, width, config.side, center=config.signal.center)
        result = channels_mod.conv_lg_channels(base, delta)
    else:  # matched_filter
        result = channels_mod.matched_filter(delta)
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    channels_mod.save_channels(result, out)
    channels_mod.save_channels_text(result, out.with_suffix(".txt"))
    print(f"{result.method} channels ({result.m} x {result.side}^2) written to {out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    data_dir = _resolve_out(args.data)
    test = load_dataset(Path(data_dir) / f"{args.split}.chods", split=args.split)
    model_path = Path(args.model)
    if not model_path.exists():
        raise FileNotFoundError(model_path)
    if model_path.suffix == ".choobs":
        model = observers_mod.load_observer(model_path)
    else:
        cm = channels_mod.load_channels(model_path)
        train = load_dataset(Path(data_dir) / "train.chods", split="train")
        validation = load_dataset(Path(data_dir) / "validation.chods", split="validation")
        model = observers_mod.build_cho(cm, combine(train, validation))
    scores = observers_mod.score(model, test.images)
    summary = summarize_scores(
        scores[test.labels == 1],
        scores[test.labels == 0],
        rng=args.seed if args.seed is not None else 0,
    )
    print(
        f"{model.method}: auc_empirical={summary.auc_empirical:.5f} "
        f"auc_binormal={summary.auc_binormal:.5f} (se {summary.auc_std_error:.5f}) "
        f"snr={summary.snr:.4f}"
    )
    if args.out:
        out = _resolve_out(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_summary(summary, out, roc_path=out.with_suffix(".roc.txt"))
        print(f"summary written to {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _apply_seed_override(load_config(args.config), args.seed)
    out = _resolve_out(args.out)
    result = run_sweep(config, out, threads=args.threads)
    n_err = sum(1 for row in result.rows if row["status"] != "ok")
    # Per-cell failures are recorded in the table, not fatal to the sweep.
    print(f"sweep complete: {len(result.rows)} cells ({n_err} errors) -> {result.results_path}")
    return EXIT_OK


def _cmd_export(args) -> int:
    out = _resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    src = Path(getattr(args, "in"))
    if not src.exists():
        raise FileNotFoundError(src)
    if args.kind == "channels":
        cm = channels_mod.load_channels(src)
        paths = channels_mod.export_channel_images(cm, out)
        print(f"wrote {len(paths)} channel images to {out}")
        return EXIT_OK
    rows = [row for row in read_results(src) if row["status"] == "ok"]
    methods = sorted({row["method"] for row in rows})
    for method in methods:
        by_subset: dict[int, list[float]] = {}
        for row in rows:
            if row["method"] == method:
                by_subset.setdefault(int(row["subset_pairs"]), []).append(float(row["test_auc_binormal"]))
        lines = ["subset_pairs median_auc_binormal restart_std n_restarts"]
        for subset in sorted(by_subset):
            values = np.array(by_subset[subset])
            spread = values.std(ddof=1) if len(values) > 1 else 0.0
            lines.append(f"{subset} {np.median(values)!r} {spread!r} {len(values)}")
        (out / f"auc_vs_subset_{method}.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote AUC tables for {len(methods)} methods to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chokit", description="model-observer simulation toolkit")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate dataset splits from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="fit channels for one method on the train split")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--width", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score stored channels/observer on a split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="run the full subset sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("export", help="export plot-ready text artifacts")
    p.add_argument("kind", choices=("channels", "results"))
    p.add_argument("--in", required=True, dest="in")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
