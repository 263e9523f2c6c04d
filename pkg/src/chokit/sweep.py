"""Protocol orchestration: dataset provisioning, grid search, subset sweeps.

A sweep evaluates each configured method on nested training subsets with a
train/validate/test discipline:

1. channels are fit on the training subset only (the subset also supplies
   the empirical signal estimate),
2. hyperparameters are selected by empirical AUC on the validation split,
   with ties broken toward fewer channels (observers calibrated on the
   subset alone during this search),
3. the final observer is recalibrated on the pooled subset + validation
   images and scored once on the held-out test split.

Cells are independent (method, subset, restart) jobs.  Every random draw
derives from the config seed, so rerunning a sweep reproduces the results
table bit-for-bit regardless of worker count.  Per-cell wall time is kept
out of the results table (see ``timings.csv``) for that reason.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import (
    AeHyperparams,
    ChannelMatrix,
    PretrainConfig,
    conv_lg_channels,
    lg_channels,
    matched_filter,
    pls_channels,
    train_ae_channels,
)
from .config import CHANNEL_METHODS, ExperimentConfig, config_from_dict, config_hash, config_to_dict
from .datasets import LabeledDataset, combine, load_dataset, read_manifest, save_dataset, write_manifest
from .errors import ChokitError, ConfigError
from .evaluation import empirical_auc, summarize_scores
from .imaging import SignalEstimate, estimate_signal, generate_dataset, noiseless_backgrounds
from .observers import ObserverModel, build_cho, build_ho_cmd, build_ho_direct, score
from .rng import derive_seed, substream

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "method",
    "subset_pairs",
    "restart",
    "params",
    "validation_auc",
    "test_auc_empirical",
    "test_auc_binormal",
    "test_auc_se",
    "test_snr",
    "degenerate",
    "status",
    "detail",
)

BACKGROUNDS_FILE = "backgrounds_trainval.npy"


@dataclass
class SweepResult:
    rows: list[dict]
    results_path: Path
    config_hash: str


# ---------------------------------------------------------------------------
# Dataset provisioning
# ---------------------------------------------------------------------------

def ensure_datasets(config: ExperimentConfig, data_dir: str | Path) -> Path:
    """Generate the three splits (and noiseless backgrounds if needed) into
    ``data_dir`` unless files matching this config already exist."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = data_dir / "manifest.txt"
    digest = config_hash(config)
    split_sizes = {
        "train": config.train_pairs,
        "validation": config.validation_pairs,
        "test": config.test_pairs,
    }
    if manifest_path.exists():
        manifest = read_manifest(manifest_path)
        if manifest.get("config_hash") != digest:
            raise ConfigError(
                f"{data_dir} holds data for a different configuration "
                f"(hash {manifest.get('config_hash')!r} != {digest!r}); use a fresh directory"
            )
    else:
        for split, pairs in split_sizes.items():
            log.info("generating %s split: %d pairs", split, pairs)
            dataset = generate_dataset(
                pairs,
                config.lumpy,
                config.signal,
                config.collimator,
                config.noise,
                config.seed,
                config.side,
                split=split,
                signal_domain=config.signal_domain,
            )
            save_dataset(dataset, data_dir / f"{split}.chods")
        entries = dict(config_to_dict(config))
        entries["config_hash"] = digest
        entries["files"] = " ".join(f"{s}.chods" for s in split_sizes)
        write_manifest(manifest_path, entries)

    if "ho_cmd" in config.methods and not (data_dir / BACKGROUNDS_FILE).exists():
        log.info("generating noiseless train+validation backgrounds")
        train_bg = noiseless_backgrounds(
            2 * config.train_pairs, config.lumpy, config.collimator, config.seed, config.side, split="train"
        )
        val_bg = noiseless_backgrounds(
            2 * config.validation_pairs,
            config.lumpy,
            config.collimator,
            config.seed,
            config.side,
            split="validation",
        )
        _atomic_write_bytes(data_dir / BACKGROUNDS_FILE, _npy_bytes(np.concatenate([train_bg, val_bg])))
    return data_dir


def subset_pair_order(config: ExperimentConfig) -> np.ndarray:
    """Seed-shuffled pair order; subsets take leading slices, so they nest."""
    rng = substream(config.seed, "subset-shuffle")
    return rng.permutation(config.train_pairs)


# ---------------------------------------------------------------------------
# Grid search per method
# ---------------------------------------------------------------------------

def _params_string(params: dict) -> str:
    parts = []
    for key in ("m", "lr", "width"):
        if key in params:
            parts.append(f"{key}={params[key]!r}" if isinstance(params[key], float) else f"{key}={params[key]}")
    return ";".join(parts)


def _channel_candidates(
    method: str,
    config: ExperimentConfig,
    subset: LabeledDataset,
    delta: SignalEstimate,
    restart: int,
):
    """Yield (params, ChannelMatrix) candidates in deterministic order with
    channel counts ascending (tie-break toward smaller m)."""
    counts = sorted(set(config.grids.channel_counts))
    if method in ("ae_task", "ae_traditional"):
        loss_kind = "task_specific" if method == "ae_task" else "traditional"
        ae = config.grids.ae
        for lr in ae.learning_rates:
            for m in counts:
                hp = AeHyperparams(
                    m=m,
                    learning_rate=lr,
                    epochs=ae.epochs,
                    minibatch_size=ae.minibatch_size,
                    init_std=ae.init_std,
                    loss_kind=loss_kind,
                    seed=derive_seed(config.seed, "ae", method, subset.n_pairs, restart, counts.index(m), ae.learning_rates.index(lr)),
                    pretrain=PretrainConfig(enabled=ae.pretrain),
                    center=ae.center,
                )
                yield {"m": m, "lr": lr}, train_ae_channels(subset, delta, hp)
    elif method == "pls":
        full = pls_channels(subset, max(counts))
        for m in counts:
            if m <= full.m:
                yield {"m": m}, full.head(m)
    elif method == "lg":
        for width in config.grids.lg_widths:
            full = lg_channels(max(counts), width, config.side, center=config.signal.center)
            for m in counts:
                yield {"m": m, "width": width}, full.head(m)
    elif method == "conv_lg":
        for width in config.grids.lg_widths:
            base = lg_channels(max(counts), width, config.side, center=config.signal.center)
            full = conv_lg_channels(base, delta)
            for m in counts:
                yield {"m": m, "width": width}, full.head(m)
    elif method == "matched_filter":
        yield {"m": 1}, matched_filter(delta)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"{method} is not a channel method")


def _validation_auc(model: ObserverModel, validation: LabeledDataset) -> float:
    scores = score(model, validation.images)
    return empirical_auc(scores[validation.labels == 1], scores[validation.labels == 0])


def run_cell(
    config: ExperimentConfig, data_dir: Path, method: str, subset_pairs: int, restart: int
) -> tuple[dict, float, list[str]]:
    """Execute one sweep cell; returns (row, wall_seconds, audit_events)."""
    started = time.perf_counter()
    events: list[str] = []
    row = {
        "method": method,
        "subset_pairs": str(subset_pairs),
        "restart": str(restart),
        "params": "",
        "validation_auc": "",
        "test_auc_empirical": "",
        "test_auc_binormal": "",
        "test_auc_se": "",
        "test_snr": "",
        "degenerate": "",
        "status": "ok",
        "detail": "",
    }
    try:
        train_full = load_dataset(data_dir / "train.chods", split="train")
        events.append("open train")
        validation = load_dataset(data_dir / "validation.chods", split="validation")
        events.append("open validation")
        order = subset_pair_order(config)
        subset = train_full.take_pairs(order[:subset_pairs])
        delta = estimate_signal(subset)

        if method in CHANNEL_METHODS:
            best: tuple[float, dict, ChannelMatrix] | None = None
            for params, channels in _channel_candidates(method, config, subset, delta, restart):
                search_model = build_cho(channels, subset)
                val_auc = _validation_auc(search_model, validation)
                events.append(f"grid {_params_string(params)} validation_auc={val_auc!r}")
                if best is None or val_auc > best[0]:
                    best = (val_auc, params, channels)
            assert best is not None
            val_auc, params, channels = best
            events.append(f"selected {_params_string(params)}")
            final_model = build_cho(channels, combine(subset, validation))
        elif method == "ho_direct":
            search_model = build_ho_direct(subset)
            val_auc = _validation_auc(search_model, validation)
            params = {}
            final_model = build_ho_direct(combine(subset, validation))
            events.append("built ho_direct")
        elif method == "ho_cmd":
            backgrounds = np.load(data_dir / BACKGROUNDS_FILE)
            events.append("open backgrounds")
            delta_tv = estimate_signal(combine(train_full, validation))
            final_model = build_ho_cmd(backgrounds, delta_tv, config.noise)
            val_auc = _validation_auc(final_model, validation)
            params = {}
            events.append("built ho_cmd")
        else:  # pragma: no cover
            raise ConfigError(f"unknown method {method!r}")

        test = load_dataset(data_dir / "test.chods", split="test")
        events.append("open test")
        test_scores = score(final_model, test.images)
        summary = summarize_scores(
            test_scores[test.labels == 1],
            test_scores[test.labels == 0],
            n_bootstrap=config.grids.bootstrap,
            rng=derive_seed(config.seed, "bootstrap", method, subset_pairs, restart),
        )
        row.update(
            params=_params_string(params),
            validation_auc=repr(float(val_auc)),
            test_auc_empirical=repr(summary.auc_empirical),
            test_auc_binormal=repr(summary.auc_binormal),
            test_auc_se=repr(summary.auc_std_error),
            test_snr=repr(summary.snr),
            degenerate="1" if final_model.degenerate else "0",
        )
    except (ChokitError, ValueError, np.linalg.LinAlgError, FileNotFoundError) as exc:
        row.update(status="error", detail=f"{type(exc).__name__}: {exc}")
        events.append(f"error {type(exc).__name__}")
    return row, time.perf_counter() - started, events


def _cell_worker(args: tuple) -> tuple[dict, float, list[str]]:
    config_dict, data_dir, method, subset_pairs, restart = args
    config = config_from_dict(config_dict)
    return run_cell(config, Path(data_dir), method, subset_pairs, restart)


# ---------------------------------------------------------------------------
# Result persistence
# ---------------------------------------------------------------------------

def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, array)
    return buf.getvalue()


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _rows_to_csv(rows: list[dict], digest: str) -> str:
    buf = io.StringIO()
    buf.write("# chokit-results-v1\n")
    buf.write(f"# config_hash = {digest}\n")
    writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _row_key(row: dict) -> tuple:
    return (row["method"], int(row["subset_pairs"]), int(row["restart"]))


def run_sweep(config: ExperimentConfig, out_dir: str | Path, threads: int = 1) -> SweepResult:
    """Run the full method x subset (x restart) sweep.

    Artifacts in ``out_dir``: ``data/`` (splits), ``results.csv`` (the
    deterministic table), ``timings.csv`` (wall time per cell),
    ``journal-<hash>.csv`` (completed cells, enables resume), ``audit.log``
    (per-cell file access order).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    data_dir = ensure_datasets(config, out_dir / "data")

    cells = []
    for method in config.methods:
        restarts = config.grids.ae.restarts if method in ("ae_task", "ae_traditional") else 1
        for subset_pairs in config.subset_sizes:
            for restart in range(restarts):
                cells.append((method, int(subset_pairs), restart))

    journal_path = out_dir / f"journal-{digest[:12]}.csv"
    done: dict[tuple, dict] = {}
    if journal_path.exists():
        for row in read_results(journal_path):
            done[_row_key(row)] = row
        log.info("resuming sweep: %d of %d cells already complete", len(done), len(cells))

    pending = [cell for cell in cells if cell not in done]
    timings: list[tuple[tuple, float]] = []
    audit_path = out_dir / "audit.log"

    def record(cell: tuple, row: dict, seconds: float, events: list[str]) -> None:
        done[cell] = row
        timings.append((cell, seconds))
        with open(journal_path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
            if fh.tell() == 0:
                writer.writeheader()
            writer.writerow(row)
        with open(audit_path, "a") as fh:
            label = f"{cell[0]} subset={cell[1]} restart={cell[2]}"
            for event in events:
                fh.write(f"{label}: {event}\n")

    if threads <= 1:
        for cell in pending:
            row, seconds, events = run_cell(config, data_dir, *cell)
            record(cell, row, seconds, events)
    else:
        config_dict = config_to_dict(config)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            jobs = {
                cell: pool.submit(_cell_worker, (config_dict, str(data_dir), *cell))
                for cell in pending
            }
            for cell, job in jobs.items():
                row, seconds, events = job.result()
                record(cell, row, seconds, events)

    rows = [done[cell] for cell in sorted(done, key=lambda c: (c[0], c[1], c[2]))]
    results_path = out_dir / "results.csv"
    _atomic_write_text(results_path, _rows_to_csv(rows, digest))

    timing_lines = ["method,subset_pairs,restart,wall_seconds"]
    for cell, seconds in sorted(timings):
        timing_lines.append(f"{cell[0]},{cell[1]},{cell[2]},{seconds:.3f}")
    _atomic_write_text(out_dir / "timings.csv", "\n".join(timing_lines) + "\n")

    return SweepResult(rows=rows, results_path=results_path, config_hash=digest)
