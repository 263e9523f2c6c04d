"""Experiment configuration: JSON schema, validation, canonical hashing.

A config file is a single JSON object.  Example::

    {
      "task": "location_known",
      "side": 64,
      "seed": 20260809,
      "lumpy": {"mean_lump_count": 5.0, "lump_amplitude": 1.0, "lump_width": 7.0},
      "signal": {"amplitude": 0.2, "center": [32, 32],
                 "sigma_x": 5.0, "sigma_y": 1.5,
                 "orientations_deg": [0.0]},
      "collimator": {"height": 40.0, "width": 0.5},
      "noise_std": 20.0,
      "signal_domain": "measured",
      "train_pairs": 30000, "validation_pairs": 5000, "test_pairs": 5000,
      "subset_sizes": [250, 500, 1000],
      "methods": ["ae_task", "pls", "lg", "conv_lg", "matched_filter"],
      "grids": {
        "channel_counts": [5, 10, 15, 20],
        "lg_widths": [10, 15, 20, 25, 30],
        "ae": {"learning_rates": [1e-5], "epochs": 500, "minibatch_size": 250,
               "init_std": 5e-6, "restarts": 1, "pretrain": false, "center": false},
        "bootstrap": 200
      }
    }

The SKS task sets ``"task": "sks"`` and lists several orientations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .imaging import CollimatorParams, NoiseParams
from .objects import LumpyParams, SignalParams

METHODS = ("ae_task", "ae_traditional", "pls", "lg", "conv_lg", "matched_filter", "ho_direct", "ho_cmd")
CHANNEL_METHODS = ("ae_task", "ae_traditional", "pls", "lg", "conv_lg", "matched_filter")


@dataclass(frozen=True)
class AeGrid:
    learning_rates: tuple[float, ...] = (1e-5,)
    epochs: int = 500
    minibatch_size: int = 250
    init_std: float = 5e-6
    restarts: int = 5
    pretrain: bool = False
    center: bool = False


@dataclass(frozen=True)
class Grids:
    channel_counts: tuple[int, ...] = (5, 10, 15, 20)
    lg_widths: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0)
    ae: AeGrid = field(default_factory=AeGrid)
    bootstrap: int = 200


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    side: int
    seed: int
    lumpy: LumpyParams
    signal: SignalParams
    collimator: CollimatorParams
    noise: NoiseParams
    train_pairs: int
    validation_pairs: int
    test_pairs: int
    subset_sizes: tuple[int, ...]
    methods: tuple[str, ...]
    grids: Grids = field(default_factory=Grids)
    signal_domain: str = "measured"

    def __post_init__(self):
        if self.task not in ("location_known", "sks"):
            raise ConfigError(f"unknown task {self.task!r}")
        if not self.methods:
            raise ConfigError("at least one method is required")
        for name in self.methods:
            if name not in METHODS:
                raise ConfigError(f"unknown method {name!r}")
        if min(self.train_pairs, self.validation_pairs, self.test_pairs) < 1:
            raise ConfigError("all split sizes must be >= 1")
        if not self.subset_sizes:
            raise ConfigError("subset_sizes must be non-empty")
        if max(self.subset_sizes) > self.train_pairs:
            raise ConfigError("subset sizes cannot exceed available training pairs")
        if any(k < 1 for k in self.subset_sizes):
            raise ConfigError("subset sizes must be >= 1")
        if max(self.grids.channel_counts) < 1:
            raise ConfigError("channel_counts must be positive")


def _signal_from_dict(raw: dict, task: str, side: int) -> SignalParams:
    angles = tuple(float(a) for a in raw.get("orientations_deg", [0.0]))
    mode = "fixed" if task == "location_known" else "uniform"
    if mode == "fixed" and len(angles) != 1:
        raise ConfigError("location_known task requires exactly one orientation")
    center = raw.get("center", [side // 2, side // 2])
    return SignalParams(
        amplitude=float(raw["amplitude"]),
        center=(float(center[0]), float(center[1])),
        sigma_x=float(raw["sigma_x"]),
        sigma_y=float(raw["sigma_y"]),
        orientation_set=angles,
        orientation_mode=mode,
    )


def config_from_dict(raw: dict) -> ExperimentConfig:
    try:
        task = raw["task"]
        side = int(raw["side"])
        lumpy_raw = raw["lumpy"]
        grids_raw = raw.get("grids", {})
        ae_raw = grids_raw.get("ae", {})
        ae = AeGrid(
            learning_rates=tuple(float(v) for v in ae_raw.get("learning_rates", [1e-5])),
            epochs=int(ae_raw.get("epochs", 500)),
            minibatch_size=int(ae_raw.get("minibatch_size", 250)),
            init_std=float(ae_raw.get("init_std", 5e-6)),
            restarts=int(ae_raw.get("restarts", 5)),
            pretrain=bool(ae_raw.get("pretrain", False)),
            center=bool(ae_raw.get("center", False)),
        )
        grids = Grids(
            channel_counts=tuple(int(v) for v in grids_raw.get("channel_counts", [5, 10, 15, 20])),
            lg_widths=tuple(float(v) for v in grids_raw.get("lg_widths", [10, 15, 20, 25, 30])),
            ae=ae,
            bootstrap=int(grids_raw.get("bootstrap", 200)),
        )
        return ExperimentConfig(
            task=task,
            side=side,
            seed=int(raw["seed"]),
            lumpy=LumpyParams(
                mean_lump_count=float(lumpy_raw["mean_lump_count"]),
                lump_amplitude=float(lumpy_raw["lump_amplitude"]),
                lump_width=float(lumpy_raw["lump_width"]),
                field_extent=(side, side),
            ),
            signal=_signal_from_dict(raw["signal"], task, side),
            collimator=CollimatorParams(
                height=float(raw["collimator"]["height"]), width=float(raw["collimator"]["width"])
            ),
            noise=NoiseParams(std=float(raw["noise_std"])),
            train_pairs=int(raw["train_pairs"]),
            validation_pairs=int(raw["validation_pairs"]),
            test_pairs=int(raw["test_pairs"]),
            subset_sizes=tuple(int(v) for v in raw["subset_sizes"]),
            methods=tuple(raw["methods"]),
            grids=grids,
            signal_domain=raw.get("signal_domain", "measured"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw)


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "task": config.task,
        "side": config.side,
        "seed": config.seed,
        "lumpy": {
            "mean_lump_count": config.lumpy.mean_lump_count,
            "lump_amplitude": config.lumpy.lump_amplitude,
            "lump_width": config.lumpy.lump_width,
        },
        "signal": {
            "amplitude": config.signal.amplitude,
            "center": list(config.signal.center),
            "sigma_x": config.signal.sigma_x,
            "sigma_y": config.signal.sigma_y,
            "orientations_deg": list(config.signal.orientation_set),
        },
        "collimator": {"height": config.collimator.height, "width": config.collimator.width},
        "noise_std": config.noise.std,
        "signal_domain": config.signal_domain,
        "train_pairs": config.train_pairs,
        "validation_pairs": config.validation_pairs,
        "test_pairs": config.test_pairs,
        "subset_sizes": list(config.subset_sizes),
        "methods": list(config.methods),
        "grids": {
            "channel_counts": list(config.grids.channel_counts),
            "lg_widths": list(config.grids.lg_widths),
            "ae": {
                "learning_rates": list(config.grids.ae.learning_rates),
                "epochs": config.grids.ae.epochs,
                "minibatch_size": config.grids.ae.minibatch_size,
                "init_std": config.grids.ae.init_std,
                "restarts": config.grids.ae.restarts,
                "pretrain": config.grids.ae.pretrain,
                "center": config.grids.ae.center,
            },
            "bootstrap": config.grids.bootstrap,
        },
    }


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
