"""chokit: binary signal detection studies with channelized Hotelling observers.

Simulates lumpy-background phantoms imaged through an idealized collimator,
learns channel matrices (tied-weight linear autoencoder, PLS, Laguerre-Gauss,
convolutional Laguerre-Gauss, matched filter), builds linear observers, and
evaluates detection performance (AUC / ROC / SNR) under a reproducible
train-validate-test sweep protocol.
"""

from .channels import (
    AeHyperparams,
    ChannelMatrix,
    PretrainConfig,
    channel_cosine_similarity,
    conv_lg_channels,
    lg_channels,
    load_channels,
    matched_filter,
    pls_channels,
    save_channels,
    train_ae_channels,
)
from .config import ExperimentConfig, config_hash, load_config
from .datasets import LabeledDataset, combine, load_dataset, load_external_dataset, save_dataset
from .errors import (
    ChokitError,
    ConfigError,
    DatasetError,
    DatasetFormatError,
    DimensionMismatchError,
    LabelImbalanceError,
    TrainingDivergedError,
    UnreadableImageError,
)
from .evaluation import (
    RocSummary,
    binormal_auc,
    empirical_auc,
    roc_curve,
    snr_t,
    summarize_scores,
)
from .imaging import (
    CollimatorParams,
    NoiseParams,
    SignalEstimate,
    estimate_signal,
    generate_dataset,
    measure,
    noiseless_backgrounds,
    oracle_signal_estimate,
    project_blob,
)
from .objects import (
    GaussianBlob,
    LumpyParams,
    SignalParams,
    rasterize_blob,
    sample_lumpy_background,
    sample_signal,
)
from .observers import (
    ObserverModel,
    build_cho,
    build_ho_cmd,
    build_ho_direct,
    hotelling_template,
    load_observer,
    save_observer,
    score,
)
from .rng import derive_seed, substream
from .sweep import SweepResult, ensure_datasets, run_sweep

__version__ = "0.1.0"

__all__ = [
    "AeHyperparams",
    "ChannelMatrix",
    "ChokitError",
    "CollimatorParams",
    "ConfigError",
    "DatasetError",
    "DatasetFormatError",
    "DimensionMismatchError",
    "ExperimentConfig",
    "GaussianBlob",
    "LabelImbalanceError",
    "LabeledDataset",
    "LumpyParams",
    "NoiseParams",
    "ObserverModel",
    "PretrainConfig",
    "RocSummary",
    "SignalEstimate",
    "SignalParams",
    "SweepResult",
    "TrainingDivergedError",
    "UnreadableImageError",
    "binormal_auc",
    "build_cho",
    "build_ho_cmd",
    "build_ho_direct",
    "channel_cosine_similarity",
    "combine",
    "config_hash",
    "conv_lg_channels",
    "derive_seed",
    "empirical_auc",
    "ensure_datasets",
    "estimate_signal",
    "generate_dataset",
    "hotelling_template",
    "lg_channels",
    "load_channels",
    "load_config",
    "load_dataset",
    "load_external_dataset",
    "load_observer",
    "matched_filter",
    "measure",
    "noiseless_backgrounds",
    "oracle_signal_estimate",
    "pls_channels",
    "project_blob",
    "rasterize_blob",
    "roc_curve",
    "run_sweep",
    "sample_lumpy_background",
    "sample_signal",
    "save_channels",
    "save_dataset",
    "save_observer",
    "score",
    "snr_t",
    "substream",
    "summarize_scores",
    "train_ae_channels",
]
