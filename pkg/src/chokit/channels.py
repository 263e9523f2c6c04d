"""Channel matrices for the channelized Hotelling observer.

Four learners/constructors all emit a :class:`ChannelMatrix` whose rows are
channels applied to flattened images:

* a tied-weight linear autoencoder trained by minibatch Adam, with either a
  signal-reconstruction ("task") or input-reconstruction ("traditional")
  objective,
* partial least squares (iterative deflation on centered data and labels),
* Laguerre-Gauss radial channels,
* Laguerre-Gauss channels convolved with the estimated signal,

plus the single-row matched filter.

Binary channel file (extension ``.chocm``), little-endian:

====== ====== =====================================================
offset size   contents
====== ====== =====================================================
0      8      magic ``b"CHOCM01\\0"``
8      16     method tag, NUL-padded ASCII
24     4      channel count m (uint32)
28     4      grid side (uint32)
32     --     m * side^2 float64, row-major
====== ====== =====================================================
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import eval_laguerre
from scipy.stats import truncnorm

from .datasets import LabeledDataset
from .errors import DatasetError, DatasetFormatError, TrainingDivergedError
from .imaging import SignalEstimate
from .rng import substream

log = logging.getLogger(__name__)

CHANNEL_MAGIC = b"CHOCM01\0"
_CM_HEADER = struct.Struct("<8s16sII")


@dataclass(frozen=True)
class ChannelMatrix:
    """``m x side^2`` matrix whose rows are channels."""

    matrix: np.ndarray
    method: str
    side: int

    def __post_init__(self):
        mat = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError("channel matrix must be 2-D (m, side^2)")
        if mat.shape[1] != self.side * self.side:
            raise ValueError(f"channel rows have {mat.shape[1]} pixels, expected {self.side * self.side}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("channel matrix contains non-finite entries")
        if np.any(np.all(mat == 0.0, axis=1)):
            raise ValueError("channel matrix contains an all-zero row")
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def head(self, m: int) -> "ChannelMatrix":
        """First ``m`` channels (channel constructions here are nested)."""
        if not 1 <= m <= self.m:
            raise ValueError(f"cannot take {m} of {self.m} channels")
        return ChannelMatrix(self.matrix[:m], self.method, self.side)


def channel_cosine_similarity(channels: ChannelMatrix) -> np.ndarray:
    """Pairwise cosine similarity of channel rows (redundancy diagnostic)."""
    rows = channels.matrix
    norms = np.linalg.norm(rows, axis=1)
    return (rows @ rows.T) / np.outer(norms, norms)


def save_channels(channels: ChannelMatrix, path: str | Path) -> None:
    method = channels.method.encode("ascii")
    if len(method) > 16:
        raise ValueError("method tag longer than 16 bytes")
    with open(path, "wb") as fh:
        fh.write(_CM_HEADER.pack(CHANNEL_MAGIC, method.ljust(16, b"\0"), channels.m, channels.side))
        fh.write(channels.matrix.astype("<f8", copy=False).tobytes())


def load_channels(path: str | Path) -> ChannelMatrix:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    raw = path.read_bytes()
    if len(raw) < _CM_HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, method, m, side = _CM_HEADER.unpack_from(raw)
    if magic != CHANNEL_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    expected = _CM_HEADER.size + m * side * side * 8
    if len(raw) != expected:
        raise DatasetFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    mat = np.frombuffer(raw, dtype="<f8", offset=_CM_HEADER.size).reshape(m, side * side)
    return ChannelMatrix(mat.copy(), method.rstrip(b"\0").decode("ascii"), side)


def save_channels_text(channels: ChannelMatrix, path: str | Path) -> None:
    """One channel row per line, space-separated, full double precision."""
    np.savetxt(path, channels.matrix, fmt="%.17e")


def export_channel_images(channels: ChannelMatrix, directory: str | Path) -> list[Path]:
    """Write each channel as a ``side x side`` text matrix for plotting."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(channels.m):
        out = directory / f"channel_{i:02d}.txt"
        np.savetxt(out, channels.matrix[i].reshape(channels.side, channels.side), fmt="%.17e")
        paths.append(out)
    return paths


# ---------------------------------------------------------------------------
# Tied-weight linear autoencoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PretrainConfig:
    """Optional burn-in phase on a small leading subset of the data."""

    enabled: bool = False
    subset_size: int = 500
    epochs: int = 500


@dataclass(frozen=True)
class AeHyperparams:
    m: int
    learning_rate: float
    epochs: int = 500
    minibatch_size: int = 250
    init_std: float = 5e-6
    loss_kind: str = "task_specific"  # or "traditional"
    seed: int = 0
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    center: bool = False

    def __post_init__(self):
        if self.m < 1 or self.epochs < 1:
            raise ValueError("m and epochs must be >= 1")
        if self.learning_rate <= 0 or self.init_std <= 0:
            raise ValueError("learning_rate and init_std must be > 0")
        if self.minibatch_size < 2 or self.minibatch_size % 2 != 0:
            raise ValueError("minibatch_size must be even and >= 2 (class-balanced batches)")
        if self.loss_kind not in ("task_specific", "traditional"):
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}")
        if self.pretrain.subset_size < 2 or self.pretrain.epochs < 1:
            raise ValueError("pretrain subset_size must be >= 2 and epochs >= 1")


def ae_loss_and_grad(w: np.ndarray, images: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared reconstruction loss of the tied-weight map and its gradient.

    ``w`` is ``(n, m)``; the reconstruction of image ``g`` is ``w w^T g``.
    Loss is ``mean_i || w w^T g_i - target_i ||^2``; the gradient follows from
    ``dL = (2/N) tr[R^T (G dW W^T + G W dW^T)]`` with residual ``R``.
    """
    n_samples = images.shape[0]
    z = images @ w
    residual = z @ w.T - targets
    loss = float((residual * residual).sum() / n_samples)
    grad = (2.0 / n_samples) * (images.T @ (residual @ w) + residual.T @ z)
    return loss, grad


_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def _balanced_batches(labels: np.ndarray, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    present = np.flatnonzero(labels == 1)
    absent = np.flatnonzero(labels == 0)
    if len(present) == 0 or len(absent) == 0:
        pool = rng.permutation(len(labels))
        return [pool[i : i + batch_size] for i in range(0, len(pool), batch_size)]
    half = batch_size // 2
    p = rng.permutation(present)
    a = rng.permutation(absent)
    k = min(len(p), len(a))
    return [np.concatenate([a[i : i + half], p[i : i + half]]) for i in range(0, k, half)]


def fit_linear_ae(
    images: np.ndarray,
    labels: np.ndarray,
    targets: np.ndarray,
    hp: AeHyperparams,
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[float]]:
    """Minibatch Adam on the tied-weight reconstruction loss.

    Returns the final ``(n, m)`` weight matrix and the per-epoch mean
    training loss.  Raises :class:`TrainingDivergedError` if the loss goes
    non-finite, reporting the epoch.
    """
    n_pixels = images.shape[1]
    w = truncnorm.rvs(-2.0, 2.0, scale=hp.init_std, size=(n_pixels, hp.m), random_state=rng)
    losses: list[float] = []

    phases = []
    if hp.pretrain.enabled and images.shape[0] > hp.pretrain.subset_size:
        sub = slice(0, hp.pretrain.subset_size)
        phases.append((images[sub], labels[sub], targets[sub], hp.pretrain.epochs))
    phases.append((images, labels, targets, hp.epochs))

    for phase_images, phase_labels, phase_targets, epochs in phases:
        moment1 = np.zeros_like(w)
        moment2 = np.zeros_like(w)
        step = 0
        for epoch in range(epochs):
            epoch_loss = 0.0
            epoch_count = 0
            for batch in _balanced_batches(phase_labels, hp.minibatch_size, rng):
                loss, grad = ae_loss_and_grad(w, phase_images[batch], phase_targets[batch])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(epoch, loss)
                step += 1
                moment1 = _ADAM_BETA1 * moment1 + (1 - _ADAM_BETA1) * grad
                moment2 = _ADAM_BETA2 * moment2 + (1 - _ADAM_BETA2) * grad * grad
                m_hat = moment1 / (1 - _ADAM_BETA1**step)
                v_hat = moment2 / (1 - _ADAM_BETA2**step)
                w = w - hp.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
                epoch_loss += loss * len(batch)
                epoch_count += len(batch)
            losses.append(epoch_loss / max(epoch_count, 1))
    return w, losses


def train_ae_channels(
    train: LabeledDataset, sig: SignalEstimate | None, hp: AeHyperparams
) -> ChannelMatrix:
    """Train tied-weight autoencoder channels; the encoder transpose is the
    channel matrix.

    The ``task_specific`` loss reconstructs ``label * delta_g_bar`` from each
    image (requires a non-zero signal estimate); ``traditional`` reconstructs
    the image itself.
    """
    if len(train) == 0:
        raise DatasetError("cannot train on an empty dataset")
    images = train.images
    if hp.center:
        images = images - images.mean(axis=0)
    if hp.loss_kind == "task_specific":
        if sig is None or np.linalg.norm(sig.delta_g_bar) == 0.0:
            raise ValueError("task-specific loss requires a non-zero signal estimate")
        targets = train.labels.astype(np.float64)[:, None] * sig.delta_g_bar[None, :]
        method = "ae_task"
    else:
        targets = images
        method = "ae_traditional"
    rng = substream(hp.seed, "ae-fit")
    w, _ = fit_linear_ae(images, train.labels, targets, hp, rng)
    return ChannelMatrix(w.T, method, train.side)


# ---------------------------------------------------------------------------
# Partial least squares
# ---------------------------------------------------------------------------

def pls_channels(train: LabeledDataset, m: int) -> ChannelMatrix:
    """Iterative PLS weight vectors on column-centered data and +-1 labels.

    Each round takes ``w_k = X_k^T y_k`` (unit-normalized), scores
    ``t_k = X_k w_k``, and deflates both the data and the labels by the score
    direction.  The rows of the result are the ``w_k``; extraction stops
    early (with a warning) if a score collapses.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    present, absent = train.present(), train.absent()
    if len(present) == 0 or len(absent) == 0:
        raise DatasetError("PLS needs both classes")
    x = train.images - train.images.mean(axis=0)
    if np.abs(x).max() == 0.0:
        raise ValueError("PLS rejected zero-variance data")
    y = np.where(train.labels == 1, 1.0, -1.0)
    y = y - y.mean()

    rows = []
    scale = None
    for k in range(m):
        w = x.T @ y
        norm_w = np.linalg.norm(w)
        if scale is None:
            scale = norm_w
            if scale == 0.0:
                raise ValueError("PLS rejected data with no label covariance")
        if norm_w <= 1e-12 * scale:
            log.warning("PLS stopped early at %d of %d channels (score collapsed)", k, m)
            break
        w = w / norm_w
        t = x @ w
        tt = float(t @ t)
        if tt <= 1e-24:
            log.warning("PLS stopped early at %d of %d channels (zero-norm score)", k, m)
            break
        p = x.T @ t / tt
        c = float(y @ t) / tt
        x = x - np.outer(t, p)
        y = y - c * t
        rows.append(w)
    return ChannelMatrix(np.array(rows), "pls", train.side)


# ---------------------------------------------------------------------------
# Laguerre-Gauss and convolutional Laguerre-Gauss
# ---------------------------------------------------------------------------

def lg_radial(order: int, radius, width: float):
    """Laguerre-Gauss radial profile ``(sqrt(2)/a) exp(-pi r^2/a^2) L_j(2 pi r^2/a^2)``."""
    x = 2.0 * np.pi * np.asarray(radius, dtype=np.float64) ** 2 / width**2
    return (np.sqrt(2.0) / width) * np.exp(-0.5 * x) * eval_laguerre(order, x)


def lg_channels(m: int, width: float, side: int, center: tuple[float, float] | None = None) -> ChannelMatrix:
    """Rasterized Laguerre-Gauss channels of orders ``0..m-1``, unit-normalized.

    ``center`` defaults to ``(side // 2, side // 2)``, the conventional
    signal location.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if width <= 0:
        raise ValueError("width must be > 0")
    if center is None:
        center = (side // 2, side // 2)
    ii, jj = np.indices((side, side), dtype=np.float64)
    radius = np.hypot(ii - center[0], jj - center[1])
    rows = np.stack([lg_radial(j, radius, width).ravel() for j in range(m)])
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return ChannelMatrix(rows, "lg", side)


def _conv2d_centered(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Zero-padded linear convolution cropped so that a delta at pixel
    ``(side//2, side//2)`` in ``b`` acts as the identity."""
    side = a.shape[0]
    size = 2 * side
    fa = np.fft.rfft2(a, (size, size))
    fb = np.fft.rfft2(b, (size, size))
    full = np.fft.irfft2(fa * fb, (size, size))
    c = side // 2
    return full[c : c + side, c : c + side]


def conv_lg_channels(lg: ChannelMatrix, sig: SignalEstimate) -> ChannelMatrix:
    """Convolve each channel with the estimated signal image, renormalized."""
    side = lg.side
    sig_img = sig.delta_g_bar.reshape(side, side)
    if np.linalg.norm(sig_img) == 0.0:
        raise ValueError("convolutional channels require a non-zero signal estimate")
    rows = np.stack(
        [_conv2d_centered(row.reshape(side, side), sig_img).ravel() for row in lg.matrix]
    )
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return ChannelMatrix(rows, "conv_lg", side)


# ---------------------------------------------------------------------------
# Matched filter
# ---------------------------------------------------------------------------

def matched_filter(sig: SignalEstimate) -> ChannelMatrix:
    """Single channel: the unit-normalized signal estimate."""
    delta = sig.delta_g_bar
    norm = np.linalg.norm(delta)
    if norm == 0.0:
        raise ValueError("matched filter requires a non-zero signal estimate")
    side = int(round(np.sqrt(delta.size)))
    if side * side != delta.size:
        raise ValueError(f"signal estimate length {delta.size} is not a square image")
    return ChannelMatrix((delta / norm)[None, :], "matched_filter", side)
