"""Linear observers: Hotelling templates, the CHO, and covariance-decomposition HO.

All observers score an image ``g`` as ``t = w^T v`` with ``v = T g`` when a
channel matrix is attached and ``v = g`` otherwise.  Templates solve
``[0.5 (K0 + K1)] w = delta`` against the empirical per-class covariances;
ill-conditioned systems (condition estimate above ``1e12``) fall back to the
minimum-norm least-squares solution and mark the model degenerate.

Binary observer file (extension ``.choobs``), little-endian:

====== ====== =====================================================
offset size   contents
====== ====== =====================================================
0      8      magic ``b"CHOOB01\\0"``
8      16     method tag, NUL-padded ASCII
24     4      grid side (uint32)
28     4      template length k (uint32)
32     4      channel count m (uint32; 0 = no channel matrix)
36     1      degenerate flag (uint8)
37     1      has-means flag (uint8)
38     1      has-covariance flag (uint8)
39     1      reserved (0)
40     --     template (k f64); channels (m * side^2 f64, if any);
              means absent/present (k f64 each, if any);
              covariance (k * k f64, if any)
====== ====== =====================================================
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .channels import ChannelMatrix
from .datasets import LabeledDataset
from .errors import DatasetError, DatasetFormatError, DimensionMismatchError
from .imaging import NoiseParams, SignalEstimate

OBSERVER_MAGIC = b"CHOOB01\0"
_OB_HEADER = struct.Struct("<8s16sIIIBBBB")

COND_LIMIT = 1e12


@dataclass
class ObserverModel:
    """A linear template plus the statistics used to build it."""

    method: str
    template: np.ndarray
    side: int
    channels: ChannelMatrix | None = None
    mean_absent: np.ndarray | None = None
    mean_present: np.ndarray | None = None
    covariance: np.ndarray | None = None
    degenerate: bool = False

    def __post_init__(self):
        self.template = np.asarray(self.template, dtype=np.float64).ravel()
        if not np.all(np.isfinite(self.template)):
            raise ValueError("observer template contains non-finite entries")
        expected = self.channels.m if self.channels is not None else self.side * self.side
        if self.template.shape[0] != expected:
            raise DimensionMismatchError(
                f"template length {self.template.shape[0]} does not match domain size {expected}"
            )


class TemplateSolve(NamedTuple):
    template: np.ndarray
    degenerate: bool


def hotelling_template(
    k0: np.ndarray, k1: np.ndarray, delta: np.ndarray, cond_limit: float = COND_LIMIT
) -> TemplateSolve:
    """Solve ``[0.5 (K0 + K1)] w = delta``.

    Uses a symmetric positive-definite solve when the mean covariance is
    well conditioned; otherwise returns the minimum-norm least-squares
    solution with the degenerate flag set.
    """
    k0 = np.atleast_2d(np.asarray(k0, dtype=np.float64))
    k1 = np.atleast_2d(np.asarray(k1, dtype=np.float64))
    delta = np.asarray(delta, dtype=np.float64).ravel()
    if k0.shape != k1.shape or k0.shape[0] != k0.shape[1]:
        raise DimensionMismatchError("covariances must be square and same-shaped")
    if k0.shape[0] != delta.shape[0]:
        raise DimensionMismatchError(
            f"covariance dimension {k0.shape[0]} does not match delta length {delta.shape[0]}"
        )
    mean_cov = 0.5 * (k0 + k1)
    eigvals = np.linalg.eigvalsh(mean_cov)
    lo, hi = eigvals[0], eigvals[-1]
    if lo > 0 and hi / lo <= cond_limit:
        try:
            return TemplateSolve(scipy.linalg.solve(mean_cov, delta, assume_a="pos"), False)
        except np.linalg.LinAlgError:
            pass
    w, *_ = np.linalg.lstsq(mean_cov, delta, rcond=None)
    return TemplateSolve(w, True)


def _class_moments(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    centered = rows - mean
    denom = max(len(rows) - 1, 1)
    return mean, centered.T @ centered / denom


def build_cho(channels: ChannelMatrix, calib: LabeledDataset) -> ObserverModel:
    """Channelized Hotelling observer: project, then solve in channel space."""
    if channels.side != calib.side:
        raise DimensionMismatchError(f"channel side {channels.side} vs dataset side {calib.side}")
    present, absent = calib.present(), calib.absent()
    if len(present) == 0 or len(absent) == 0:
        raise DatasetError("CHO calibration needs both classes")
    v_present = present @ channels.matrix.T
    v_absent = absent @ channels.matrix.T
    mean1, cov1 = _class_moments(v_present)
    mean0, cov0 = _class_moments(v_absent)
    solve = hotelling_template(cov0, cov1, mean1 - mean0)
    degenerate = solve.degenerate or channels.m >= min(len(present), len(absent))
    return ObserverModel(
        method=f"cho_{channels.method}",
        template=solve.template,
        side=calib.side,
        channels=channels,
        mean_absent=mean0,
        mean_present=mean1,
        covariance=0.5 * (cov0 + cov1),
        degenerate=degenerate,
    )


def _minimum_norm_template(u: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``(U U^T) w = delta`` via the small Gram system."""
    gram = u.T @ u
    eigvals, eigvecs = np.linalg.eigh(gram)
    top = eigvals.max()
    if top <= 0:
        raise ValueError("covariance has no positive eigenvalues")
    keep = eigvals > top * 1e-12
    q = eigvecs[:, keep]
    lam = eigvals[keep]
    coeff = q @ ((q.T @ (u.T @ delta)) / lam**2)
    return u @ coeff


def build_ho_direct(calib: LabeledDataset) -> ObserverModel:
    """Hotelling observer from empirical full image-space covariances.

    With fewer centered samples than pixels the mean covariance is
    rank-deficient by construction; the template is then the minimum-norm
    least-squares solution (computed through the sample Gram matrix, never
    the full dense covariance) and the model is flagged degenerate.
    """
    present, absent = calib.present(), calib.absent()
    if len(present) == 0 or len(absent) == 0:
        raise DatasetError("HO calibration needs both classes")
    n = calib.side * calib.side
    mean1 = present.mean(axis=0)
    mean0 = absent.mean(axis=0)
    delta = mean1 - mean0
    dof = (len(present) - 1) + (len(absent) - 1)
    if dof < n:
        # 0.5*(K0+K1) = U U^T with the class-centered samples as columns.
        columns = [
            (absent - mean0).T / np.sqrt(2.0 * max(len(absent) - 1, 1)),
            (present - mean1).T / np.sqrt(2.0 * max(len(present) - 1, 1)),
        ]
        u = np.concatenate(columns, axis=1)
        template = _minimum_norm_template(u, delta)
        return ObserverModel(
            method="ho_direct",
            template=template,
            side=calib.side,
            mean_absent=mean0,
            mean_present=mean1,
            covariance=None,
            degenerate=True,
        )
    _, cov1 = _class_moments(present)
    _, cov0 = _class_moments(absent)
    solve = hotelling_template(cov0, cov1, delta)
    return ObserverModel(
        method="ho_direct",
        template=solve.template,
        side=calib.side,
        mean_absent=mean0,
        mean_present=mean1,
        covariance=0.5 * (cov0 + cov1),
        degenerate=solve.degenerate,
    )


def lowrank_regularized_solve(u: np.ndarray, noise_var: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(noise_var * I + U U^T) w = rhs`` without forming an inverse.

    When ``U`` is ``n x k`` with ``k <= n`` the Woodbury identity reduces the
    work to a ``k x k`` positive-definite system; otherwise the ``n x n``
    matrix is assembled once and solved by Cholesky.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be > 0")
    n, k = u.shape
    if k <= n:
        gram = u.T @ u
        gram[np.diag_indices_from(gram)] += noise_var
        z = scipy.linalg.solve(gram, u.T @ rhs, assume_a="pos")
        return (rhs - u @ z) / noise_var
    full = u @ u.T
    full[np.diag_indices_from(full)] += noise_var
    return scipy.linalg.solve(full, rhs, assume_a="pos")


def build_ho_cmd(
    noiseless_backgrounds: np.ndarray, sig: SignalEstimate, noise: NoiseParams
) -> ObserverModel:
    """Hotelling observer from covariance decomposition: known white noise
    plus the empirical covariance of noiseless backgrounds."""
    backgrounds = np.asarray(noiseless_backgrounds, dtype=np.float64)
    if backgrounds.ndim != 2 or backgrounds.shape[0] == 0:
        raise DatasetError("need a non-empty (N, side^2) background array")
    if noise.std <= 0:
        raise ValueError("covariance decomposition requires noise std > 0")
    side = int(round(np.sqrt(backgrounds.shape[1])))
    if side * side != backgrounds.shape[1]:
        raise DimensionMismatchError("backgrounds are not square images")
    delta = sig.delta_g_bar
    if delta.shape[0] != backgrounds.shape[1]:
        raise DimensionMismatchError("signal estimate does not match background dimension")
    centered = backgrounds - backgrounds.mean(axis=0)
    u = centered.T / np.sqrt(max(len(backgrounds) - 1, 1))
    template = lowrank_regularized_solve(u, noise.std**2, delta)
    return ObserverModel(
        method="ho_cmd",
        template=template,
        side=side,
        covariance=None,
        degenerate=False,
    )


def score(model: ObserverModel, images) -> np.ndarray:
    """Test statistics ``w^T g`` (or ``w^T T g``) for a batch of images."""
    arr = np.atleast_2d(np.asarray(images, dtype=np.float64))
    n = model.side * model.side
    if arr.shape[1] != n:
        raise DimensionMismatchError(f"images have {arr.shape[1]} pixels, model expects {n}")
    if model.channels is not None:
        arr = arr @ model.channels.matrix.T
    return arr @ model.template


def save_observer(model: ObserverModel, path: str | Path) -> None:
    method = model.method.encode("ascii")
    if len(method) > 16:
        raise ValueError("method tag longer than 16 bytes")
    k = model.template.shape[0]
    m = model.channels.m if model.channels is not None else 0
    has_means = model.mean_absent is not None and model.mean_present is not None
    has_cov = model.covariance is not None
    with open(path, "wb") as fh:
        fh.write(
            _OB_HEADER.pack(
                OBSERVER_MAGIC,
                method.ljust(16, b"\0"),
                model.side,
                k,
                m,
                1 if model.degenerate else 0,
                1 if has_means else 0,
                1 if has_cov else 0,
                0,
            )
        )
        fh.write(model.template.astype("<f8", copy=False).tobytes())
        if m:
            fh.write(model.channels.matrix.astype("<f8", copy=False).tobytes())
        if has_means:
            fh.write(np.asarray(model.mean_absent, dtype="<f8").tobytes())
            fh.write(np.asarray(model.mean_present, dtype="<f8").tobytes())
        if has_cov:
            fh.write(np.asarray(model.covariance, dtype="<f8").tobytes())


def load_observer(path: str | Path) -> ObserverModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    raw = path.read_bytes()
    if len(raw) < _OB_HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, method, side, k, m, degenerate, has_means, has_cov, _ = _OB_HEADER.unpack_from(raw)
    if magic != OBSERVER_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    offset = _OB_HEADER.size

    def take(count: int) -> np.ndarray:
        nonlocal offset
        out = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return out.copy()

    template = take(k)
    channels = None
    if m:
        channels = ChannelMatrix(take(m * side * side).reshape(m, side * side), "loaded", side)
    mean0 = mean1 = None
    if has_means:
        mean0 = take(k)
        mean1 = take(k)
    cov = take(k * k).reshape(k, k) if has_cov else None
    if offset != len(raw):
        raise DatasetFormatError(f"{path}: trailing bytes")
    return ObserverModel(
        method=method.rstrip(b"\0").decode("ascii"),
        template=template,
        side=side,
        channels=channels,
        mean_absent=mean0,
        mean_present=mean1,
        covariance=cov,
        degenerate=bool(degenerate),
    )
