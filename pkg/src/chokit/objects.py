"""Stochastic object models: lumpy backgrounds and elliptical Gaussian signals.

Objects live in a continuous 2-D plane as parametric Gaussian blobs; pixel
``(i, j)`` of a ``side x side`` grid sits at continuous coordinate ``(i, j)``
with ``i, j`` integers in ``[0, side)``.  Images are flattened row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianBlob:
    """A 2-D Gaussian bump: ``amplitude * exp(-0.5 d^T cov^-1 d)``, d = r - center."""

    amplitude: float
    center: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(2)
        cov = np.asarray(self.covariance, dtype=np.float64).reshape(2, 2)
        if not np.isfinite(self.amplitude):
            raise ValueError("blob amplitude must be finite")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
            raise ValueError("blob covariance must be symmetric")
        eigvals = np.linalg.eigvalsh(cov)
        if eigvals.min() <= 0:
            raise ValueError(f"blob covariance must be positive definite, eigenvalues {eigvals}")
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class LumpyParams:
    """Poisson-many isotropic Gaussian lumps at uniform positions."""

    mean_lump_count: float
    lump_amplitude: float
    lump_width: float
    field_extent: tuple[float, float]

    def __post_init__(self):
        if self.mean_lump_count < 0:
            raise ValueError("mean_lump_count must be >= 0")
        if self.lump_width <= 0:
            raise ValueError("lump_width must be > 0")
        if min(self.field_extent) <= 0:
            raise ValueError("field_extent must be positive")
        object.__setattr__(self, "field_extent", (float(self.field_extent[0]), float(self.field_extent[1])))


@dataclass(frozen=True)
class SignalParams:
    """Elliptical Gaussian signal with fixed or uniformly-drawn orientation.

    ``orientation_mode`` is ``"fixed"`` (single angle; location-known task) or
    ``"uniform"`` (angle drawn uniformly from ``orientation_set`` per draw;
    signal-known-statistically task).  Angles are in degrees.
    """

    amplitude: float
    center: tuple[float, float]
    sigma_x: float
    sigma_y: float
    orientation_set: tuple[float, ...] = (0.0,)
    orientation_mode: str = "fixed"

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("signal widths must be > 0")
        angles = tuple(float(a) for a in self.orientation_set)
        if not angles:
            raise ValueError("orientation_set must be non-empty")
        if self.orientation_mode not in ("fixed", "uniform"):
            raise ValueError(f"unknown orientation_mode {self.orientation_mode!r}")
        if self.orientation_mode == "fixed" and len(angles) != 1:
            raise ValueError("fixed orientation_mode requires a single angle")
        object.__setattr__(self, "orientation_set", angles)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


def rotation_matrix(theta_deg: float) -> np.ndarray:
    t = np.deg2rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def signal_covariance(sigma_x: float, sigma_y: float, theta_deg: float) -> np.ndarray:
    """Covariance of an elliptical Gaussian with axis widths rotated by theta.

    A zero-mean Gaussian is invariant under a half-turn, so the angle is
    reduced modulo 180 degrees (exact in float arithmetic) before the
    rotation is applied; theta and theta + 180 give identical covariances.
    """
    rot = rotation_matrix(float(theta_deg) % 180.0)
    return rot.T @ np.diag([sigma_x**2, sigma_y**2]) @ rot


def sample_lumpy_background(params: LumpyParams, rng: np.random.Generator) -> list[GaussianBlob]:
    """Draw one lumpy-background realization as a list of blobs.

    The lump count is Poisson(mean_lump_count); each lump has the configured
    amplitude, isotropic covariance ``width^2 * I``, and a center uniform over
    the continuous field extent (no wrap-around).
    """
    count = int(rng.poisson(params.mean_lump_count))
    if count == 0:
        return []
    width, height = params.field_extent
    centers = rng.uniform(0.0, [width, height], size=(count, 2))
    cov = params.lump_width**2 * np.eye(2)
    return [GaussianBlob(params.lump_amplitude, c, cov) for c in centers]


def sample_signal(params: SignalParams, rng: np.random.Generator) -> GaussianBlob:
    """Draw the signal blob; consumes randomness only in ``uniform`` mode."""
    if params.orientation_mode == "fixed":
        theta = params.orientation_set[0]
    else:
        theta = params.orientation_set[int(rng.integers(len(params.orientation_set)))]
    cov = signal_covariance(params.sigma_x, params.sigma_y, theta)
    return GaussianBlob(params.amplitude, np.asarray(params.center), cov)


def _grid_coords(side: int) -> np.ndarray:
    ii, jj = np.indices((side, side), dtype=np.float64)
    return np.stack([ii, jj], axis=-1)  # (side, side, 2)


def gaussian_raster(amplitude: float, center: np.ndarray, covariance: np.ndarray, side: int) -> np.ndarray:
    """Evaluate ``amplitude * exp(-0.5 d^T cov^-1 d)`` on the pixel grid, flattened row-major."""
    if side <= 0:
        raise ValueError("grid side must be positive")
    det = covariance[0, 0] * covariance[1, 1] - covariance[0, 1] * covariance[1, 0]
    if det <= 0:
        raise ValueError("covariance must be non-singular for rasterization")
    inv = np.array([[covariance[1, 1], -covariance[0, 1]], [-covariance[1, 0], covariance[0, 0]]]) / det
    d = _grid_coords(side) - np.asarray(center, dtype=np.float64)
    quad = (
        inv[0, 0] * d[..., 0] ** 2
        + (inv[0, 1] + inv[1, 0]) * d[..., 0] * d[..., 1]
        + inv[1, 1] * d[..., 1] ** 2
    )
    return (amplitude * np.exp(-0.5 * quad)).ravel()


def rasterize_blob(blob: GaussianBlob, side: int) -> np.ndarray:
    """Sample a blob directly on the grid (no imaging operator)."""
    return gaussian_raster(blob.amplitude, blob.center, blob.covariance, side)
