import numpy as np
import pytest
from scipy import integrate

from chokit.datasets import combine
from chokit.errors import DatasetError
from chokit.imaging import (
    CollimatorParams,
    NoiseParams,
    estimate_signal,
    generate_dataset,
    measure,
    noiseless_backgrounds,
    oracle_signal_estimate,
    project_blob,
)
from chokit.objects import GaussianBlob, LumpyParams, SignalParams, signal_covariance
from chokit.rng import substream

COLL = CollimatorParams(height=40.0, width=0.5)
QUIET = NoiseParams(0.0)


def kernel_quadrature(blob: GaussianBlob, coll: CollimatorParams, pixel) -> float:
    """Independent oracle: numerically integrate the pinhole kernel against the blob."""
    px, py = pixel
    det = np.linalg.det(blob.covariance)
    inv = np.linalg.inv(blob.covariance)

    def integrand(y, x):
        kern = (
            coll.height
            / (2 * np.pi * coll.width**2)
            * np.exp(-((x - px) ** 2 + (y - py) ** 2) / (2 * coll.width**2))
        )
        d = np.array([x - blob.center[0], y - blob.center[1]])
        return kern * blob.amplitude * np.exp(-0.5 * d @ inv @ d)

    span = 10.0 * max(np.sqrt(det) ** 0.5, 1.0) + 10.0
    lo_x, hi_x = min(px, blob.center[0]) - span, max(px, blob.center[0]) + span
    lo_y, hi_y = min(py, blob.center[1]) - span, max(py, blob.center[1]) + span
    value, _ = integrate.dblquad(integrand, lo_x, hi_x, lo_y, hi_y, epsabs=1e-12, epsrel=1e-10)
    return value


def test_project_lump_center_amplitude():
    blob = GaussianBlob(1.0, (32, 32), 49.0 * np.eye(2))
    img = project_blob(blob, COLL, 64).reshape(64, 64)
    assert img[32, 32] == pytest.approx(40.0 * 49.0 / 49.25, rel=1e-12)


def test_project_signal_center_amplitude():
    blob = GaussianBlob(0.2, (32, 32), np.diag([25.0, 2.25]))
    img = project_blob(blob, COLL, 64).reshape(64, 64)
    expected = 0.2 * 40.0 * np.sqrt((25.0 * 2.25) / (25.25 * 2.5))
    assert img[32, 32] == pytest.approx(expected, rel=1e-12)


def test_project_matches_quadrature_spot_checks():
    rng = np.random.default_rng(11)
    for _ in range(3):
        cov = signal_covariance(rng.uniform(2, 8), rng.uniform(1, 4), rng.uniform(0, 180))
        blob = GaussianBlob(rng.uniform(0.1, 2.0), rng.uniform(10, 20, size=2), cov)
        img = project_blob(blob, COLL, 32).reshape(32, 32)
        i, j = rng.integers(8, 24, size=2)
        oracle = kernel_quadrature(blob, COLL, (i, j))
        assert img[i, j] == pytest.approx(oracle, rel=1e-6)


def test_project_zero_amplitude():
    blob = GaussianBlob(0.0, (8, 8), np.eye(2))
    assert np.all(project_blob(blob, COLL, 16) == 0.0)


def test_project_linear_in_amplitude():
    blob = GaussianBlob(0.7, (8, 9), 4.0 * np.eye(2))
    scaled = GaussianBlob(0.7 * 3.5, (8, 9), 4.0 * np.eye(2))
    np.testing.assert_allclose(
        project_blob(scaled, COLL, 16), 3.5 * project_blob(blob, COLL, 16), rtol=1e-14
    )


def test_measure_empty_quiet_is_zero():
    assert np.all(measure([], COLL, QUIET, substream(0, "n"), 16) == 0.0)


def test_measure_noise_moments():
    # Pure-noise std over 1e4 draws within 2% of the configured value.
    n_draws = 10_000
    samples = np.stack(
        [measure([], COLL, NoiseParams(20.0), substream(2, "noise", i), 4) for i in range(n_draws)]
    )
    stds = samples.std(axis=0, ddof=1)
    assert np.all(np.abs(stds - 20.0) < 0.4)
    assert abs(samples.mean()) < 0.25


def test_measure_noise_whiteness():
    n_draws = 4000
    samples = np.stack(
        [measure([], COLL, NoiseParams(20.0), substream(9, "noise", i), 3) for i in range(n_draws)]
    )
    corr = np.corrcoef(samples.T)
    off_diag = corr[~np.eye(9, dtype=bool)]
    assert np.max(np.abs(off_diag)) < 3.0 / np.sqrt(n_draws)


def test_measure_two_identical_blobs_doubles():
    blob = GaussianBlob(1.0, (8, 8), 9.0 * np.eye(2))
    one = measure([blob], COLL, QUIET, substream(0, "n"), 16)
    two = measure([blob, blob], COLL, QUIET, substream(0, "n"), 16)
    np.testing.assert_allclose(two, 2.0 * one, rtol=1e-14)


LUMPY16 = LumpyParams(5, 1.0, 7.0, (16, 16))
SIGNAL16 = SignalParams(0.2, (8, 8), 5.0, 1.5)


def test_generate_dataset_shape_and_pairing():
    ds = generate_dataset(10, LUMPY16, SIGNAL16, COLL, NoiseParams(20.0), seed=4, side=16)
    assert len(ds) == 20
    assert np.array_equal(ds.labels[0::2], np.zeros(10, dtype=np.uint8))
    assert np.array_equal(ds.labels[1::2], np.ones(10, dtype=np.uint8))
    assert ds.seed == 4


def test_generate_dataset_deterministic():
    a = generate_dataset(5, LUMPY16, SIGNAL16, COLL, NoiseParams(20.0), seed=4, side=16)
    b = generate_dataset(5, LUMPY16, SIGNAL16, COLL, NoiseParams(20.0), seed=4, side=16)
    assert np.array_equal(a.images, b.images)
    c = generate_dataset(5, LUMPY16, SIGNAL16, COLL, NoiseParams(20.0), seed=5, side=16)
    assert not np.array_equal(a.images, c.images)


def test_generate_dataset_pair_differs_by_signal_when_clean():
    quiet_lumpy = LumpyParams(0.0, 1.0, 7.0, (16, 16))
    ds = generate_dataset(1, quiet_lumpy, SIGNAL16, COLL, QUIET, seed=1, side=16)
    blob = GaussianBlob(0.2, (8, 8), np.diag([25.0, 2.25]))
    np.testing.assert_allclose(ds.images[1] - ds.images[0], project_blob(blob, COLL, 16), atol=1e-12)


def test_generate_dataset_raw_signal_domain():
    quiet_lumpy = LumpyParams(0.0, 1.0, 7.0, (16, 16))
    ds = generate_dataset(1, quiet_lumpy, SIGNAL16, COLL, QUIET, seed=1, side=16, signal_domain="raw")
    from chokit.objects import rasterize_blob

    blob = GaussianBlob(0.2, (8, 8), np.diag([25.0, 2.25]))
    np.testing.assert_allclose(ds.images[1] - ds.images[0], rasterize_blob(blob, 16), atol=1e-12)


def test_noiseless_backgrounds_match_dataset_backgrounds():
    # Present/absent images share nothing, but image i's background must be
    # reproducible from the same substream without noise.
    ds = generate_dataset(3, LUMPY16, SIGNAL16, COLL, QUIET, seed=12, side=16)
    bgs = noiseless_backgrounds(6, LUMPY16, COLL, seed=12, side=16)
    np.testing.assert_allclose(bgs[0], ds.images[0], atol=1e-12)
    np.testing.assert_allclose(bgs[2], ds.images[2], atol=1e-12)


def test_estimate_signal_exact_on_clean_fixed_task():
    quiet_lumpy = LumpyParams(0.0, 1.0, 7.0, (16, 16))
    ds = generate_dataset(4, quiet_lumpy, SIGNAL16, COLL, QUIET, seed=2, side=16)
    est = estimate_signal(ds)
    blob = GaussianBlob(0.2, (8, 8), np.diag([25.0, 2.25]))
    np.testing.assert_allclose(est.delta_g_bar, project_blob(blob, COLL, 16), atol=1e-12)
    assert est.source == "empirical"


def test_estimate_signal_single_pair():
    ds = generate_dataset(1, LUMPY16, SIGNAL16, COLL, NoiseParams(20.0), seed=3, side=16)
    est = estimate_signal(ds)
    np.testing.assert_allclose(est.delta_g_bar, ds.images[1] - ds.images[0], atol=1e-12)


def test_estimate_signal_requires_both_classes():
    ds = generate_dataset(2, LUMPY16, SIGNAL16, COLL, QUIET, seed=3, side=16)
    present_only = type(ds)(ds.images[ds.labels == 1], ds.labels[ds.labels == 1], 16, "train")
    with pytest.raises(DatasetError):
        estimate_signal(present_only)


def test_sks_signal_estimate_converges_to_orientation_average():
    # Clean SKS data: the empirical estimate approaches the average of the
    # measured orientations; at 1e4 pairs deviation < 5% of the signal peak.
    quiet_lumpy = LumpyParams(0.0, 1.0, 7.0, (32, 32))
    sks = SignalParams(0.2, (16, 16), 5.0, 1.5, (0.0, 45.0, 90.0, 135.0), "uniform")
    ds = generate_dataset(10_000, quiet_lumpy, sks, COLL, QUIET, seed=21, side=32)
    est = estimate_signal(ds)
    oracle = oracle_signal_estimate(sks, COLL, 32)
    peak = oracle.delta_g_bar.max()
    assert oracle.source == "oracle"
    assert np.max(np.abs(est.delta_g_bar - oracle.delta_g_bar)) < 0.05 * peak


def test_combine_pools_datasets():
    a = generate_dataset(2, LUMPY16, SIGNAL16, COLL, QUIET, seed=1, side=16)
    b = generate_dataset(3, LUMPY16, SIGNAL16, COLL, QUIET, seed=2, side=16, split="validation")
    pooled = combine(a, b)
    assert len(pooled) == 10
    assert pooled.side == 16
