import math

import numpy as np
import pytest

from chokit.evaluation import (
    binormal_auc,
    empirical_auc,
    normal_cdf,
    roc_curve,
    snr_t,
    summarize_scores,
    trapezoid_area,
    write_summary,
)


def brute_force_auc(t_present, t_absent) -> float:
    """Independent oracle: enumerate every (present, absent) pair."""
    total = 0.0
    for p in t_present:
        for a in t_absent:
            if p > a:
                total += 1.0
            elif p == a:
                total += 0.5
    return total / (len(t_present) * len(t_absent))


def test_empirical_auc_perfect_separation():
    assert empirical_auc([2, 3], [0, 1]) == 1.0


def test_empirical_auc_identical_lists():
    assert empirical_auc([1, 2, 3], [1, 2, 3]) == 0.5


def test_empirical_auc_hand_case():
    # pairs: (1>2 no)(1>0 yes)(3>2 yes)(3>0 yes) = 3/4
    assert empirical_auc([1, 3], [2, 0]) == 0.75


def test_empirical_auc_equals_brute_force_with_ties():
    rng = np.random.default_rng(5)
    for trial in range(30):
        # Quantized scores force ties across and within classes.
        tp = rng.integers(0, 6, size=rng.integers(2, 25)).astype(float)
        ta = rng.integers(0, 6, size=rng.integers(2, 25)).astype(float)
        assert empirical_auc(tp, ta) == brute_force_auc(tp, ta)


def test_empirical_auc_complement_identity():
    rng = np.random.default_rng(6)
    tp, ta = rng.normal(size=20), rng.normal(size=30)
    assert empirical_auc(tp, ta) + empirical_auc(ta, tp) == pytest.approx(1.0, abs=1e-15)


def test_empirical_auc_monotone_invariance():
    rng = np.random.default_rng(7)
    tp, ta = rng.normal(size=25), rng.normal(size=25)
    direct = empirical_auc(tp, ta)
    assert empirical_auc(np.exp(tp), np.exp(ta)) == direct
    assert empirical_auc(3 * tp + 2, 3 * ta + 2) == direct


def test_binormal_exact_moments():
    # Sample moments: means 0 and 1, unit variances -> Phi(1/sqrt(2)).
    ta = [-1.0, 0.0, 1.0]
    tp = [0.0, 1.0, 2.0]
    auc, _ = binormal_auc(tp, ta, n_bootstrap=0)
    assert auc == pytest.approx(normal_cdf(1 / math.sqrt(2)), abs=1e-12)
    assert auc == pytest.approx(0.76025, abs=1e-5)


def test_binormal_equal_means():
    auc, _ = binormal_auc([0.0, 1.0], [1.0, 0.0], n_bootstrap=0)
    assert auc == 0.5


def test_binormal_matches_snr_identity():
    rng = np.random.default_rng(8)
    tp = rng.normal(1.3, 0.7, size=50)
    ta = rng.normal(0.0, 1.1, size=60)
    auc, _ = binormal_auc(tp, ta, n_bootstrap=0)
    assert auc == pytest.approx(normal_cdf(snr_t(tp, ta) / math.sqrt(2)), abs=1e-14)


def test_binormal_rejects_fully_degenerate():
    with pytest.raises(ValueError):
        binormal_auc([1.0, 1.0], [1.0, 1.0], n_bootstrap=0)


def test_binormal_bootstrap_se_shrinks_with_sample_size():
    # Doubling the sample count shrinks the bootstrap SE by ~1/sqrt(2).
    rng = np.random.default_rng(9)
    ratios = []
    for trial in range(20):
        base = 160
        tp = rng.normal(1, 1, size=2 * base)
        ta = rng.normal(0, 1, size=2 * base)
        _, se_small = binormal_auc(tp[:base], ta[:base], n_bootstrap=200, rng=trial)
        _, se_big = binormal_auc(tp, ta, n_bootstrap=200, rng=trial + 1000)
        ratios.append(se_big / se_small)
    assert abs(np.mean(ratios) - 0.71) < 0.15


def test_snr_basic_and_symmetry():
    tp = [0.0, 1.0, 2.0]
    ta = [-1.0, 0.0, 1.0]
    assert snr_t(tp, ta) == pytest.approx(1.0, abs=1e-14)
    assert snr_t(ta, tp) == pytest.approx(-1.0, abs=1e-14)


def test_snr_scale_invariance():
    rng = np.random.default_rng(10)
    tp, ta = rng.normal(1, 1, 40), rng.normal(0, 1, 40)
    assert snr_t(5 * tp, 5 * ta) == pytest.approx(snr_t(tp, ta), rel=1e-12)


def test_snr_rejects_zero_variance():
    with pytest.raises(ValueError):
        snr_t([1.0, 1.0], [0.0, 0.0])


def test_roc_perfect_separation_hits_corner():
    points = roc_curve([2.0, 3.0], [0.0, 1.0])
    assert any(np.array_equal(p, [0.0, 1.0]) for p in points)
    assert np.array_equal(points[0], [0.0, 0.0])
    assert np.array_equal(points[-1], [1.0, 1.0])


def test_roc_identical_scores_is_diagonal():
    points = roc_curve([1.0, 2.0], [1.0, 2.0])
    np.testing.assert_allclose(points[:, 0], points[:, 1], atol=1e-15)


def test_roc_trapezoid_equals_empirical_auc():
    rng = np.random.default_rng(11)
    for trial in range(100):
        n1, n0 = rng.integers(2, 40), rng.integers(2, 40)
        if trial % 3 == 0:
            tp = rng.integers(0, 5, n1).astype(float)
            ta = rng.integers(0, 5, n0).astype(float)
        else:
            tp = rng.normal(0.5, 1, n1)
            ta = rng.normal(0.0, 1, n0)
        points = roc_curve(tp, ta)
        assert abs(trapezoid_area(points) - empirical_auc(tp, ta)) < 1e-12


def test_roc_monotone_non_decreasing():
    rng = np.random.default_rng(12)
    points = roc_curve(rng.normal(1, 1, 50), rng.normal(0, 1, 50))
    assert np.all(np.diff(points[:, 0]) >= 0)
    assert np.all(np.diff(points[:, 1]) >= 0)


def test_roc_subsampling_keeps_endpoints():
    rng = np.random.default_rng(13)
    points = roc_curve(rng.normal(1, 1, 200), rng.normal(0, 1, 200), n_points=20)
    assert len(points) <= 20
    assert np.array_equal(points[0], [0.0, 0.0])
    assert np.array_equal(points[-1], [1.0, 1.0])


def test_summary_serialization(tmp_path):
    rng = np.random.default_rng(14)
    summary = summarize_scores(rng.normal(1, 1, 60), rng.normal(0, 1, 60), rng=3)
    out = tmp_path / "summary.txt"
    roc = tmp_path / "roc.txt"
    write_summary(summary, out, roc_path=roc)
    text = out.read_text()
    assert "auc_empirical" in text and "snr" in text
    parsed = {
        line.split(" = ")[0]: line.split(" = ")[1] for line in text.strip().splitlines()
    }
    assert float(parsed["auc_empirical"]) == summary.auc_empirical
    rows = np.loadtxt(roc)
    assert rows.shape[1] == 2
    assert 0.0 <= summary.auc_binormal <= 1.0
