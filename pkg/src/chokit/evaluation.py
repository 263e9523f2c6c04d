"""Figures of merit for scalar test statistics: AUC, ROC, SNR.

``empirical_auc`` is the Mann-Whitney statistic (ties count one half) and is
identical to the trapezoidal area under the empirical ROC curve.  The
binormal AUC is a moment-based fit, ``Phi(dmu / sqrt(s0^2 + s1^2))``, with a
seeded nonparametric bootstrap over images for its standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "empirical_auc",
    "binormal_auc",
    "snr_t",
    "roc_curve",
    "normal_cdf",
    "RocSummary",
    "summarize_scores",
    "write_summary",
]


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erf (double-precision accurate)."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _check_scores(t_present, t_absent, min_each: int = 1) -> tuple[np.ndarray, np.ndarray]:
    tp = np.asarray(t_present, dtype=np.float64).ravel()
    ta = np.asarray(t_absent, dtype=np.float64).ravel()
    if len(tp) < min_each or len(ta) < min_each:
        raise ValueError(f"need at least {min_each} score(s) per class")
    return tp, ta


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..N with tied values sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    # Tie groups get the mean of the ranks they span.
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    stops = np.concatenate([boundaries, [len(values)]])
    for a, b in zip(starts, stops):
        ranks[order[a:b]] = 0.5 * (a + b + 1)
    return ranks


def empirical_auc(t_present, t_absent) -> float:
    """Fraction of (present, absent) score pairs ordered correctly; ties count 1/2."""
    tp, ta = _check_scores(t_present, t_absent)
    ranks = _average_ranks(np.concatenate([ta, tp]))
    n1, n0 = len(tp), len(ta)
    rank_sum = ranks[n0:].sum()
    return float((rank_sum - n1 * (n1 + 1) / 2) / (n1 * n0))


def _binormal_from_moments(tp: np.ndarray, ta: np.ndarray) -> float:
    mu1, mu0 = tp.mean(), ta.mean()
    v1 = tp.var(ddof=1) if len(tp) > 1 else 0.0
    v0 = ta.var(ddof=1) if len(ta) > 1 else 0.0
    spread = math.sqrt(v0 + v1)
    if spread == 0.0:
        if mu1 == mu0:
            raise ValueError("both classes are degenerate with equal means")
        return 1.0 if mu1 > mu0 else 0.0
    return normal_cdf((mu1 - mu0) / spread)


def binormal_auc(
    t_present,
    t_absent,
    n_bootstrap: int = 200,
    rng: np.random.Generator | int | None = None,
) -> tuple[float, float]:
    """Moment-based binormal AUC and its bootstrap standard error.

    Resamples images within each class (``n_bootstrap`` draws, seeded by
    ``rng``); returns ``(auc, std_error)``.
    """
    tp, ta = _check_scores(t_present, t_absent, min_each=2)
    auc = _binormal_from_moments(tp, ta)
    if n_bootstrap <= 0:
        return auc, float("nan")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(0 if rng is None else rng)
    replicas = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        rp = tp[rng.integers(len(tp), size=len(tp))]
        ra = ta[rng.integers(len(ta), size=len(ta))]
        try:
            replicas[b] = _binormal_from_moments(rp, ra)
        except ValueError:
            replicas[b] = 0.5
    return auc, float(replicas.std(ddof=1))


def snr_t(t_present, t_absent) -> float:
    """Test-statistic SNR: mean difference over the RMS of per-class stds."""
    tp, ta = _check_scores(t_present, t_absent, min_each=2)
    v1, v0 = tp.var(ddof=1), ta.var(ddof=1)
    denom = math.sqrt(0.5 * v0 + 0.5 * v1)
    if denom == 0.0:
        raise ValueError("both class variances are zero")
    return float((tp.mean() - ta.mean()) / denom)


def roc_curve(t_present, t_absent, n_points: int | None = None) -> np.ndarray:
    """Empirical ROC as (FPF, TPF) rows from (0, 0) to (1, 1).

    Thresholds sweep all distinct scores; the trapezoidal area under the
    returned polyline equals :func:`empirical_auc` exactly.  ``n_points``
    optionally subsamples the polyline (endpoints always kept).
    """
    tp, ta = _check_scores(t_present, t_absent)
    thresholds = np.unique(np.concatenate([tp, ta]))[::-1]
    tp_sorted = np.sort(tp)
    ta_sorted = np.sort(ta)
    # Count of scores >= threshold via binary search on the sorted arrays.
    tpf = 1.0 - np.searchsorted(tp_sorted, thresholds, side="left") / len(tp)
    fpf = 1.0 - np.searchsorted(ta_sorted, thresholds, side="left") / len(ta)
    points = np.column_stack([np.concatenate([[0.0], fpf, [1.0]]), np.concatenate([[0.0], tpf, [1.0]])])
    if n_points is not None and n_points < len(points):
        keep = np.unique(np.linspace(0, len(points) - 1, n_points).round().astype(int))
        points = points[keep]
    return points


def trapezoid_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return float(np.trapezoid(y, x))


@dataclass
class RocSummary:
    """One detection result: AUCs, SNR, and the ROC polyline."""

    auc_empirical: float
    auc_binormal: float
    auc_std_error: float
    snr: float
    n_present: int
    n_absent: int
    roc_points: np.ndarray = field(repr=False)


def summarize_scores(
    t_present,
    t_absent,
    n_bootstrap: int = 200,
    rng: np.random.Generator | int | None = None,
) -> RocSummary:
    tp, ta = _check_scores(t_present, t_absent, min_each=2)
    auc_b, se = binormal_auc(tp, ta, n_bootstrap=n_bootstrap, rng=rng)
    return RocSummary(
        auc_empirical=empirical_auc(tp, ta),
        auc_binormal=auc_b,
        auc_std_error=se,
        snr=snr_t(tp, ta),
        n_present=len(tp),
        n_absent=len(ta),
        roc_points=roc_curve(tp, ta),
    )


def write_summary(summary: RocSummary, path: str | Path, roc_path: str | Path | None = None) -> None:
    """Serialize a summary as flat ``key = value`` text, optionally with a
    two-column (FPF, TPF) file alongside."""
    lines = [
        f"auc_empirical = {summary.auc_empirical!r}",
        f"auc_binormal = {summary.auc_binormal!r}",
        f"auc_std_error = {summary.auc_std_error!r}",
        f"snr = {summary.snr!r}",
        f"n_present = {summary.n_present}",
        f"n_absent = {summary.n_absent}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")
    if roc_path is not None:
        with open(roc_path, "w") as fh:
            for fpf, tpf in summary.roc_points:
                fh.write(f"{float(fpf)!r} {float(tpf)!r}\n")
