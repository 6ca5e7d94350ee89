"""Ranking metrics and curve statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AucCurve:
    strategy: str
    eval_set: str  # "development" | "external"
    points: tuple  # ((epoch, auc), ...)

    def __post_init__(self):
        pts = tuple((int(e), float(a)) for e, a in self.points)
        object.__setattr__(self, "points", pts)
        epochs = [e for e, _ in pts]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError("curve epochs must be strictly increasing")
        if any(not 0.0 <= a <= 1.0 for _, a in pts):
            raise ValueError("AUC values must lie in [0, 1]")

    @property
    def epochs(self):
        return [e for e, _ in self.points]

    @property
    def values(self):
        return [a for _, a in self.points]


def auc_binary(scores, labels):
    """Mann-Whitney AUC: P(score+ > score-) with ties counted one half.

    Uses tie-averaged ranks held as doubled integers so the result is the
    exact pair-count ratio.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores but {labels.size} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != labels.size:
        raise ValueError("binary labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative samples")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    # doubled average rank of a tie group spanning 1-based ranks i..j is i + j
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [scores.size]))
    doubled = np.repeat(starts + 1 + ends, ends - starts)
    ranks2 = np.empty(scores.size, dtype=np.int64)
    ranks2[order] = doubled
    u2 = int(ranks2[pos].sum()) - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def auc_multiclass(scores, labels, average="macro"):
    """One-vs-rest AUC over the columns of an (N, k) score matrix.

    ``average="macro"`` (default) is the mean of per-class AUCs;
    ``"micro"`` pools every (sample, class) cell into one binary problem.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int).ravel()
    if scores.ndim != 2 or scores.shape[0] != labels.size:
        raise ValueError(f"expected an (N, k) score matrix for {labels.size} labels, got {scores.shape}")
    k = scores.shape[1]
    if k < 2:
        raise ValueError("multiclass AUC needs k >= 2")
    present = np.bincount(labels, minlength=k)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    if (present == 0).any():
        raise ValueError(f"classes {np.flatnonzero(present == 0).tolist()} have no samples")
    onehot = np.eye(k, dtype=int)[labels]
    if average == "macro":
        return float(np.mean([auc_binary(scores[:, c], onehot[:, c]) for c in range(k)]))
    if average == "micro":
        return auc_binary(scores.ravel(), onehot.ravel())
    raise ValueError(f"unknown average {average!r}")


def auc_score(scores, labels):
    """AUC for sigmoid outputs (N,) / (N, 1) or softmax outputs (N, k)."""
    scores = np.asarray(scores)
    if scores.ndim == 1 or scores.shape[1] == 1:
        return auc_binary(scores.reshape(-1), labels)
    return auc_multiclass(scores, labels)


def threshold_epoch(curve, threshold=0.9):
    """First epoch whose AUC reaches ``threshold``, or None."""
    if not curve.points:
        raise ValueError("empty curve")
    for epoch, auc in curve.points:
        if auc >= threshold:
            return epoch
    return None


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    n: int


def box_stats(values, whiskers=(0.01, 0.99)):
    """Quartiles plus 1%/99% whiskers, linear interpolation between order statistics."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("box_stats needs at least one value")
    lo, q1, med, q3, hi = np.quantile(v, [whiskers[0], 0.25, 0.5, 0.75, whiskers[1]], method="linear")
    return BoxStats(float(q1), float(med), float(q3), float(lo), float(hi), int(v.size))


@dataclass(frozen=True)
class DipReport:
    development: BoxStats
    external: BoxStats
    median_dip: float


def dip_report(dev, ext):
    """Box statistics of both curves and the drop in median AUC from dev to external."""
    if not dev.points or not ext.points:
        raise ValueError("dip_report needs non-empty curves")
    d = box_stats(dev.values)
    e = box_stats(ext.values)
    return DipReport(d, e, d.median - e.median)
