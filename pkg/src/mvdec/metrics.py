"""Clustering evaluation: unsupervised accuracy, NMI, and adjusted Rand index.

All three are invariant under relabeling of either argument.  Accuracy
maximizes the matched fraction over cluster-to-class assignments, solved
exactly as a linear assignment problem on the contingency table.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def _check_labels(pred, truth):
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.min() < 0 or truth.min() < 0:
        raise ValueError("labels must be non-negative")
    return pred, truth


def contingency_table(pred, truth) -> np.ndarray:
    """Counts[i, j] = number of examples with pred == i and truth == j."""
    pred, truth = _check_labels(pred, truth)
    k_pred = int(pred.max()) + 1
    k_true = int(truth.max()) + 1
    counts = np.zeros((k_pred, k_true), dtype=np.int64)
    np.add.at(counts, (pred, truth), 1)
    return counts


def acc(pred, truth) -> float:
    """Best-match clustering accuracy via optimal assignment.

    The contingency table is padded square and turned into a cost matrix
    (max count minus count) so the assignment solver maximizes matches.
    """
    pred, truth = _check_labels(pred, truth)
    counts = contingency_table(pred, truth)
    size = max(counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(padded.max() - padded)
    return float(padded[rows, cols].sum()) / pred.size


def _entropy(counts_1d, n):
    p = counts_1d[counts_1d > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalized by the geometric mean of entropies.

    Natural logarithms.  If both labelings are single-cluster they are
    identical partitions (1.0); if exactly one is, they differ (0.0).
    """
    pred, truth = _check_labels(pred, truth)
    counts = contingency_table(pred, truth)
    n = pred.size
    h_pred = _entropy(counts.sum(axis=1), n)
    h_true = _entropy(counts.sum(axis=0), n)
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    nz = counts > 0
    pij = counts[nz] / n
    outer = np.outer(counts.sum(axis=1), counts.sum(axis=0))[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    return float(mi / np.sqrt(h_pred * h_true))


def ari(pred, truth) -> float:
    """Pair-counting adjusted Rand index with expected-index correction."""
    pred, truth = _check_labels(pred, truth)
    counts = contingency_table(pred, truth)
    n = pred.size

    def comb2(a):
        return a * (a - 1) / 2.0

    sum_ij = comb2(counts.astype(np.float64)).sum()
    sum_rows = comb2(counts.sum(axis=1).astype(np.float64)).sum()
    sum_cols = comb2(counts.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_rows * sum_cols / total
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        # both partitions trivial (all one cluster, or all singletons)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
