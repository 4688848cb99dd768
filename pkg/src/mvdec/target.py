"""Unified target pipeline: global features, k-means, pseudo-labels, sharpening.

Per-view embeddings are min-max scaled per column and concatenated into
global features.  k-means (k-means++ seeding, Lloyd iterations, multiple
restarts) on the global features yields centroids; Student's-t
similarities to those centroids give pseudo soft assignments, which are
squared and frequency-normalized ("sharpened") into the target
distribution every view is trained against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

FREQ_CLAMP = 1e-12


@dataclass
class GlobalFeatures:
    """Concatenated per-view scaled embeddings plus view column ranges."""

    values: np.ndarray
    view_offsets: list[tuple[int, int]]


@dataclass
class KMeansResult:
    centroids: np.ndarray
    inertia: float
    labels: np.ndarray


def scale_and_concat(embeddings) -> GlobalFeatures:
    """Min-max scale each view's columns to [0, 1] and concatenate.

    Constant columns map to 0.  All views must carry the same number of
    rows.
    """
    mats = [np.asarray(e, dtype=np.float64) for e in embeddings]
    if not mats:
        raise ValueError("need at least one view")
    n = mats[0].shape[0]
    for i, m in enumerate(mats):
        if m.ndim != 2:
            raise ValueError(f"view {i} embeddings must be 2-D")
        if m.shape[0] != n:
            raise ValueError(f"view {i} has {m.shape[0]} rows, expected {n}")
    scaled = [kernels.minmax_columns(m) for m in mats]
    offsets = []
    start = 0
    for m in scaled:
        offsets.append((start, start + m.shape[1]))
        start += m.shape[1]
    return GlobalFeatures(np.hstack(scaled), offsets)


def _values_of(features) -> np.ndarray:
    if isinstance(features, GlobalFeatures):
        return features.values
    return np.asarray(features, dtype=np.float64)


def _plusplus_seed(x, k, rng):
    """k-means++ D^2 seeding; falls back to uniform picks among leftovers."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    chosen = np.full(n, False)
    first = int(rng.integers(n))
    centroids[0] = x[first]
    chosen[first] = True
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
            if chosen[idx]:
                idx = int(np.argmax(d2))
        else:
            idx = int(rng.choice(np.flatnonzero(~chosen)))
        centroids[j] = x[idx]
        chosen[idx] = True
        d2 = np.minimum(d2, np.sum((x - centroids[j]) ** 2, axis=1))
    return centroids


def _lloyd(x, centroids, max_iter):
    n, k = x.shape[0], centroids.shape[0]
    labels, min_d2 = kernels.nearest_centroids(x, centroids)
    for _ in range(max_iter):
        sums, counts = kernels.group_sums(x, labels, k)
        empty = np.flatnonzero(counts == 0)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if empty.size:
            # revive each empty cluster at the point farthest from its
            # current centroid, never reusing the same point twice
            order = np.argsort(min_d2)[::-1]
            taken = 0
            for j in empty:
                centroids[j] = x[order[taken]]
                taken += 1
        new_labels, min_d2 = kernels.nearest_centroids(x, centroids)
        if np.array_equal(new_labels, labels) and not empty.size:
            break
        labels = new_labels
    return centroids, labels, float(min_d2.sum())


def kmeans(features, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding and independent restarts.

    The best run by inertia wins; ties keep the earlier restart.  Empty
    clusters are re-seeded to the point farthest from its assigned
    centroid.  Raises if there are fewer points than clusters.
    """
    x = _values_of(features)
    if x.ndim != 2:
        raise ValueError("features must be 2-D")
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    best = None
    seeds = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0x6B6D]).spawn(restarts)
    for r in range(restarts):
        rng = np.random.default_rng(seeds[r])
        centroids = _plusplus_seed(x, k, rng)
        centroids, labels, inertia = _lloyd(x, centroids, max_iter)
        if best is None or inertia < best.inertia:
            best = KMeansResult(centroids.copy(), inertia, labels.copy())
    return best


def pseudo_assign(features, centroids) -> np.ndarray:
    """Student's-t similarities to global centroids, row-normalized.

    Same kernel as the per-view soft assignments.  `centroids` may be a
    KMeansResult or a raw (k, dim) array.
    """
    x = _values_of(features)
    if isinstance(centroids, KMeansResult):
        centroids = centroids.centroids
    centroids = np.asarray(centroids, dtype=np.float64)
    if x.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match centroid dim {centroids.shape[1]}"
        )
    return kernels.student_t_assign(x, centroids)


def column_frequencies(s) -> np.ndarray:
    """Soft cluster frequencies f_j = sum_i s_ij."""
    return np.asarray(s, dtype=np.float64).sum(axis=0)


def sharpen(s) -> np.ndarray:
    """Square assignments, normalize by cluster frequency, re-normalize rows.

    p_ij = (s_ij^2 / f_j) / sum_j' (s_ij'^2 / f_j') with f_j = sum_i s_ij.
    Zero frequencies are clamped at 1e-12 instead of erroring; callers
    that care (the trainer) flag them via `column_frequencies`.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("assignment matrix must be 2-D")
    freq = np.maximum(s.sum(axis=0), FREQ_CLAMP)
    weighted = (s * s) / freq
    return weighted / weighted.sum(axis=1, keepdims=True)
