"""Hot numeric kernels with numba and pure-numpy implementations.

Every kernel exists twice: a loop version compiled with ``@njit`` and a
vectorized numpy version.  The public functions dispatch on the backend
chosen in :mod:`mvdec.backend`.  Dense-layer matrix products are *not*
here on purpose: they are BLAS-bound through ``np.dot`` either way.

All kernels take and return C-contiguous float64 arrays (int64 for
labels).  `benchmarks/backend_bench.py` times the two flavors side by
side.
"""

from __future__ import annotations

import numpy as np

from . import backend

_Q_CLAMP = 1e-12


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------


def _student_t_assign_np(z, centroids):
    diff = z[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    u = 1.0 / (1.0 + d2)
    return u / u.sum(axis=1, keepdims=True)


def _kl_divergence_np(p, q):
    qc = np.maximum(q, _Q_CLAMP)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * np.log(p / qc)
    terms[p <= 0.0] = 0.0
    return float(terms.sum())


def _centroid_gradient_np(z, centroids, p, q):
    diff = z[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    w = (q - p) / (1.0 + d2)
    return 2.0 * np.einsum("nk,nkd->kd", w, diff)


def _embedding_gradient_np(z, centroids, p, q):
    diff = z[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    w = (p - q) / (1.0 + d2)
    return 2.0 * np.einsum("nk,nkd->nd", w, diff)


def _nearest_centroids_np(x, centroids):
    diff = x[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    return labels, d2[np.arange(x.shape[0]), labels]


def _group_sums_np(x, labels, k):
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def _minmax_columns_np(x):
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    out = x - lo
    nonconst = span > 0.0
    out[:, nonconst] /= span[nonconst]
    out[:, ~nonconst] = 0.0
    return out


# ---------------------------------------------------------------------------
# numba loop implementations (same contracts as above)
# ---------------------------------------------------------------------------


def _student_t_assign_loops(z, centroids):
    n, d = z.shape
    k = centroids.shape[0]
    q = np.empty((n, k))
    for i in range(n):
        total = 0.0
        for j in range(k):
            d2 = 0.0
            for a in range(d):
                delta = z[i, a] - centroids[j, a]
                d2 += delta * delta
            u = 1.0 / (1.0 + d2)
            q[i, j] = u
            total += u
        for j in range(k):
            q[i, j] /= total
    return q


def _kl_divergence_loops(p, q):
    n, k = p.shape
    total = 0.0
    for i in range(n):
        for j in range(k):
            pij = p[i, j]
            if pij > 0.0:
                qij = q[i, j]
                if qij < _Q_CLAMP:
                    qij = _Q_CLAMP
                total += pij * np.log(pij / qij)
    return total


def _centroid_gradient_loops(z, centroids, p, q):
    n, d = z.shape
    k = centroids.shape[0]
    grad = np.zeros((k, d))
    for i in range(n):
        for j in range(k):
            d2 = 0.0
            for a in range(d):
                delta = z[i, a] - centroids[j, a]
                d2 += delta * delta
            w = 2.0 * (q[i, j] - p[i, j]) / (1.0 + d2)
            for a in range(d):
                grad[j, a] += w * (z[i, a] - centroids[j, a])
    return grad


def _embedding_gradient_loops(z, centroids, p, q):
    n, d = z.shape
    k = centroids.shape[0]
    grad = np.zeros((n, d))
    for i in range(n):
        for j in range(k):
            d2 = 0.0
            for a in range(d):
                delta = z[i, a] - centroids[j, a]
                d2 += delta * delta
            w = 2.0 * (p[i, j] - q[i, j]) / (1.0 + d2)
            for a in range(d):
                grad[i, a] += w * (z[i, a] - centroids[j, a])
    return grad


def _nearest_centroids_loops(x, centroids):
    n, d = x.shape
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n)
    for i in range(n):
        best = -1
        best_d2 = np.inf
        for j in range(k):
            d2 = 0.0
            for a in range(d):
                delta = x[i, a] - centroids[j, a]
                d2 += delta * delta
            if d2 < best_d2:
                best_d2 = d2
                best = j
        labels[i] = best
        dists[i] = best_d2
    return labels, dists


def _group_sums_loops(x, labels, k):
    n, d = x.shape
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for a in range(d):
            sums[j, a] += x[i, a]
    return sums, counts


def _minmax_columns_loops(x):
    n, d = x.shape
    out = np.empty((n, d))
    for a in range(d):
        lo = x[0, a]
        hi = x[0, a]
        for i in range(1, n):
            v = x[i, a]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        span = hi - lo
        if span > 0.0:
            for i in range(n):
                out[i, a] = (x[i, a] - lo) / span
        else:
            for i in range(n):
                out[i, a] = 0.0
    return out


_NUMPY_IMPLS = {
    "student_t_assign": _student_t_assign_np,
    "kl_divergence": _kl_divergence_np,
    "centroid_gradient": _centroid_gradient_np,
    "embedding_gradient": _embedding_gradient_np,
    "nearest_centroids": _nearest_centroids_np,
    "group_sums": _group_sums_np,
    "minmax_columns": _minmax_columns_np,
}

if backend.HAVE_NUMBA:
    from numba import njit

    _NUMBA_IMPLS = {
        "student_t_assign": njit(cache=True)(_student_t_assign_loops),
        "kl_divergence": njit(cache=True)(_kl_divergence_loops),
        "centroid_gradient": njit(cache=True)(_centroid_gradient_loops),
        "embedding_gradient": njit(cache=True)(_embedding_gradient_loops),
        "nearest_centroids": njit(cache=True)(_nearest_centroids_loops),
        "group_sums": njit(cache=True)(_group_sums_loops),
        "minmax_columns": njit(cache=True)(_minmax_columns_loops),
    }
else:  # pragma: no cover - exercised only without numba
    _NUMBA_IMPLS = {}


def _impl(name):
    if backend.get_backend() == "numba":
        return _NUMBA_IMPLS[name]
    return _NUMPY_IMPLS[name]


def _as_f64(a):
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


# ---------------------------------------------------------------------------
# public dispatchers
# ---------------------------------------------------------------------------


def student_t_assign(z, centroids):
    """Row-normalized (1 + squared distance)^-1 similarities, shape (n, k)."""
    return _impl("student_t_assign")(_as_f64(z), _as_f64(centroids))


def kl_divergence(p, q):
    """sum_ij p_ij * log(p_ij / q_ij) with q clamped at 1e-12; 0*log(0) := 0."""
    return float(_impl("kl_divergence")(_as_f64(p), _as_f64(q)))


def centroid_gradient(z, centroids, p, q):
    """Gradient of the KL clustering loss w.r.t. each centroid row."""
    return _impl("centroid_gradient")(_as_f64(z), _as_f64(centroids), _as_f64(p), _as_f64(q))


def embedding_gradient(z, centroids, p, q):
    """Gradient of the KL clustering loss w.r.t. each embedded point."""
    return _impl("embedding_gradient")(_as_f64(z), _as_f64(centroids), _as_f64(p), _as_f64(q))


def nearest_centroids(x, centroids):
    """(labels, squared distances) of each row's nearest centroid."""
    return _impl("nearest_centroids")(_as_f64(x), _as_f64(centroids))


def group_sums(x, labels, k):
    """Per-label row sums and counts; labels must lie in [0, k)."""
    x = _as_f64(x)
    labels = np.ascontiguousarray(np.asarray(labels, dtype=np.int64))
    if labels.ndim != 1 or labels.size != x.shape[0]:
        raise ValueError("labels must be 1-D with one entry per row")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    return _impl("group_sums")(x, labels, int(k))


def minmax_columns(x):
    """Scale each column to [0, 1]; constant columns map to 0."""
    return _impl("minmax_columns")(_as_f64(x))
