"""Per-view clustering layer: soft assignments, KL loss, analytic gradients.

Soft assignments use the Student's-t kernel with one degree of freedom:
q_ij = (1 + ||z_i - mu_j||^2)^-1, normalized per row.  The clustering
loss is KL(P || Q) against a fixed target P.  Both gradients below were
derived from that loss and are verified against finite differences in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

Q_CLAMP = 1e-12


@dataclass
class ClusteringLayer:
    """Learnable centroid set, one row per cluster."""

    centroids: np.ndarray

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2:
            raise ValueError("centroids must be 2-D (k, dim)")
        if self.centroids.shape[0] < 2:
            raise ValueError("need at least 2 centroids")
        k = self.centroids.shape[0]
        for a in range(k):
            for b in range(a + 1, k):
                if np.array_equal(self.centroids[a], self.centroids[b]):
                    raise ValueError(f"centroids {a} and {b} coincide")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _centroids_of(layer) -> np.ndarray:
    if isinstance(layer, ClusteringLayer):
        return layer.centroids
    return np.asarray(layer, dtype=np.float64)


def _check_pair(z, centroids):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or centroids.ndim != 2:
        raise ValueError("embeddings and centroids must be 2-D")
    if z.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"embedding dim {z.shape[1]} does not match centroid dim {centroids.shape[1]}"
        )
    return z


def soft_assign(z, layer) -> np.ndarray:
    """Row-stochastic Student's-t assignments of embeddings to centroids.

    `layer` may be a ClusteringLayer or a raw (k, dim) array.
    """
    centroids = _centroids_of(layer)
    z = _check_pair(z, centroids)
    return kernels.student_t_assign(z, centroids)


def kl_clustering_loss(p, q) -> float:
    """KL(P || Q) with Q clamped at 1e-12 inside the log."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return kernels.kl_divergence(p, q)


def _check_grad_inputs(z, centroids, p, q):
    n, k = z.shape[0], centroids.shape[0]
    for name, a in (("p", p), ("q", q)):
        if np.asarray(a).shape != (n, k):
            raise ValueError(f"{name} must have shape ({n}, {k})")


def grad_centroids(z, layer, p, q) -> np.ndarray:
    """d KL(P||Q) / d mu_j = 2 sum_i (1+||z_i-mu_j||^2)^-1 (q_ij - p_ij)(z_i - mu_j)."""
    centroids = _centroids_of(layer)
    z = _check_pair(z, centroids)
    _check_grad_inputs(z, centroids, p, q)
    return kernels.centroid_gradient(z, centroids, p, q)


def grad_embeddings(z, layer, p, q) -> np.ndarray:
    """d KL(P||Q) / d z_i = 2 sum_j (1+||z_i-mu_j||^2)^-1 (p_ij - q_ij)(z_i - mu_j)."""
    centroids = _centroids_of(layer)
    z = _check_pair(z, centroids)
    _check_grad_inputs(z, centroids, p, q)
    return kernels.embedding_gradient(z, centroids, p, q)


def hard_predict(q) -> np.ndarray:
    """Row argmax of an assignment matrix; ties go to the lowest index."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError("assignment matrix must be 2-D")
    return np.argmax(q, axis=1).astype(np.int64)
