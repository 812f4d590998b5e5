"""Weighted K-means over stacked per-bin embeddings (baseline inference)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masks import MaskTensor


@dataclass
class KmeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list = field(default_factory=list)


def _sq_dists(points, centroids):
    d = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def _plusplus_init(points, weights, k, rng):
    # D^2 sampling restricted to positively weighted points
    candidates = np.flatnonzero(weights > 0)
    p = weights[candidates] / weights[candidates].sum()
    centroids = [points[rng.choice(candidates, p=p)]]
    for _ in range(1, k):
        d2 = _sq_dists(points[candidates], np.array(centroids)).min(axis=1)
        score = weights[candidates] * d2
        if score.sum() <= 0:
            idx = rng.choice(candidates)
        else:
            idx = rng.choice(candidates, p=score / score.sum())
        centroids.append(points[idx])
    return np.array(centroids, dtype=np.float64)


def _lloyd(points, weights, centroids, max_iter):
    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(points, centroids)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(np.sum(weights * d2[np.arange(len(points)), new_labels])))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centroids.shape[0]):
            member = labels == j
            w = weights[member]
            if w.sum() > 0:
                centroids[j] = (w[:, None] * points[member]).sum(axis=0) / w.sum()
            else:
                # empty cluster: move it onto the worst-served weighted point
                cost = weights * d2[np.arange(len(points)), labels]
                centroids[j] = points[np.argmax(cost)]
    d2 = _sq_dists(points, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(np.sum(weights * d2[np.arange(len(points)), labels]))
    history.append(inertia)
    return labels, centroids, inertia, it, history


def kmeans(
    points: np.ndarray,
    k: int,
    restarts: int = 5,
    seed: int = 0,
    bin_weights: np.ndarray | None = None,
    max_iter: int = 300,
) -> KmeansResult:
    """K-means++ seeded Lloyd iterations; the lowest-inertia restart wins.

    Zero-weight points take no part in seeding or centroid updates but are
    still labelled with their nearest centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= number of points")
    weights = np.ones(n) if bin_weights is None else np.asarray(bin_weights, dtype=np.float64)
    if weights.shape != (n,) or np.any(weights < 0):
        raise ValueError("bin_weights must be a non-negative vector, one per point")
    if not np.any(weights > 0):
        raise ValueError("all bin weights are zero")
    n_distinct = np.unique(points[weights > 0], axis=0).shape[0]
    if k > n_distinct:
        raise ValueError(f"k={k} exceeds the {n_distinct} distinct weighted points")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        init = _plusplus_init(points, weights, k, rng)
        labels, cents, inertia, iters, hist = _lloyd(points, weights, init, max_iter)
        if best is None or inertia < best.inertia:
            best = KmeansResult(labels, cents, inertia, iters, hist)
    return best


def labels_to_masks(labels: np.ndarray, k: int, shape) -> MaskTensor:
    lab = np.asarray(labels).reshape(shape)
    masks = (lab[None, :, :] == np.arange(k)[:, None, None]).astype(np.float64)
    return MaskTensor(masks, "binary")


def cluster_masks(points, k, shape, **kwargs):
    result = kmeans(points, k, **kwargs)
    return result, labels_to_masks(result.labels, k, shape)
