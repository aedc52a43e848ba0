"""Seeded Lloyd k-means, used to initialize the mixture fits."""

from __future__ import annotations

import numpy as np


def nearest_center(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the closest center per sample; ties go to the lowest index."""
    d2 = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def lloyd(z: np.ndarray, k: int, rng: np.random.Generator, max_iters: int = 50):
    """Lloyd iterations from k uniformly chosen data points.

    Centers start at distinct data points when possible (sampled with
    replacement only if n < k).  Returns (centers, labels).
    """
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < 1:
        raise ValueError("need at least one sample")
    idx = rng.choice(n, size=k, replace=n < k)
    return lloyd_from(z, z[idx].copy(), max_iters=max_iters)


def lloyd_from(z: np.ndarray, centers: np.ndarray, max_iters: int = 50):
    """Lloyd iterations from explicit starting centers.

    Empty clusters keep their previous center.  Returns (centers, labels).
    """
    z = np.asarray(z, dtype=float)
    centers = np.asarray(centers, dtype=float).copy()
    labels = nearest_center(z, centers)
    for _ in range(max_iters):
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = z[members].mean(axis=0)
        new_labels = nearest_center(z, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels
