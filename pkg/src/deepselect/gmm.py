"""Finite Gaussian mixture fit by hard-EM point estimates.

The four closed-form updates are: per-dimension precision from assigned
squared deviations, mean from the assigned-sample average, hard argmax
assignment under a unit-precision metric (precisions deliberately do not
enter the assignment rule), and weights from cluster counts.  Baseline for
the KLD regularizer path and the initialization target of the DPM engine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from deepselect.kmeans import lloyd

VARIANCE_FLOOR = 1e-6

__all__ = [
    "GmmState",
    "gmm_update_precision",
    "gmm_update_mean",
    "gmm_assign",
    "gmm_update_weights",
    "gmm_objective",
    "fit_gmm",
    "VARIANCE_FLOOR",
]


@dataclass
class GmmState:
    """Point estimates of a K-component diagonal GMM with hard assignments."""

    means: np.ndarray       # (K, d)
    precisions: np.ndarray  # (K, d), strictly positive
    weights: np.ndarray     # (K,), sums to 1
    assignments: np.ndarray  # (N,), values in [0, K)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.precisions = np.asarray(self.precisions, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        k = self.means.shape[0]
        if self.means.ndim != 2:
            raise ValueError("means must be a K x d matrix")
        if self.precisions.shape != self.means.shape:
            raise ValueError("precisions must match the shape of means")
        if not (self.precisions > 0).all():
            raise ValueError("precisions must be strictly positive")
        if self.weights.shape != (k,):
            raise ValueError("weights must be a K-vector")
        if (self.weights < 0).any() or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.assignments.size and (self.assignments.min() < 0 or self.assignments.max() >= k):
            raise ValueError("assignment indices must lie in [0, K)")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.n_components).astype(float)


def _per_cluster_sums(assignments, z, k):
    """Counts, per-cluster sums of z, per-cluster sums of squared deviations."""
    counts = np.bincount(assignments, minlength=k).astype(float)
    d = z.shape[1]
    sums = np.zeros((k, d))
    np.add.at(sums, assignments, z)
    return counts, sums


def gmm_update_precision(state: GmmState, z: np.ndarray) -> np.ndarray:
    """Per-dimension precision: assigned count over assigned squared deviation.

    Empty clusters keep their previous precision; degenerate (zero spread)
    clusters are capped at 1/VARIANCE_FLOOR instead of diverging.
    """
    z = np.asarray(z, dtype=float)
    k = state.n_components
    counts = state.counts()
    sq = np.zeros_like(state.means)
    np.add.at(sq, state.assignments, (z - state.means[state.assignments]) ** 2)
    new = state.precisions.copy()
    occupied = counts > 0
    with np.errstate(divide="ignore"):
        ratio = counts[occupied, None] / sq[occupied]
    new[occupied] = np.minimum(ratio, 1.0 / VARIANCE_FLOOR)
    return new


def gmm_update_mean(state: GmmState, z: np.ndarray) -> np.ndarray:
    """Assigned-sample average per cluster; empty clusters stay frozen."""
    z = np.asarray(z, dtype=float)
    counts, sums = _per_cluster_sums(state.assignments, z, state.n_components)
    new = state.means.copy()
    occupied = counts > 0
    new[occupied] = sums[occupied] / counts[occupied, None]
    return new


def gmm_scores(state: GmmState, z: np.ndarray) -> np.ndarray:
    """(N, K) assignment scores ln(weight) - 0.5 * squared distance."""
    z = np.asarray(z, dtype=float)
    d2 = ((z[:, None, :] - state.means[None, :, :]) ** 2).sum(axis=2)
    with np.errstate(divide="ignore"):
        logw = np.log(state.weights)
    return logw[None, :] - 0.5 * d2


def gmm_assign(state: GmmState, z: np.ndarray) -> np.ndarray:
    """Hard argmax assignment; exact ties break to the lowest cluster index."""
    return np.argmax(gmm_scores(state, z), axis=1)


def gmm_update_weights(state: GmmState) -> np.ndarray:
    """Cluster count over N."""
    n = state.assignments.shape[0]
    if n < 1:
        raise ValueError("need at least one assigned sample")
    return state.counts() / n


def gmm_objective(state: GmmState, z: np.ndarray) -> float:
    """Hard-EM objective: sum over samples of the best assignment score."""
    return float(gmm_scores(state, z).max(axis=1).sum())


def _refreshed(state: GmmState, z: np.ndarray) -> GmmState:
    state = replace(state, means=gmm_update_mean(state, z))
    state = replace(state, precisions=gmm_update_precision(state, z))
    return replace(state, weights=gmm_update_weights(state))


def fit_gmm(z: np.ndarray, k: int, max_iters: int = 100, seed=None, init: GmmState | None = None) -> GmmState:
    """Hard-EM fit: k-means init, then assign/mean/precision/weight cycles.

    Stops when assignments reach a fixed point or after max_iters cycles.
    Deterministic for a fixed seed.  An explicit ``init`` state warm-starts
    the cycles in place of the k-means initialization.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError("data must be an N x d matrix")
    n = z.shape[0]
    if init is None:
        if n < k:
            raise ValueError(f"need at least k={k} samples, got {n}")
        rng = np.random.default_rng(seed)
        centers, labels = lloyd(z, k, rng)
        state = GmmState(
            means=centers,
            precisions=np.ones_like(centers),
            weights=np.full(k, 1.0 / k),
            assignments=labels,
        )
        state = _refreshed(state, z)
    else:
        state = _refreshed(init, z)

    for _ in range(max_iters):
        labels = gmm_assign(state, z)
        stable = np.array_equal(labels, state.assignments)
        state = replace(state, assignments=labels)
        state = _refreshed(state, z)
        if stable:
            break
    return state
