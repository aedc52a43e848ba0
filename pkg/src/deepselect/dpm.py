"""Truncated Dirichlet-process Gaussian mixture fit by variational expectations.

The model-selection engine: T-component truncated stick-breaking mixture
whose posterior expectations (precision, mean, hard assignment, stick
fraction) are cycled until the assignments reach a fixed point, with
insignificant clusters pruned along the way.  Assignments use a
unit-precision squared-distance metric plus the stick-breaking log terms;
precisions do not enter the assignment rule.  The stick update is the raw
count ratio (not the conjugate Beta posterior mean), clamped into [0, 1);
with the default weight prior (omega0 = 2000) the clamp is inert.

The expectation cycle alone stalls in local optima where one data cluster
stays carved into balanced duplicates or keeps a far-tail shard: with a
large omega0 the stick terms saturate at log-count ratios, which cannot
sweep a boundary past the last few points.  ``fit_dpm`` therefore also
runs a redundancy-elimination pass at the prune cadence: drop one cluster,
rehome its samples by the usual assignment rule, relax for a few cycles,
and keep the drop only if the assignment objective (the quantity the hard
updates coordinate-ascend) did not decrease.  Merges are greedy from the
least significant cluster upward and deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from deepselect.kmeans import lloyd

logger = logging.getLogger(__name__)

STICK_CEIL = 1.0 - 1e-9
LOG_FLOOR = 1e-12        # floor inside logarithms only
PRECISION_FLOOR = 1e-12

__all__ = [
    "DpmHyper",
    "DpmState",
    "dpm_update_precision",
    "dpm_update_mean",
    "dpm_assign",
    "dpm_assignment_scores",
    "dpm_update_sticks",
    "stick_weights",
    "prune_clusters",
    "assignment_objective",
    "fit_dpm",
    "estimate_k",
    "fresh_state",
]


@dataclass(frozen=True)
class DpmHyper:
    """Prior hyperparameters: Beta(1, omega0) sticks, Gamma(a0, b0)
    precisions, Gaussian(m0, 1/lambda0) means.  m0 may be a scalar or a
    d-vector (e.g. the data mean)."""

    omega0: float = 2000.0
    a0: float = 1.25
    b0: float = 0.25
    m0: float | np.ndarray = 1.0
    lambda0: float = 0.5

    def __post_init__(self):
        for name in ("omega0", "a0", "b0", "lambda0"):
            value = getattr(self, name)
            if not np.isscalar(value) or not value > 0:
                raise ValueError(f"{name} must be a positive scalar, got {value}")
        m0 = self.m0
        if not np.all(np.isfinite(np.asarray(m0, dtype=float))):
            raise ValueError("m0 must be finite")


@dataclass
class DpmState:
    """Posterior expectations of the truncated mixture plus the active mask."""

    means: np.ndarray        # (T, d)  E[eta]
    precisions: np.ndarray   # (T, d)  E[tau], strictly positive
    sticks: np.ndarray       # (T,)    E[v] in [0, 1)
    assignments: np.ndarray  # (N,)    hard one-hot indices in [0, T)
    active: np.ndarray       # (T,) bool
    hyper: DpmHyper = field(default_factory=DpmHyper)
    truncation: int = 0

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.precisions = np.asarray(self.precisions, dtype=float)
        self.sticks = np.asarray(self.sticks, dtype=float)
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.active = np.asarray(self.active, dtype=bool)
        t = self.means.shape[0]
        if self.truncation == 0:
            self.truncation = t
        if self.truncation != t:
            raise ValueError(f"truncation {self.truncation} does not match {t} components")
        if self.means.ndim != 2 or self.precisions.shape != self.means.shape:
            raise ValueError("means and precisions must be matching T x d matrices")
        if not (self.precisions > 0).all():
            raise ValueError("precisions must be strictly positive")
        if self.sticks.shape != (t,) or self.active.shape != (t,):
            raise ValueError("sticks and active mask must be T-vectors")
        if (self.sticks < 0).any() or (self.sticks > 1).any():
            raise ValueError("stick fractions must lie in [0, 1]")
        if self.assignments.size and (self.assignments.min() < 0 or self.assignments.max() >= t):
            raise ValueError("assignment indices must lie in [0, T)")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.truncation).astype(float)


def fresh_state(truncation: int, dim: int, hyper: DpmHyper | None = None) -> DpmState:
    """Unfitted state at the prior expectations, with no assignments."""
    hyper = hyper or DpmHyper()
    m0 = np.broadcast_to(np.asarray(hyper.m0, dtype=float), (dim,))
    prior_tau = max((hyper.a0 - 1.0) / hyper.b0, PRECISION_FLOOR)
    return DpmState(
        means=np.tile(m0, (truncation, 1)),
        precisions=np.full((truncation, dim), prior_tau),
        sticks=np.full(truncation, 1.0 / (1.0 + hyper.omega0)),
        assignments=np.empty(0, dtype=np.int64),
        active=np.ones(truncation, dtype=bool),
        hyper=hyper,
        truncation=truncation,
    )


def dpm_update_precision(state: DpmState, z: np.ndarray) -> np.ndarray:
    """E[tau] per dimension: (count/2 + a0 - 1) over
    (b0 + (assigned squared deviation + lambda0*(mean - m0)^2)/2).

    Empty clusters land on the prior-only value once their mean has been
    pulled back to m0.  Nonpositive numerators (a0 <= 1 with an empty
    cluster) are clamped to a positivity floor and logged.  Inactive
    clusters stay frozen.
    """
    z = np.asarray(z, dtype=float)
    h = state.hyper
    counts = state.counts()
    sq = np.zeros_like(state.means)
    np.add.at(sq, state.assignments, (z - state.means[state.assignments]) ** 2)
    numer = 0.5 * counts[:, None] + (h.a0 - 1.0)
    denom = h.b0 + 0.5 * (sq + h.lambda0 * (state.means - np.asarray(h.m0, dtype=float)) ** 2)
    new = numer / denom
    if (new <= 0).any():
        logger.warning("precision update clamped to positivity floor for %d entries", int((new <= 0).sum()))
        new = np.maximum(new, PRECISION_FLOOR)
    return np.where(state.active[:, None], new, state.precisions)


def dpm_update_mean(state: DpmState, z: np.ndarray) -> np.ndarray:
    """E[eta]: (assigned sum + lambda0*m0) / (count + lambda0).

    Shrinks small clusters toward m0; empty clusters return exactly m0.
    Inactive clusters stay frozen.
    """
    z = np.asarray(z, dtype=float)
    h = state.hyper
    counts = state.counts()
    sums = np.zeros_like(state.means)
    np.add.at(sums, state.assignments, z)
    m0 = np.broadcast_to(np.asarray(h.m0, dtype=float), (state.dim,))
    new = (sums + h.lambda0 * m0) / (counts[:, None] + h.lambda0)
    return np.where(state.active[:, None], new, state.means)


def dpm_assignment_scores(state: DpmState, z: np.ndarray) -> np.ndarray:
    """(N, T) scores: -0.5*|z - mean|^2 + ln E[v_k] + sum_{l<k} ln(1 - E[v_l]).

    Stick fractions are floored at LOG_FLOOR inside the logarithms so the
    score stays evaluable for freshly emptied clusters; inactive clusters
    score -inf and can never be chosen.
    """
    z = np.asarray(z, dtype=float)
    d2 = ((z[:, None, :] - state.means[None, :, :]) ** 2).sum(axis=2)
    v = np.clip(state.sticks, LOG_FLOOR, STICK_CEIL)
    log_v = np.log(v)
    log_rest = np.concatenate(([0.0], np.cumsum(np.log1p(-v))[:-1]))
    scores = -0.5 * d2 + (log_v + log_rest)[None, :]
    scores[:, ~state.active] = -np.inf
    return scores


def dpm_assign(state: DpmState, z: np.ndarray) -> np.ndarray:
    """Hard argmax assignment over active clusters; ties to the lowest index."""
    if not state.active.any():
        raise ValueError("degenerate state: no active clusters to assign to")
    return np.argmax(dpm_assignment_scores(state, z), axis=1)


def dpm_update_sticks(state: DpmState) -> np.ndarray:
    """E[v_k]: count_k / (count beyond k + omega0 - 1), clamped to [0, 1).

    The raw ratio can leave [0, 1] for small omega0; values are clamped to
    [0, STICK_CEIL] (logged when the clamp fires).  Inactive clusters hold
    zero stick mass.
    """
    counts = state.counts()
    beyond = np.concatenate((np.cumsum(counts[::-1])[::-1][1:], [0.0]))
    denom = beyond + state.hyper.omega0 - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(denom > 0, counts / np.maximum(denom, LOG_FLOOR), np.inf)
    clamped = np.clip(raw, 0.0, STICK_CEIL)
    if (raw > STICK_CEIL).any():
        logger.warning("stick update clamped to %.0e for %d clusters", STICK_CEIL, int((raw > STICK_CEIL).sum()))
    return np.where(state.active, clamped, 0.0)


def stick_weights(sticks: np.ndarray) -> np.ndarray:
    """Normalized weights pi_k = v_k * prod_{l<k} (1 - v_l).

    The weights plus the residual prod_k (1 - v_k) form a unit measure.
    """
    v = np.asarray(sticks, dtype=float)
    if (v < 0).any() or (v > 1).any():
        raise ValueError("stick fractions must lie in [0, 1]")
    before = np.concatenate(([1.0], np.cumprod(1.0 - v)[:-1]))
    return v * before


def prune_clusters(state: DpmState, threshold: float) -> np.ndarray:
    """Active mask with clusters below threshold * max weight switched off.

    The comparison uses the stick-breaking weights of the currently active
    clusters; a prune that would remove everything is refused (the largest
    cluster is kept).  The active count never increases.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"prune threshold must lie in (0, 1), got {threshold}")
    pi = stick_weights(state.sticks)
    pi = np.where(state.active, pi, 0.0)
    keep = state.active & (pi >= threshold * pi.max())
    if not keep.any():
        keep = np.zeros_like(state.active)
        keep[int(np.argmax(pi))] = True
    return keep


def estimate_k(state: DpmState) -> int:
    """Active clusters holding at least one sample; T for an unfitted state."""
    if state.assignments.size == 0:
        return int(state.active.sum())
    occupied = np.bincount(state.assignments, minlength=state.truncation) > 0
    return int((state.active & occupied).sum())


def _apply_mask(state: DpmState, mask: np.ndarray) -> DpmState:
    """Deactivate clusters outside the mask and zero their stick mass."""
    if mask.all():
        return state
    return replace(state, active=mask, sticks=np.where(mask, state.sticks, 0.0))


def _refreshed(state: DpmState, z: np.ndarray) -> DpmState:
    """Mean, precision, and stick expectations from the current assignments."""
    state = replace(state, means=dpm_update_mean(state, z))
    state = replace(state, precisions=dpm_update_precision(state, z))
    return replace(state, sticks=dpm_update_sticks(state))


def assignment_objective(state: DpmState, z: np.ndarray) -> float:
    """Sum over samples of the best assignment score; the quantity the
    hard expectation updates coordinate-ascend."""
    return float(dpm_assignment_scores(state, z).max(axis=1).sum())


def _relaxed(state: DpmState, z: np.ndarray, cycles: int) -> DpmState:
    for _ in range(cycles):
        state = replace(state, assignments=dpm_assign(state, z))
        state = _refreshed(state, z)
    return state


def _redundancy_pass(state: DpmState, z: np.ndarray, relax_cycles: int = 3) -> DpmState:
    """Greedily drop clusters whose removal does not lower the objective.

    Candidates are tried from the least significant stick weight upward;
    a dropped cluster's samples rehome through the standard assignment and
    the trial relaxes for a few update cycles before being scored.
    """
    objective = assignment_objective(state, z)
    improved = True
    while improved and state.active.sum() > 1:
        improved = False
        pi = np.where(state.active, stick_weights(state.sticks), np.inf)
        for k in np.argsort(pi, kind="stable"):
            if not state.active[k] or state.active.sum() == 1:
                continue
            mask = state.active.copy()
            mask[k] = False
            trial = _apply_mask(state, mask)
            moved = trial.assignments == k
            if moved.any():
                scores = dpm_assignment_scores(trial, z[moved])
                assignments = trial.assignments.copy()
                assignments[moved] = np.argmax(scores, axis=1)
                trial = replace(trial, assignments=assignments)
            trial = _relaxed(_refreshed(trial, z), z, relax_cycles)
            trial_objective = assignment_objective(trial, z)
            if trial_objective >= objective - 1e-9:
                state, objective, improved = trial, trial_objective, True
                break
    return state


def fit_dpm(
    z: np.ndarray,
    truncation: int,
    hyper: DpmHyper | None = None,
    max_iters: int = 300,
    seed=None,
    prune_threshold: float = 0.05,
    prune_every: int = 5,
    init: DpmState | None = None,
    merge_redundant: bool = True,
) -> DpmState:
    """Fit the truncated mixture: k-means init, then assignment/mean/
    precision/stick cycles, with redundancy elimination and pruning every
    ``prune_every`` iterations.

    Stops once the assignments are a fixed point and a final prune check
    leaves the active set unchanged, or after max_iters cycles.
    Deterministic for a fixed seed; ``init`` warm-starts from an earlier
    fitted state (its active mask is preserved, so the active-cluster
    count never increases across repeated fits).
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError("data must be an N x d matrix")
    if z.shape[0] < 1:
        raise ValueError("need at least one sample")
    if truncation < 1:
        raise ValueError(f"truncation must be >= 1, got {truncation}")

    if init is None:
        hyper = hyper or DpmHyper()
        rng = np.random.default_rng(seed)
        centers, labels = lloyd(z, truncation, rng)
        state = DpmState(
            means=centers,
            precisions=np.ones_like(centers),
            sticks=np.zeros(truncation),
            assignments=labels,
            active=np.ones(truncation, dtype=bool),
            hyper=hyper,
            truncation=truncation,
        )
    else:
        state = init if hyper is None else replace(init, hyper=hyper)
    state = _refreshed(state, z)

    for it in range(max_iters):
        labels = dpm_assign(state, z)
        stable = np.array_equal(labels, state.assignments)
        state = replace(state, assignments=labels)
        state = _refreshed(state, z)
        if (it + 1) % prune_every == 0 or stable:
            active_before = state.active.copy()
            if merge_redundant:
                state = _redundancy_pass(state, z)
            mask = prune_clusters(state, prune_threshold)
            if not np.array_equal(mask, state.active):
                state = _apply_mask(state, mask)
            if not np.array_equal(active_before, state.active):
                stable = False
        if stable:
            break
    return state
