"""Clustering-accuracy evaluation and run summaries.

Accuracy is the best one-to-one mapping between predicted clusters and
true classes, solved as a linear assignment problem on the (zero-padded)
confusion matrix.  Predicted clusters left unmatched contribute nothing,
which is the honest reading when the estimated cluster count exceeds the
class count.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "LabeledAssignment",
    "clustering_accuracy",
    "estimated_k_report",
    "summarize",
    "format_summary",
]


@dataclass(frozen=True)
class LabeledAssignment:
    """Predicted cluster indices paired with ground-truth class labels."""

    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        predicted = np.asarray(self.predicted, dtype=np.int64)
        truth = np.asarray(self.truth, dtype=np.int64)
        if predicted.ndim != 1 or truth.ndim != 1:
            raise ValueError("predicted and truth must be 1-d integer vectors")
        if predicted.shape != truth.shape:
            raise ValueError(f"length mismatch: {predicted.shape[0]} vs {truth.shape[0]}")
        if predicted.size == 0:
            raise ValueError("assignment must be nonempty")
        object.__setattr__(self, "predicted", predicted)
        object.__setattr__(self, "truth", truth)


def clustering_accuracy(assignment: LabeledAssignment) -> float:
    """Fraction correct under the optimal one-to-one cluster/class mapping."""
    pred_ids, pred = np.unique(assignment.predicted, return_inverse=True)
    true_ids, true = np.unique(assignment.truth, return_inverse=True)
    size = max(pred_ids.size, true_ids.size)
    confusion = np.zeros((size, size), dtype=np.int64)
    np.add.at(confusion, (pred, true), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum()) / assignment.predicted.size


def estimated_k_report(state) -> tuple[int, np.ndarray]:
    """Estimated cluster count plus the occupancy sizes behind it.

    Accepts a fitted DPM state (active mask respected) or a GMM state.
    An unfitted DPM state reports its full truncation with zero sizes.
    """
    assignments = np.asarray(state.assignments, dtype=np.int64)
    k = state.means.shape[0]
    counts = np.bincount(assignments, minlength=k) if assignments.size else np.zeros(k, dtype=np.int64)
    active = getattr(state, "active", None)
    if active is not None:
        if assignments.size == 0:
            mask = np.asarray(active, dtype=bool)
        else:
            mask = np.asarray(active, dtype=bool) & (counts > 0)
    else:
        mask = counts > 0
    return int(mask.sum()), counts[mask]


def summarize(records) -> list[tuple[str, float, int]]:
    """Aggregate (method, accuracy, khat) records per method.

    Returns one row per method in first-appearance order with the mean
    accuracy and the modal estimated cluster count (smallest mode on ties).
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one run record")
    order: list[str] = []
    acc: dict[str, list[float]] = {}
    khat: dict[str, list[int]] = {}
    for method, accuracy, k in records:
        if method not in acc:
            order.append(method)
            acc[method] = []
            khat[method] = []
        acc[method].append(float(accuracy))
        khat[method].append(int(k))
    rows = []
    for method in order:
        counts = Counter(khat[method])
        best = max(counts.values())
        mode = min(k for k, c in counts.items() if c == best)
        rows.append((method, float(np.mean(acc[method])), mode))
    return rows


def format_summary(rows, delimiter: str | None = None) -> str:
    """Render summary rows as aligned plain text or delimited lines."""
    if delimiter is not None:
        lines = [delimiter.join((m, repr(a), str(k))) for m, a, k in rows]
        return "\n".join(lines) + "\n"
    header = ("method", "acc", "khat")
    body = [(m, f"{a:.4f}", str(k)) for m, a, k in rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(3)]
    lines = ["  ".join(val.ljust(widths[i]) for i, val in enumerate(row)) for row in [header, *body]]
    return "\n".join(line.rstrip() for line in lines) + "\n"
