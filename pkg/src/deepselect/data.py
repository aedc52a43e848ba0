"""Feature-matrix ingestion and synthetic mixture generation.

Two on-disk formats carry feature matrices: a human-readable text format
(full float64 precision, exact round-trip) and a compact binary format
(little-endian float32 payload, the expected carrier for externally
extracted feature vectors).  Both are versioned by their header/magic and
are sniffed automatically on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

TEXT_MAGIC = "FMTX1"
BINARY_MAGIC = b"FMBN1"

__all__ = [
    "FeatureMatrix",
    "SynthSpec",
    "load_features",
    "save_features",
    "synth_mixture",
]


@dataclass
class FeatureMatrix:
    """N x D matrix of finite feature values with optional integer labels."""

    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.size == 0:
            raise ValueError("values must be a nonempty N x D matrix")
        if not np.isfinite(self.values).all():
            n, d = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at row {n}, column {d}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.values.shape[0],):
                raise ValueError("labels must have one entry per row")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SynthSpec:
    """Isotropic Gaussian blob layout: k unit-variance clusters of
    n_per points each in d dimensions, centers pairwise at least
    ``separation`` standard deviations apart."""

    k: int
    d: int
    n_per: int
    separation: float
    seed: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.n_per < 1:
            raise ValueError(f"n_per must be >= 1, got {self.n_per}")
        if not self.separation > 0:
            raise ValueError(f"separation must be positive, got {self.separation}")


def synth_mixture(spec: SynthSpec, max_tries: int = 100) -> FeatureMatrix:
    """Seeded blobs with labels; deterministic for a fixed spec.

    Centers are drawn at scale separation/2 per coordinate and redrawn
    until every pair is at least ``separation`` apart; in low dimension an
    infeasible request runs out of retries and is rejected.
    """
    rng = np.random.default_rng(spec.seed)
    scale = 0.5 * spec.separation * max(1.0, spec.k ** (1.0 / spec.d))
    centers = None
    for _ in range(max_tries):
        proposal = rng.normal(0.0, scale, size=(spec.k, spec.d))
        if spec.k == 1:
            centers = proposal
            break
        diff = proposal[:, None, :] - proposal[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        if dist[np.triu_indices(spec.k, k=1)].min() >= spec.separation:
            centers = proposal
            break
    if centers is None:
        raise ValueError(
            f"could not place {spec.k} centers at separation {spec.separation} in {spec.d} dimensions "
            f"after {max_tries} tries"
        )
    points = centers[:, None, :] + rng.standard_normal((spec.k, spec.n_per, spec.d))
    labels = np.repeat(np.arange(spec.k), spec.n_per)
    return FeatureMatrix(points.reshape(-1, spec.d), labels)


def save_features(matrix: FeatureMatrix, path, fmt: str = "binary") -> None:
    """Write a feature matrix in the text or binary format."""
    if fmt == "text":
        _save_text(matrix, path)
    elif fmt == "binary":
        _save_binary(matrix, path)
    else:
        raise ValueError(f"unknown feature format {fmt!r} (expected 'text' or 'binary')")


def load_features(path) -> FeatureMatrix:
    """Read a feature matrix, sniffing the format from the header bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(BINARY_MAGIC))
    if not head:
        raise ValueError(f"empty file: {path}")
    if head == BINARY_MAGIC:
        return _load_binary(path)
    return _load_text(path)


def _save_text(matrix: FeatureMatrix, path) -> None:
    has_labels = matrix.labels is not None
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{TEXT_MAGIC} {matrix.n} {matrix.dim} {int(has_labels)}\n")
        for i in range(matrix.n):
            row = " ".join(repr(float(v)) for v in matrix.values[i])
            if has_labels:
                row += f" {int(matrix.labels[i])}"
            fh.write(row + "\n")


def _load_text(path) -> FeatureMatrix:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != TEXT_MAGIC:
            raise ValueError(f"malformed header in {path}: expected '{TEXT_MAGIC} N D has_labels'")
        try:
            n, d, has_labels = int(header[1]), int(header[2]), int(header[3])
        except ValueError as exc:
            raise ValueError(f"malformed header in {path}: {' '.join(header)}") from exc
        if n < 1 or d < 1 or has_labels not in (0, 1):
            raise ValueError(f"malformed header in {path}: {' '.join(header)}")
        values = np.empty((n, d))
        labels = np.empty(n, dtype=np.int64) if has_labels else None
        width = d + has_labels
        for i in range(n):
            line = fh.readline()
            if not line:
                raise ValueError(f"truncated file {path}: expected {n} rows, got {i}")
            parts = line.split()
            if len(parts) != width:
                raise ValueError(f"truncated file {path}: row {i} has {len(parts)} fields, expected {width}")
            values[i] = [float(tok) for tok in parts[:d]]
            if has_labels:
                labels[i] = int(parts[d])
    return FeatureMatrix(values, labels)


def _save_binary(matrix: FeatureMatrix, path) -> None:
    has_labels = matrix.labels is not None
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IIB", matrix.n, matrix.dim, int(has_labels)))
        fh.write(matrix.values.astype("<f4").tobytes(order="C"))
        if has_labels:
            fh.write(matrix.labels.astype("<i4").tobytes())


def _load_binary(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    header_size = len(BINARY_MAGIC) + struct.calcsize("<IIB")
    if len(blob) < header_size:
        raise ValueError(f"malformed header in {path}: file shorter than the binary header")
    n, d, has_labels = struct.unpack_from("<IIB", blob, len(BINARY_MAGIC))
    if n < 1 or d < 1 or has_labels not in (0, 1):
        raise ValueError(f"malformed header in {path}: N={n} D={d} has_labels={has_labels}")
    need = header_size + 4 * n * d + (4 * n if has_labels else 0)
    if len(blob) != need:
        raise ValueError(f"truncated file {path}: expected {need} bytes, got {len(blob)}")
    values = np.frombuffer(blob, dtype="<f4", count=n * d, offset=header_size).reshape(n, d)
    labels = None
    if has_labels:
        labels = np.frombuffer(blob, dtype="<i4", count=n, offset=header_size + 4 * n * d).astype(np.int64)
    return FeatureMatrix(values.astype(np.float64), labels)
