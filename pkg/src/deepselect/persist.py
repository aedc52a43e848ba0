"""Versioned flat-file persistence for fitted states and network weights.

All formats are line-oriented ASCII with full-precision floats (repr
round-trip), a one-line versioned header, and row-major matrix bodies.
"""

from __future__ import annotations

import numpy as np

from deepselect.dpm import DpmHyper, DpmState
from deepselect.gmm import GmmState
from deepselect.network import LatentNet

DPM_MAGIC = "DPMSTATE 1"
GMM_MAGIC = "GMMSTATE 1"
NET_MAGIC = "LATENTNET 1"

__all__ = [
    "save_dpm_state",
    "load_dpm_state",
    "save_gmm_state",
    "load_gmm_state",
    "save_net",
    "load_net",
    "load_state",
]


def _fmt_row(values) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=float).ravel())


def _read_row(line: str, count: int, what: str) -> np.ndarray:
    parts = line.split()
    if len(parts) != count:
        raise ValueError(f"truncated state file: expected {count} values for {what}, got {len(parts)}")
    return np.array([float(p) for p in parts])


def save_dpm_state(state: DpmState, path) -> None:
    h = state.hyper
    m0 = np.broadcast_to(np.asarray(h.m0, dtype=float), (state.dim,))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(DPM_MAGIC + "\n")
        fh.write(f"{state.truncation} {state.dim} {state.assignments.size}\n")
        fh.write(_fmt_row([h.omega0, h.a0, h.b0, h.lambda0]) + "\n")
        fh.write(_fmt_row(m0) + "\n")
        fh.write(" ".join(str(int(a)) for a in state.active) + "\n")
        fh.write(_fmt_row(state.sticks) + "\n")
        for row in state.means:
            fh.write(_fmt_row(row) + "\n")
        for row in state.precisions:
            fh.write(_fmt_row(row) + "\n")
        fh.write(" ".join(str(int(a)) for a in state.assignments) + "\n")


def load_dpm_state(path) -> DpmState:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != DPM_MAGIC:
        raise ValueError(f"{path} is not a '{DPM_MAGIC}' file")
    t, d, n = (int(tok) for tok in lines[1].split())
    omega0, a0, b0, lambda0 = _read_row(lines[2], 4, "hyperparameters")
    m0 = _read_row(lines[3], d, "m0")
    active = np.array([bool(int(tok)) for tok in lines[4].split()])
    sticks = _read_row(lines[5], t, "sticks")
    body = 6
    means = np.array([_read_row(lines[body + i], d, f"mean row {i}") for i in range(t)])
    precisions = np.array([_read_row(lines[body + t + i], d, f"precision row {i}") for i in range(t)])
    assignments = np.array([int(tok) for tok in lines[body + 2 * t].split()]) if n else np.empty(0, dtype=np.int64)
    if assignments.size != n:
        raise ValueError(f"truncated state file: expected {n} assignments, got {assignments.size}")
    hyper = DpmHyper(float(omega0), float(a0), float(b0), m0, float(lambda0))
    return DpmState(means, precisions, sticks, assignments, active, hyper, t)


def save_gmm_state(state: GmmState, path) -> None:
    k, d = state.means.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(GMM_MAGIC + "\n")
        fh.write(f"{k} {d} {state.assignments.size}\n")
        fh.write(_fmt_row(state.weights) + "\n")
        for row in state.means:
            fh.write(_fmt_row(row) + "\n")
        for row in state.precisions:
            fh.write(_fmt_row(row) + "\n")
        fh.write(" ".join(str(int(a)) for a in state.assignments) + "\n")


def load_gmm_state(path) -> GmmState:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != GMM_MAGIC:
        raise ValueError(f"{path} is not a '{GMM_MAGIC}' file")
    k, d, n = (int(tok) for tok in lines[1].split())
    weights = _read_row(lines[2], k, "weights")
    means = np.array([_read_row(lines[3 + i], d, f"mean row {i}") for i in range(k)])
    precisions = np.array([_read_row(lines[3 + k + i], d, f"precision row {i}") for i in range(k)])
    assignments = np.array([int(tok) for tok in lines[3 + 2 * k].split()]) if n else np.empty(0, dtype=np.int64)
    if assignments.size != n:
        raise ValueError(f"truncated state file: expected {n} assignments, got {assignments.size}")
    return GmmState(means, precisions, weights, assignments)


def load_state(path):
    """Load either mixture state, dispatching on the header line."""
    with open(path, "r", encoding="ascii") as fh:
        first = fh.readline().strip()
    if first == DPM_MAGIC:
        return load_dpm_state(path)
    if first == GMM_MAGIC:
        return load_gmm_state(path)
    raise ValueError(f"{path} is not a recognized state file")


def save_net(net: LatentNet, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(NET_MAGIC + "\n")
        fh.write(f"{len(net.enc_w)} {len(net.dec_w)} {int(net.has_sigma_head)}\n")
        heads = [("mu", net.mu_w, net.mu_b)]
        if net.has_sigma_head:
            heads.append(("logvar", net.logvar_w, net.logvar_b))
        blocks = (
            [(f"enc{i}", w, b) for i, (w, b) in enumerate(zip(net.enc_w, net.enc_b))]
            + heads
            + [(f"dec{i}", w, b) for i, (w, b) in enumerate(zip(net.dec_w, net.dec_b))]
        )
        for name, w, b in blocks:
            fh.write(f"{name} {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(_fmt_row(row) + "\n")
            fh.write(_fmt_row(b) + "\n")


def load_net(path) -> LatentNet:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != NET_MAGIC:
        raise ValueError(f"{path} is not a '{NET_MAGIC}' file")
    n_enc, n_dec, sigma = (int(tok) for tok in lines[1].split())
    pos = 2

    def read_block(expect_name):
        nonlocal pos
        parts = lines[pos].split()
        if len(parts) != 3 or parts[0] != expect_name:
            raise ValueError(f"truncated or reordered net file at block {expect_name!r}")
        rows, cols = int(parts[1]), int(parts[2])
        pos += 1
        w = np.array([_read_row(lines[pos + i], cols, f"{expect_name} row {i}") for i in range(rows)])
        pos += rows
        b = _read_row(lines[pos], rows, f"{expect_name} bias")
        pos += 1
        return w, b

    net = LatentNet()
    for i in range(n_enc):
        w, b = read_block(f"enc{i}")
        net.enc_w.append(w)
        net.enc_b.append(b)
    net.mu_w, net.mu_b = read_block("mu")
    if sigma:
        net.logvar_w, net.logvar_b = read_block("logvar")
    for i in range(n_dec):
        w, b = read_block(f"dec{i}")
        net.dec_w.append(w)
        net.dec_b.append(b)
    return net
