"""Alternating deep-model-selection training.

A run is three kinds of phases: reconstruction pretraining of the
autoencoder, mixture fitting on the latent means (frozen network), and
clustering-regularizer backpropagation against the frozen mixture.  The
fit/regularize pair repeats for a configured number of cycles, and one
final warm refit aligns the reported mixture with the final latents.
Mixture refits warm-start from the previous state, so the estimated
cluster count never increases after the first fit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from deepselect.config import RunConfig
from deepselect.divergence import DiagGaussian
from deepselect.dpm import DpmState, dpm_assignment_scores, estimate_k, fit_dpm
from deepselect.gmm import GmmState, fit_gmm
from deepselect.kmeans import lloyd, lloyd_from, nearest_center
from deepselect.network import (
    LatentNet,
    abc_loss_batch,
    _encode_batch,
    init_net,
    mse_loss_batch,
    regularizer_loss_batch,
    sgd_step,
)

__all__ = [
    "TrainReport",
    "train",
    "select_optimal_gmm",
    "select_optimal_dpm",
    "abc_loss",
]


@dataclass
class TrainReport:
    """Metric trail plus the final artifacts of one training run."""

    records: list = field(default_factory=list)   # (phase, epoch, metric, value)
    khat_trajectory: list = field(default_factory=list)
    final_state: object = None
    final_net: LatentNet = None
    wall_clock: dict = field(default_factory=dict)

    def add(self, phase: str, epoch: int, metric: str, value) -> None:
        self.records.append((phase, int(epoch), metric, float(value)))

    def lines(self) -> list:
        return [f"{p} {e} {m} {repr(v)}" for p, e, m, v in self.records]

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def select_optimal_gmm(z_n, state: GmmState) -> DiagGaussian:
    """Best GMM component for one sample: full Gaussian log-density plus
    log weight; returns it as (mean, 1/precision)."""
    z_n = np.asarray(z_n, dtype=float)
    if state.assignments.size == 0:
        raise ValueError("state has not been fitted")
    k = _gmm_select_indices(z_n[None, :], state)[0]
    return DiagGaussian(state.means[k], 1.0 / state.precisions[k])


def _gmm_select_indices(z, state: GmmState) -> np.ndarray:
    d2 = (z[:, None, :] - state.means[None, :, :]) ** 2
    logdet = 0.5 * np.log(state.precisions / (2.0 * np.pi)).sum(axis=1)
    quad = 0.5 * (d2 * state.precisions[None, :, :]).sum(axis=2)
    with np.errstate(divide="ignore"):
        logw = np.log(state.weights)
    return np.argmax(logdet[None, :] - quad + logw[None, :], axis=1)


def select_optimal_dpm(z_n, state: DpmState) -> DiagGaussian:
    """Best active DPM component for one sample, scored exactly like the
    assignment rule; returns it as (mean, 1/precision)."""
    z_n = np.asarray(z_n, dtype=float)
    if not state.active.any():
        raise ValueError("no active clusters to select from")
    k = int(np.argmax(dpm_assignment_scores(state, z_n[None, :]), axis=1)[0])
    return DiagGaussian(state.means[k], 1.0 / state.precisions[k])


def abc_loss(z_n, nearest_mean, lambda3: float = 1.0):
    """Point-estimate clustering penalty lambda3/2*|eta - z|^2 and its
    gradient with respect to z."""
    z_n = np.asarray(z_n, dtype=float)
    nearest_mean = np.asarray(nearest_mean, dtype=float)
    if z_n.shape != nearest_mean.shape:
        raise ValueError("sample and mean must have matching shapes")
    diff = z_n - nearest_mean
    return 0.5 * lambda3 * float(diff @ diff), lambda3 * diff


def _encode_means(net, x):
    mu, _, _ = _encode_batch(net, x)
    return mu


def _select_components_batch(z, state):
    """Per-sample component (means, variances) from a frozen mixture."""
    if isinstance(state, DpmState):
        idx = np.argmax(dpm_assignment_scores(state, z), axis=1)
    else:
        idx = _gmm_select_indices(z, state)
    return state.means[idx], 1.0 / state.precisions[idx]


def _fit_mixture(z, config: RunConfig, seed, prev_state):
    if config.loss == "ajsd":
        return fit_dpm(
            z,
            config.truncation,
            hyper=None if prev_state is not None else config.hyper(z),
            max_iters=config.fit_iters,
            seed=seed,
            prune_threshold=config.prune_threshold,
            init=prev_state,
        )
    if config.loss == "kld":
        return fit_gmm(z, config.clusters, max_iters=config.fit_iters, seed=seed, init=prev_state)
    # abc: a plain k-means partition carried as a unit-precision state;
    # warm refits keep only the occupied centers
    if prev_state is None:
        centers, labels = lloyd(z, config.clusters, np.random.default_rng(seed), max_iters=config.fit_iters)
    else:
        occupied = np.bincount(prev_state.assignments, minlength=prev_state.n_components) > 0
        centers, labels = lloyd_from(z, prev_state.means[occupied], max_iters=config.fit_iters)
    weights = np.bincount(labels, minlength=centers.shape[0]).astype(float) / z.shape[0]
    return GmmState(means=centers, precisions=np.ones_like(centers), weights=weights, assignments=labels)


def _mixture_khat(state) -> int:
    if isinstance(state, DpmState):
        return estimate_k(state)
    return int((np.bincount(state.assignments, minlength=state.n_components) > 0).sum())


def train(data, config: RunConfig) -> TrainReport:
    """Run the full alternating pipeline on an N x D feature matrix."""
    config.validate()
    if config.seed is None:
        raise ValueError("training requires a seed")
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be an N x D matrix")
    if not np.isfinite(data).all():
        raise ValueError("data must be finite")
    if config.arch[0] != data.shape[1]:
        raise ValueError(
            f"architecture input width {config.arch[0]} does not match data dimension {data.shape[1]}"
        )

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    net = init_net(config.arch, seed=seeds[0], sigma_head=config.sigma_head)
    shuffle_rng = np.random.default_rng(seeds[1])
    fit_rng = np.random.default_rng(seeds[2])
    n = data.shape[0]
    batch = min(config.batch_size, n)
    report = TrainReport()

    def batches():
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch):
            yield data[order[start : start + batch]]

    t0 = time.perf_counter()
    for epoch in range(1, config.mse_epochs + 1):
        total = 0.0
        for xb in batches():
            loss, grads = mse_loss_batch(net, xb)
            net = sgd_step(net, grads, config.learning_rate)
            total += loss * len(xb)
        report.add("mse", epoch, "loss", total / n)
    report.wall_clock["mse"] = time.perf_counter() - t0

    state = None
    reg_epoch = 0
    t_fit = t_reg = 0.0
    for cycle in range(1, config.cycles + 1):
        t0 = time.perf_counter()
        state = _fit_mixture(_encode_means(net, data), config, fit_rng, state)
        t_fit += time.perf_counter() - t0
        report.khat_trajectory.append(_mixture_khat(state))
        report.add("fit", cycle, "khat", report.khat_trajectory[-1])

        t0 = time.perf_counter()
        for _ in range(config.reg_epochs):
            reg_epoch += 1
            total = 0.0
            for xb in batches():
                if config.loss == "abc":
                    mu = _encode_means(net, xb)
                    nearest = state.means[nearest_center(mu, state.means)]
                    loss, grads = abc_loss_batch(net, xb, nearest, config.lambda3)
                else:
                    mu = _encode_means(net, xb)
                    comp_means, comp_vars = _select_components_batch(mu, state)
                    loss, grads = regularizer_loss_batch(
                        net, xb, comp_means, comp_vars, config.alpha, config.lambda3,
                        kind=config.loss,
                    )
                net = sgd_step(net, grads, config.learning_rate)
                total += loss * len(xb)
            report.add("reg", reg_epoch, "loss", total / n)
        t_reg += time.perf_counter() - t0

    if config.cycles > 0:
        t0 = time.perf_counter()
        state = _fit_mixture(_encode_means(net, data), config, fit_rng, state)
        t_fit += time.perf_counter() - t0
        report.khat_trajectory.append(_mixture_khat(state))
        report.add("fit", config.cycles + 1, "khat", report.khat_trajectory[-1])
    report.wall_clock["fit"] = t_fit
    report.wall_clock["reg"] = t_reg

    report.final_state = state
    report.final_net = net
    return report
