"""Acceptance suite: one test per criterion, each printing a PASS line
with its measured margin.  Tolerances are pinned here and nowhere else.

Run with: pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np

from deepselect.cli import cli
from deepselect.config import RunConfig
from deepselect.data import SynthSpec, synth_mixture
from deepselect.divergence import DiagGaussian, alpha_jsd, asymmetry_table, kld_gaussian
from deepselect.dpm import DpmHyper, DpmState, dpm_assign, estimate_k, fit_dpm, stick_weights, _refreshed
from deepselect.evaluation import LabeledAssignment, clustering_accuracy
from deepselect.gmm import GmmState, fit_gmm, gmm_objective
from deepselect.kmeans import lloyd
from deepselect.network import abc_loss_batch, init_net, mse_loss_batch, regularizer_loss_batch
from deepselect.training import train

from oracles import alpha_jsd_quadrature, kld_quadrature
from test_evaluation import brute_force_accuracy
from test_network import fdiff_check


def report(n, name, detail):
    print(f"\nACCEPTANCE {n} {name}: PASS ({detail})")


def random_gaussian_pair(rng):
    g1 = DiagGaussian([rng.normal(0, 3)], [rng.uniform(0.2, 4.0)])
    g2 = DiagGaussian([rng.normal(0, 3)], [rng.uniform(0.2, 4.0)])
    return g1, g2


def test_criterion_1_divergence_matches_quadrature():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_ajsd = worst_kld = 0.0
    for _ in range(100):
        g1, g2 = random_gaussian_pair(rng)
        alpha = rng.uniform(0.05, 0.95)
        closed = alpha_jsd(g1, g2, alpha)
        oracle = alpha_jsd_quadrature(g1.mean[0], g1.variance[0], g2.mean[0], g2.variance[0], alpha)
        rel = abs(closed - oracle) / max(abs(oracle), 1e-12)
        worst_ajsd = max(worst_ajsd, rel)
        assert rel < 1e-6

        closed = kld_gaussian(g1, g2)
        oracle = kld_quadrature(g1.mean[0], g1.variance[0], g2.mean[0], g2.variance[0])
        rel = abs(closed - oracle) / max(abs(oracle), 1e-12)
        worst_kld = max(worst_kld, rel)
        assert rel < 1e-6
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(1, "divergence-quadrature", f"worst rel err ajsd {worst_ajsd:.2e}, kld {worst_kld:.2e}, {elapsed:.1f}s")


def test_criterion_2_symmetry_and_duality():
    rng = np.random.default_rng(202)
    worst_sym = worst_dual = 0.0
    for _ in range(1000):
        g1, g2 = random_gaussian_pair(rng)
        sym = abs(alpha_jsd(g1, g2, 0.5) - alpha_jsd(g2, g1, 0.5))
        worst_sym = max(worst_sym, sym)
        assert sym <= 1e-12
        alpha = rng.uniform(0.05, 0.95)
        dual = abs(alpha_jsd(g1, g2, alpha) - alpha_jsd(g2, g1, 1.0 - alpha))
        worst_dual = max(worst_dual, dual)
        assert dual <= 1e-10
    report(2, "symmetry-duality", f"worst symmetry gap {worst_sym:.1e}, worst duality gap {worst_dual:.1e}")


def test_criterion_3_asymmetry_curves():
    grid = np.arange(-2.0, 2.0001, 0.05)
    rows = asymmetry_table(1.0, grid, 0.65)
    kld, ajsd = rows[:, 1], rows[:, 2]
    positive = kld > 0
    assert np.all(ajsd[positive] < kld[positive])
    at_equal = np.isclose(rows[:, 0], 1.0)
    assert np.all(kld[at_equal] < 1e-12) and np.all(ajsd[at_equal] < 1e-12)
    report(3, "asymmetry-figure", f"ajsd below kld at {int(positive.sum())} grid points, both vanish at mu2=mu1")


def test_criterion_4_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = 0.0
    for seed in range(20):
        net = init_net((5, 4, 3), seed=seed, sigma_head=bool(seed % 2))
        x = rng.normal(size=(4, 5))
        comp_means = rng.normal(size=(4, 3))
        comp_vars = rng.uniform(0.4, 2.5, size=(4, 3))
        errs = (
            fdiff_check(lambda n: mse_loss_batch(n, x), net),
            fdiff_check(lambda n: regularizer_loss_batch(n, x, comp_means, comp_vars, 0.65, 1.0), net),
            fdiff_check(lambda n: abc_loss_batch(n, x, comp_means, 1.0), net),
        )
        worst = max(worst, *errs)
        assert max(errs) < 1e-4
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report(4, "gradient-checks", f"worst rel err {worst:.2e} over 20 seeded nets, {elapsed:.1f}s")


def test_criterion_5_model_selection_recovery():
    t0 = time.perf_counter()
    hits = 0
    accs = []
    for seed in range(20):
        fm = synth_mixture(SynthSpec(k=5, d=16, n_per=200, separation=8.0, seed=seed))
        state = fit_dpm(fm.values, truncation=20, seed=seed)
        khat = estimate_k(state)
        acc = clustering_accuracy(LabeledAssignment(state.assignments, fm.labels))
        accs.append(acc)
        if khat == 5 and acc >= 0.95:
            hits += 1
    elapsed = time.perf_counter() - t0
    assert hits >= 18
    assert elapsed < 120.0
    report(5, "model-selection-recovery", f"khat=5 with acc>=0.95 in {hits}/20 trials, {elapsed:.1f}s")


def test_criterion_6_method_ordering():
    t0 = time.perf_counter()
    base_accs, train_accs = [], []
    for trial in range(10):
        fm = synth_mixture(SynthSpec(k=5, d=16, n_per=200, separation=4.0, seed=100 + trial))
        base = fit_dpm(fm.values, truncation=20, seed=trial)
        base_accs.append(clustering_accuracy(LabeledAssignment(base.assignments, fm.labels)))
        config = RunConfig(
            loss="ajsd", arch=(16, 12, 8), mse_epochs=60, reg_epochs=25, cycles=2,
            truncation=20, seed=trial,
        )
        rep = train(fm.values, config)
        train_accs.append(clustering_accuracy(LabeledAssignment(rep.final_state.assignments, fm.labels)))
    mean_base, mean_train = float(np.mean(base_accs)), float(np.mean(train_accs))
    elapsed = time.perf_counter() - t0
    assert mean_train >= mean_base
    assert elapsed < 600.0
    report(6, "method-ordering", f"mean acc train {mean_train:.4f} >= dpm-only {mean_base:.4f} over 10 seeds, {elapsed:.0f}s")


def test_criterion_7_conservation_suites():
    # stick-weight identity on fuzzed states after every dpm update cycle
    rng = np.random.default_rng(707)
    worst_gap = 0.0
    for _ in range(50):
        t = int(rng.integers(2, 15))
        d = int(rng.integers(1, 6))
        n = int(rng.integers(t, 80))
        state = DpmState(
            means=rng.normal(0, 3, size=(t, d)),
            precisions=rng.uniform(0.2, 5.0, size=(t, d)),
            sticks=rng.uniform(0, 1, size=t),
            assignments=rng.integers(0, t, size=n),
            active=np.ones(t, dtype=bool),
            hyper=DpmHyper(),
            truncation=t,
        )
        z = rng.normal(0, 3, size=(n, d))
        from dataclasses import replace

        state = replace(state, assignments=dpm_assign(state, z))
        state = _refreshed(state, z)
        pi = stick_weights(state.sticks)
        gap = abs(pi.sum() + np.prod(1.0 - state.sticks) - 1.0)
        worst_gap = max(worst_gap, gap)
        assert gap <= 1e-9

    # hard-EM objective monotone over 50 seeded runs
    worst_drop = 0.0
    for seed in range(50):
        gen = np.random.default_rng(seed)
        z = gen.normal(0, 3, size=(100, 2))
        k = int(gen.integers(2, 6))
        centers, labels = lloyd(z, k, np.random.default_rng(seed))
        state = GmmState(centers, np.ones_like(centers), np.full(k, 1.0 / k), labels)
        prev = -np.inf
        for _ in range(15):
            state = fit_gmm(z, k, max_iters=1, init=state)
            obj = gmm_objective(state, z)
            worst_drop = max(worst_drop, prev - obj)
            assert obj >= prev - 1e-9
            prev = obj
    report(7, "conservation-suites", f"worst stick identity gap {worst_gap:.1e}, worst objective drop {max(worst_drop, 0.0):.1e}")


def test_criterion_8_accuracy_oracle_equivalence():
    rng = np.random.default_rng(808)
    for _ in range(500):
        n = int(rng.integers(4, 30))
        predicted = rng.integers(0, int(rng.integers(1, 7)), size=n)
        truth = rng.integers(0, int(rng.integers(1, 7)), size=n)
        fast = clustering_accuracy(LabeledAssignment(predicted, truth))
        slow = brute_force_accuracy(predicted, truth)
        assert fast == slow
    report(8, "accuracy-oracle-equivalence", "exact agreement on 500 random instances (<= 6 clusters)")


def test_criterion_9_cli_determinism(tmp_path):
    blobs = str(tmp_path / "blobs.fm")
    assert cli(["synth", "--k", "4", "--d", "8", "--n-per", "50", "--sep", "8", "--seed", "13", "--out", blobs]) == 0
    blobs2 = str(tmp_path / "blobs2.fm")
    assert cli(["synth", "--k", "4", "--d", "8", "--n-per", "50", "--sep", "8", "--seed", "13", "--out", blobs2]) == 0
    assert open(blobs, "rb").read() == open(blobs2, "rb").read()

    pairs = []
    for tag in ("a", "b"):
        fit_out = str(tmp_path / f"fit-{tag}.txt")
        train_out = str(tmp_path / f"train-{tag}.txt")
        asym_out = str(tmp_path / f"asym-{tag}.txt")
        assert cli(["fit-dpm", blobs, "--t", "10", "--seed", "13", "--out", fit_out]) == 0
        assert cli([
            "train", blobs, "--loss", "ajsd", "--seed", "13", "--arch", "8,6,4",
            "--learning-rate", "0.001", "--mse-epochs", "3", "--reg-epochs", "2",
            "--cycles", "1", "--t", "8", "--out", train_out,
        ]) == 0
        assert cli(["demo-asymmetry", "--mu1", "1.0", "--alpha", "0.65", "--grid", "-2:2:0.1", "--out", asym_out]) == 0
        pairs.append((fit_out, train_out, asym_out))
    for f1, f2 in zip(*pairs):
        assert open(f1, "rb").read() == open(f2, "rb").read()
    report(9, "cli-determinism", "synth, fit-dpm, train, demo-asymmetry reports byte-identical across reruns")
