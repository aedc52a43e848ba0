import numpy as np
import pytest
from numpy.testing import assert_allclose

from deepselect.data import SynthSpec, synth_mixture
from deepselect.dpm import (
    DpmHyper,
    DpmState,
    dpm_assign,
    dpm_update_mean,
    dpm_update_precision,
    dpm_update_sticks,
    estimate_k,
    fit_dpm,
    fresh_state,
    prune_clusters,
    stick_weights,
)
from deepselect.evaluation import LabeledAssignment, clustering_accuracy

HYPER = DpmHyper()  # omega0=2000, a0=1.25, b0=0.25, m0=1, lambda0=0.5


def make_state(means, sticks=None, assignments=(), hyper=None, precisions=None, active=None):
    means = np.atleast_2d(np.asarray(means, float))
    t = means.shape[0]
    sticks = np.full(t, 0.1) if sticks is None else np.asarray(sticks, float)
    precisions = np.ones_like(means) if precisions is None else np.asarray(precisions, float)
    active = np.ones(t, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    return DpmState(means, precisions, sticks, np.asarray(assignments, dtype=np.int64), active, hyper or HYPER, t)


class TestPrecisionUpdate:
    def test_empty_cluster_prior_value(self):
        hyper = DpmHyper(m0=0.0)
        state = make_state([[0.0], [5.0]], assignments=[1, 1], hyper=hyper)
        z = np.array([[5.0], [5.0]])
        tau = dpm_update_precision(state, z)
        # numerator a0-1=0.25, denominator b0=0.25 once the mean sits at m0
        assert tau[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_hand_case_unit_value(self):
        hyper = DpmHyper(m0=0.0)
        state = make_state([[0.0]], assignments=[0, 0], hyper=hyper)
        z = np.array([[-1.0], [1.0]])
        assert dpm_update_precision(state, z)[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_wider_spread_lowers_precision(self):
        hyper = DpmHyper(m0=0.0)
        state = make_state([[0.0]], assignments=[0, 0], hyper=hyper)
        narrow = dpm_update_precision(state, np.array([[-1.0], [1.0]]))
        wide = dpm_update_precision(state, np.array([[-2.0], [2.0]]))
        assert wide[0, 0] < narrow[0, 0]


class TestMeanUpdate:
    def test_empty_cluster_returns_m0(self):
        state = make_state([[3.0], [4.0]], assignments=[1])
        z = np.array([[4.0]])
        assert dpm_update_mean(state, z)[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_single_point_shrinkage(self):
        state = make_state([[0.0]], assignments=[0])
        z = np.array([[4.0]])
        # (4 + 0.5*1) / (1 + 0.5)
        assert dpm_update_mean(state, z)[0, 0] == pytest.approx(3.0, abs=1e-12)

    def test_lambda0_to_zero_limit_is_sample_mean(self):
        hyper = DpmHyper(lambda0=1e-12)
        state = make_state([[0.0]], assignments=[0, 0], hyper=hyper)
        z = np.array([[2.0], [6.0]])
        assert dpm_update_mean(state, z)[0, 0] == pytest.approx(4.0, abs=1e-9)


class TestAssign:
    def test_point_at_mean_equal_sticks(self):
        state = make_state([[0.0], [7.0]], sticks=[0.2, 0.2], assignments=[0])
        assert dpm_assign(state, np.array([[0.0]]))[0] == 0

    def test_stick_terms_shift_boundary(self):
        # point at 1.2 is physically nearer cluster 1, but the stick terms
        # (ln 0.9 vs ln 0.1 + ln(1-0.9)) move the boundary toward cluster 0:
        # score0 = -0.5*1.44 + ln 0.9 = -0.825
        # score1 = -0.5*0.64 + ln 0.1 + ln 0.1 = -4.925
        state = make_state([[0.0], [2.0]], sticks=[0.9, 0.1], assignments=[0])
        assert dpm_assign(state, np.array([[1.2]]))[0] == 0
        # with equal sticks the same point goes to the nearer cluster
        even = make_state([[0.0], [2.0]], sticks=[0.2, 0.2], assignments=[0])
        assert dpm_assign(even, np.array([[1.2]]))[0] == 1

    def test_zero_stick_cluster_never_chosen(self):
        state = make_state([[0.0], [0.0]], sticks=[0.0, 0.5], assignments=[0])
        assert dpm_assign(state, np.array([[0.0]]))[0] == 1

    def test_all_pruned_raises(self):
        state = make_state([[0.0]], active=[False], assignments=[0])
        with pytest.raises(ValueError, match="degenerate"):
            dpm_assign(state, np.array([[0.0]]))


class TestStickUpdate:
    def test_empty_cluster_zero(self):
        state = make_state([[0.0], [1.0]], assignments=[1, 1])
        assert dpm_update_sticks(state)[0] == 0.0

    def test_default_hyper_hand_value(self):
        state = make_state([[0.0], [1.0]], assignments=[0] * 100)
        v = dpm_update_sticks(state)
        assert v[0] == pytest.approx(100.0 / 1999.0, abs=1e-12)

    def test_small_omega0_engages_clamp(self):
        hyper = DpmHyper(omega0=1.5)
        state = make_state([[0.0], [1.0]], assignments=[0] * 10, hyper=hyper)
        v = dpm_update_sticks(state)
        assert v[0] == pytest.approx(1.0 - 1e-9)
        assert v[0] < 1.0

    def test_inactive_cluster_stays_zero(self):
        state = make_state([[0.0], [1.0]], assignments=[0, 0], active=[True, False])
        assert dpm_update_sticks(state)[1] == 0.0


class TestStickWeights:
    def test_first_stick_takes_all(self):
        assert_allclose(stick_weights(np.array([1.0, 0.3, 0.7])), [1.0, 0.0, 0.0])

    def test_hand_case_with_residual(self):
        pi = stick_weights(np.array([0.5, 0.5]))
        assert_allclose(pi, [0.5, 0.25])
        assert pi.sum() + 0.25 == pytest.approx(1.0, abs=1e-15)

    def test_all_zero_sticks(self):
        pi = stick_weights(np.zeros(4))
        assert_allclose(pi, np.zeros(4))

    def test_conservation_identity_fuzzed(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            v = rng.uniform(0, 1, size=rng.integers(1, 40))
            pi = stick_weights(v)
            residual = np.prod(1.0 - v)
            assert pi.sum() + residual == pytest.approx(1.0, abs=1e-12)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            stick_weights(np.array([1.2]))


class TestPrune:
    def test_insignificant_cluster_pruned(self):
        state = make_state([[0.0], [1.0], [2.0]], sticks=[0.9, 1e-6, 1e-6], assignments=[0])
        keep = prune_clusters(state, 0.01)
        assert keep.tolist() == [True, False, False]

    def test_uniform_clusters_survive(self):
        state = make_state(np.zeros((5, 1)), sticks=np.full(5, 0.1), assignments=[0])
        assert prune_clusters(state, 0.01).all()

    def test_never_prunes_everything(self):
        # the max-weight cluster always survives a relative threshold, and
        # degenerate all-zero weights leave the active set untouched
        state = make_state([[0.0], [1.0]], sticks=[0.0, 0.0], assignments=[0])
        assert prune_clusters(state, 0.5).any()
        rng = np.random.default_rng(1)
        for _ in range(100):
            t = rng.integers(1, 10)
            state = make_state(np.zeros((t, 1)), sticks=rng.uniform(0, 1, t), assignments=[0])
            assert prune_clusters(state, rng.uniform(0.01, 0.99)).any()

    def test_threshold_validated(self):
        state = make_state([[0.0]], assignments=[0])
        with pytest.raises(ValueError, match="threshold"):
            prune_clusters(state, 1.5)


class TestEstimateK:
    def test_fresh_state_reports_truncation(self):
        assert estimate_k(fresh_state(12, 3)) == 12

    def test_all_in_one_cluster(self):
        state = make_state([[0.0], [1.0], [2.0]], assignments=[0, 0, 0])
        assert estimate_k(state) == 1

    def test_ignores_inactive_even_if_occupied(self):
        state = make_state([[0.0], [1.0]], assignments=[0, 1], active=[True, False])
        assert estimate_k(state) == 1


class TestFit:
    def test_five_blob_recovery_single_seed(self):
        fm = synth_mixture(SynthSpec(k=5, d=16, n_per=200, separation=8.0, seed=0))
        state = fit_dpm(fm.values, truncation=20, seed=0)
        assert estimate_k(state) == 5
        acc = clustering_accuracy(LabeledAssignment(state.assignments, fm.labels))
        assert acc >= 0.95

    def test_single_blob_collapses_to_one(self):
        fm = synth_mixture(SynthSpec(k=1, d=8, n_per=300, separation=1.0, seed=3))
        state = fit_dpm(fm.values, truncation=10, seed=3)
        assert estimate_k(state) == 1

    def test_truncation_one_shrunk_global_mean(self):
        fm = synth_mixture(SynthSpec(k=1, d=4, n_per=200, separation=1.0, seed=5))
        state = fit_dpm(fm.values, truncation=1, seed=5)
        assert estimate_k(state) == 1
        h = state.hyper
        n = fm.values.shape[0]
        expected = (fm.values.sum(axis=0) + h.lambda0 * np.broadcast_to(h.m0, (4,))) / (n + h.lambda0)
        assert_allclose(state.means[0], expected, atol=1e-9)

    def test_same_seed_bit_identical(self):
        fm = synth_mixture(SynthSpec(k=3, d=8, n_per=100, separation=6.0, seed=7))
        a = fit_dpm(fm.values, truncation=10, seed=7)
        b = fit_dpm(fm.values, truncation=10, seed=7)
        for x, y in ((a.means, b.means), (a.precisions, b.precisions), (a.sticks, b.sticks)):
            assert np.array_equal(x, y)
        assert np.array_equal(a.assignments, b.assignments)
        assert np.array_equal(a.active, b.active)

    def test_assignment_fixed_point_at_convergence(self):
        fm = synth_mixture(SynthSpec(k=3, d=8, n_per=100, separation=6.0, seed=11))
        state = fit_dpm(fm.values, truncation=12, seed=11)
        assert np.array_equal(dpm_assign(state, fm.values), state.assignments)

    def test_warm_start_never_grows_active_set(self):
        fm = synth_mixture(SynthSpec(k=4, d=8, n_per=100, separation=6.0, seed=13))
        state = fit_dpm(fm.values, truncation=15, seed=13)
        k_first = estimate_k(state)
        again = fit_dpm(fm.values, truncation=15, init=state)
        assert estimate_k(again) <= k_first
        assert int(again.active.sum()) <= int(state.active.sum())

    def test_prior_recovery_on_starved_cluster(self):
        # all data assigned elsewhere: mean lands exactly on m0, precision on (a0-1)/b0
        hyper = DpmHyper(m0=2.0)
        state = make_state([[9.0], [0.0]], assignments=[1, 1], hyper=hyper)
        z = np.array([[0.1], [-0.1]])
        means = dpm_update_mean(state, z)
        assert means[0, 0] == 2.0
        state2 = make_state([[2.0], [0.0]], assignments=[1, 1], hyper=hyper)
        tau = dpm_update_precision(state2, z)
        assert tau[0, 0] == (hyper.a0 - 1.0) / hyper.b0


class TestConservationDuringFit:
    def test_identity_and_prune_monotonicity_per_cycle(self):
        fm = synth_mixture(SynthSpec(k=3, d=8, n_per=80, separation=6.0, seed=17))
        z = fm.values
        state = fit_dpm(z, truncation=10, seed=17, max_iters=1)
        active = int(state.active.sum())
        for _ in range(10):
            state = fit_dpm(z, truncation=10, init=state, max_iters=1)
            pi = stick_weights(state.sticks)
            residual = np.prod(1.0 - state.sticks)
            assert pi.sum() + residual == pytest.approx(1.0, abs=1e-9)
            assert int(state.active.sum()) <= active
            active = int(state.active.sum())


class TestHyperValidation:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="omega0"):
            DpmHyper(omega0=0.0)
        with pytest.raises(ValueError, match="b0"):
            DpmHyper(b0=-1.0)

    def test_m0_may_be_vector(self):
        hyper = DpmHyper(m0=np.array([1.0, 2.0]))
        state = make_state([[0.0, 0.0]], assignments=[0], hyper=hyper)
        z = np.array([[5.0, 5.0]])
        means = dpm_update_mean(state, z)
        assert_allclose(means[0], (z[0] + 0.5 * hyper.m0) / 1.5)
