import math

import numpy as np
import pytest

from qlab.chain import log_expected_persistence_time, transition_probabilities
from qlab.model import ModelParams
from qlab.simulate import (
    HittingSamples,
    SequencePopulation,
    simulate_full,
    simulate_lumped,
    summarize,
)

P1 = ModelParams(m=1, ell=1, kappa=2, sigma=2, q=0.25, theta=1)
P2 = ModelParams(m=2, ell=1, kappa=2, sigma=2, q=0.25, theta=1)


def exact_mean(params: ModelParams) -> float:
    return math.exp(log_expected_persistence_time(transition_probabilities(params)))


class TestSummarize:
    def test_constant_samples(self):
        samples = HittingSamples(np.array([5, 5, 5, 5]), seed=0, n_runs=4, censored=0, step_cap=10)
        stats = summarize(samples)
        assert stats.mean == 5.0 and stats.variance == 0.0

    def test_two_samples(self):
        samples = HittingSamples(np.array([2, 4]), seed=0, n_runs=2, censored=0, step_cap=10)
        stats = summarize(samples)
        assert stats.mean == 3.0
        assert stats.variance == 2.0
        assert stats.ci95[0] < 3.0 < stats.ci95[1]

    def test_rejects_too_few(self):
        empty = HittingSamples(np.array([], dtype=np.int64), seed=0, n_runs=3, censored=3, step_cap=10)
        with pytest.raises(ValueError):
            summarize(empty)


class TestLumped:
    def test_m1_matches_geometric(self):
        samples = simulate_lumped(P1, n_runs=100_000, seed=101)
        stats = summarize(samples)
        assert abs(stats.mean - 4.0) <= 3 * stats.std_error

    def test_m2_matches_exact(self):
        samples = simulate_lumped(P2, n_runs=100_000, seed=202)
        stats = summarize(samples)
        assert abs(stats.mean - 10.4) <= 3 * stats.std_error

    def test_deterministic_per_seed(self):
        a = simulate_lumped(P2, n_runs=500, seed=7)
        b = simulate_lumped(P2, n_runs=500, seed=7)
        c = simulate_lumped(P2, n_runs=500, seed=8)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_replica_prefix_stability(self):
        # replica streams are independent, so a shorter batch is a prefix
        long = simulate_lumped(P2, n_runs=400, seed=7)
        short = simulate_lumped(P2, n_runs=100, seed=7)
        assert np.array_equal(long.samples[:100], short.samples)

    def test_zero_mutation_censors_fixed_runs(self):
        p = ModelParams(m=3, ell=2, kappa=2, sigma=2.0, q=0.0, theta=1)
        samples = simulate_lumped(p, n_runs=400, seed=5, step_cap=2000)
        assert 0 < samples.censored < 400
        assert len(samples.samples) + samples.censored == 400

    def test_start_zero_warns_with_zero_samples(self):
        with pytest.warns(UserWarning):
            samples = simulate_lumped(P2, n_runs=10, seed=1, start=0)
        assert np.all(samples.samples == 0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            simulate_lumped(P2, n_runs=0, seed=1)
        with pytest.raises(ValueError):
            simulate_lumped(P2, n_runs=5, seed=1, step_cap=0)
        with pytest.raises(ValueError):
            simulate_lumped(P2, n_runs=5, seed=1, start=3)


class TestFullModel:
    def test_init_counts(self):
        rng = np.random.default_rng(0)
        one = SequencePopulation(6, 3, 2, 2.0, 0.1, rng, "one_master")
        assert one.master_count == 1
        none = SequencePopulation(6, 3, 2, 2.0, 0.1, np.random.default_rng(1), "no_master")
        assert none.master_count == 0

    def test_cache_matches_recount(self):
        samples = simulate_full(
            m=6, ell=3, kappa=4, sigma=2.0, q=0.15, n_runs=40, seed=3, check_cache=True
        )
        assert len(samples.samples) + samples.censored == 40

    def test_zero_mutation_matches_lumped_law(self):
        cap = 3000
        full = simulate_full(m=8, ell=3, kappa=2, sigma=2.0, q=0.0, n_runs=1500, seed=11, step_cap=cap)
        lumped = simulate_lumped(
            ModelParams(m=8, ell=3, kappa=2, sigma=2.0, q=0.0, theta=1),
            n_runs=1500, seed=11, step_cap=cap,
        )
        fu, lu = summarize(full), summarize(lumped)
        assert abs(fu.mean - lu.mean) <= 3 * math.hypot(fu.std_error, lu.std_error)

    def test_sandwich_at_one_point(self):
        m, ell, sigma, q = 10, 3, 1.2, 0.1
        lower = exact_mean(ModelParams(m=m, ell=ell, kappa=2, sigma=sigma, q=q, theta=ell))
        upper = exact_mean(ModelParams(m=m, ell=ell, kappa=2, sigma=sigma, q=q, theta=1))
        stats = summarize(simulate_full(m=m, ell=ell, kappa=2, sigma=sigma, q=q, n_runs=4000, seed=21))
        assert lower - 3 * stats.std_error <= stats.mean <= upper + 3 * stats.std_error

    def test_discovery_time_scaling_toy(self):
        samples = simulate_full(
            m=5, ell=2, kappa=2, sigma=2.0, q=0.2, n_runs=3000, seed=9, init="no_master"
        )
        value = math.log(summarize(samples).mean) / 2
        assert 0.5 * math.log(2) <= value <= 2 * math.log(2)

    def test_exclude_parent_variant_runs(self):
        samples = simulate_full(
            m=6, ell=2, kappa=2, sigma=1.5, q=0.1, n_runs=200, seed=4,
            replace_excludes_parent=True, check_cache=True,
        )
        assert len(samples.samples) + samples.censored == 200

    def test_rejects_oversized_population(self):
        with pytest.raises(ValueError):
            simulate_full(m=10**5, ell=10**4, kappa=2, sigma=2.0, q=0.1, n_runs=1, seed=0)

    def test_rejects_bad_init(self):
        with pytest.raises(ValueError):
            simulate_full(m=4, ell=2, kappa=2, sigma=2.0, q=0.1, n_runs=1, seed=0, init="both")
