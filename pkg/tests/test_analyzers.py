"""熵估计与评估指标的测试。"""
import math

import numpy as np
import pytest

from src.analyzers import (
    capture_entropy,
    entropy_mmnl,
    entropy_mnl,
    estimate_entropy,
    estimate_Z,
    evaluation_sample,
    rgap,
    rgen_gap,
)
from src.generators import Hm14Params, Mmnl3Params, gen_hm14, gen_hm14_mmnl, gen_mmnl3, materialize_sample
from src.models import DecisionVector, EntropyVariant, Estimate, GapReport, Method, Solution
from src.simulators import build_coverage, cluster, size_reduction
from src.solvers import moa_solve, solve_exact, solve_mnl_bruteforce
from src.utils.errors import InfeasibleDecisionError, MetricError
from src.utils.helpers import Stream, rng_stream


class TestEntropyMnl:
    def test_two_equal_candidates(self, make_instance):
        instance = make_instance(np.zeros((3, 3)), n_candidates=2)
        assert entropy_mnl(instance) == pytest.approx(math.log(2))

    def test_dominant_candidate(self, make_instance):
        instance = make_instance([[1000.0, 0.0, 0.0, 0.0]], n_candidates=3)
        assert entropy_mnl(instance) == pytest.approx(0.0, abs=1e-12)

    def test_single_candidate(self, rng, make_instance):
        assert entropy_mnl(make_instance(rng.normal(size=(4, 3)), n_candidates=1)) == 0.0

    def test_competitors_do_not_enter(self, make_instance):
        a = make_instance([[0.0, 1.0, -5.0]], n_candidates=2)
        b = make_instance([[0.0, 1.0, 50.0]], n_candidates=2)
        assert entropy_mnl(a) == pytest.approx(entropy_mnl(b))

    def test_matches_direct_evaluation(self, rng, random_instance):
        instance = random_instance(rng, 6, 5, 2, 2, scale=2.0)
        v = instance.candidate_utilities
        p = np.exp(v) / np.exp(v).sum(axis=1, keepdims=True)
        expected = -(p * np.log(p)).sum(axis=1).mean()
        assert entropy_mnl(instance) == pytest.approx(expected, rel=1e-12)
        assert 0.0 <= entropy_mnl(instance) <= math.log(5)

    def test_decreases_with_beta(self):
        values = [
            entropy_mnl(gen_hm14(Hm14Params(n_customers=200, n_candidates=25, beta=beta), seed=1))
            for beta in (1.0, 5.0, 10.0)
        ]
        assert values[0] > values[1] > values[2]


class TestEntropyMmnl:
    def test_single_candidate(self):
        model = gen_hm14_mmnl(seed=0, n_candidates=1, budget=1)
        assert entropy_mmnl(model, n_tilde=500, seed=0) == 0.0

    def test_bounded(self):
        model = gen_hm14_mmnl(seed=2, n_candidates=10, budget=2)
        value = entropy_mmnl(model, n_tilde=2000, seed=2)
        assert 0.0 < value < math.log(10)

    def test_deterministic(self):
        model = gen_mmnl3(Mmnl3Params(), seed=1)
        assert entropy_mmnl(model, n_tilde=1000, seed=5) == entropy_mmnl(model, n_tilde=1000, seed=5)


class TestCaptureEntropy:
    def test_no_competitors(self, rng, make_instance):
        assert capture_entropy(make_instance(rng.normal(size=(3, 2)), n_candidates=2)) == 0.0

    def test_symmetric_market(self, make_instance):
        instance = make_instance(np.zeros((2, 4)), n_candidates=2)
        assert capture_entropy(instance) == pytest.approx(math.log(2))

    def test_matches_direct_evaluation(self, rng, random_instance):
        instance = random_instance(rng, 7, 3, 4, 1, scale=1.5)
        e = np.exp(instance.utilities)
        p = e[:, :3].sum(axis=1) / e.sum(axis=1)
        expected = np.mean(-(p * np.log(p) + (1 - p) * np.log(1 - p)))
        assert capture_entropy(instance) == pytest.approx(expected, rel=1e-12)

    def test_generative_model(self):
        model = gen_hm14_mmnl(seed=3, n_candidates=8, n_competitors=4, budget=2)
        value = capture_entropy(model, n_tilde=3000, seed=3)
        assert 0.0 < value <= math.log(2)


class TestEstimateEntropy:
    def test_instance_report(self, rng, random_instance):
        instance = random_instance(rng, 5, 4, 2, 2)
        report = estimate_entropy(instance)
        assert report.variant is EntropyVariant.MNL_EXACT
        assert report.sample_size == 5
        assert report.entropy == pytest.approx(entropy_mnl(instance))
        assert report.capture_entropy == pytest.approx(capture_entropy(instance))
        assert report.upper_bound == pytest.approx(math.log(4))
        assert report.to_dict()["unit"] == "nats"

    def test_model_report(self):
        model = gen_mmnl3(Mmnl3Params(), seed=0)
        report = estimate_entropy(model, n_tilde=4000, seed=0)
        assert report.variant is EntropyVariant.MMNL_MONTE_CARLO
        assert report.sample_size == 4000
        assert report.stderr > 0.0
        assert report.entropy == pytest.approx(entropy_mmnl(model, n_tilde=4000, seed=0))


class TestRgap:
    def test_optimal_decision(self, rng, random_instance):
        instance = random_instance(rng, 8, 5, 2, 2)
        optimum = solve_mnl_bruteforce(instance)
        assert rgap(optimum.decision, instance, optimum) == pytest.approx(0.0, abs=1e-12)

    def test_empty_decision(self, rng, random_instance):
        instance = random_instance(rng, 8, 5, 2, 2)
        optimum = solve_mnl_bruteforce(instance)
        assert rgap(DecisionVector.empty(5), instance, optimum) == pytest.approx(100.0)

    def test_zero_optimum(self, rng, random_instance):
        instance = random_instance(rng, 3, 2, 1, 1)
        zero = Solution(decision=DecisionVector.first(2, 1), objective=0.0, method=Method.MOA)
        with pytest.raises(MetricError):
            rgap(DecisionVector.first(2, 1), instance, zero)


class TestEstimateZ:
    def test_empty_decision(self):
        model = gen_hm14_mmnl(seed=0, n_candidates=6, budget=2)
        assert estimate_Z(model, DecisionVector.empty(6), n_tilde=500, seed=0).value == 0.0

    def test_no_competitors(self):
        model = gen_hm14_mmnl(seed=0, n_candidates=6, n_competitors=0, budget=2)
        estimate = estimate_Z(model, DecisionVector.from_indices(6, [3]), n_tilde=500, seed=0)
        assert estimate.value == pytest.approx(1.0)

    def test_matches_direct_evaluation(self):
        model = gen_hm14_mmnl(seed=4, n_candidates=7, n_competitors=3, budget=3)
        x = DecisionVector.from_indices(7, [0, 2, 6])
        estimate = estimate_Z(model, x, n_tilde=3000, seed=11)
        e = np.exp(model.sample_utilities(rng_stream(11, Stream.EVALUATION), 3000))
        own = e[:, [0, 2, 6]].sum(axis=1)
        expected = np.mean(own / (own + e[:, 7:].sum(axis=1)))
        assert estimate.value == pytest.approx(expected, rel=1e-10)
        assert estimate.sample_size == 3000
        assert 0.0 < estimate.stderr < 0.05

    def test_sample_is_reproducible(self):
        model = gen_hm14_mmnl(seed=5, n_candidates=5, budget=2)
        first, again = evaluation_sample(model, 800, 1), evaluation_sample(model, 800, 1)
        assert first is not again
        np.testing.assert_array_equal(first.candidate_exp, again.candidate_exp)

    def test_cache_is_caller_scoped(self):
        model = gen_hm14_mmnl(seed=5, n_candidates=5, budget=2)
        cache = {}
        a = estimate_Z(model, DecisionVector.from_indices(5, [0]), n_tilde=800, seed=1, cache=cache)
        b = estimate_Z(model, DecisionVector.from_indices(5, [0, 3]), n_tilde=800, seed=1, cache=cache)
        estimate_Z(model, DecisionVector.from_indices(5, [2]), n_tilde=800, seed=2, cache=cache)
        assert set(cache) == {(model, 800, 1), (model, 800, 2)}
        assert b.value >= a.value
        uncached = estimate_Z(model, DecisionVector.from_indices(5, [0, 3]), n_tilde=800, seed=1)
        assert uncached.value == b.value

    def test_monotone_in_open_set(self):
        model = gen_hm14_mmnl(seed=6, n_candidates=6, budget=3)
        small = estimate_Z(model, DecisionVector.from_indices(6, [1]), n_tilde=1000, seed=0)
        large = estimate_Z(model, DecisionVector.from_indices(6, [1, 4, 5]), n_tilde=1000, seed=0)
        assert large.value >= small.value

    def test_infeasible_decision(self):
        model = gen_hm14_mmnl(seed=0, n_candidates=6, budget=2)
        with pytest.raises(InfeasibleDecisionError):
            estimate_Z(model, DecisionVector.from_indices(6, [0, 1, 2]), n_tilde=100, seed=0)


class TestRgenGap:
    def test_equal_values(self):
        assert rgen_gap(0.4, 0.4) == 0.0

    def test_estimate_input(self):
        assert rgen_gap(0.5, Estimate(value=0.45, stderr=0.001, sample_size=10)) == pytest.approx(10.0)

    def test_non_positive_in_sample(self):
        with pytest.raises(MetricError):
            rgen_gap(0.0, 0.1)


class TestGapReport:
    def test_undefined_metrics(self):
        gaps = GapReport(rgap_pct=1.234)
        assert math.isnan(gaps.rgen_gap_pct)
        assert str(gaps) == "GapReport(rgap=1.23%, rgen=n/a, size_reduction=n/a)"


TABLE_ENTROPY = {
    (10.0, 25): 0.09, (10.0, 50): 0.11, (10.0, 100): 0.17,
    (5.0, 25): 0.17, (5.0, 50): 0.25, (5.0, 100): 0.36,
    (1.0, 25): 0.78, (1.0, 50): 1.22, (1.0, 100): 1.68,
}


@pytest.mark.slow
class TestReproduction:
    @pytest.mark.parametrize("beta,expected", [(1.0, 0.46), (0.5, 0.90), (0.25, 1.59)])
    def test_mmnl3_entropy(self, beta, expected):
        values = [
            entropy_mmnl(gen_mmnl3(Mmnl3Params(beta=beta), seed=seed), n_tilde=100_000, seed=seed)
            for seed in range(10)
        ]
        assert np.mean(values) == pytest.approx(expected, abs=0.15)

    def test_hm14_mmnl_entropy(self):
        values = [entropy_mmnl(gen_hm14_mmnl(seed=seed), n_tilde=100_000, seed=seed) for seed in range(10)]
        assert np.mean(values) == pytest.approx(0.96, abs=0.15)

    @pytest.mark.parametrize("cell", sorted(TABLE_ENTROPY))
    def test_hm14_entropy(self, cell):
        beta, n_candidates = cell
        values = [
            entropy_mnl(gen_hm14(Hm14Params(n_candidates=n_candidates, beta=beta), seed=seed))
            for seed in range(10)
        ]
        assert np.mean(values) == pytest.approx(TABLE_ENTROPY[cell], rel=0.3)

    def test_hm14_size_reduction(self):
        reductions = []
        for seed in range(10):
            instance = gen_hm14(Hm14Params(n_candidates=25, beta=10.0), seed=seed)
            problem = build_coverage(instance, n_scenarios=100, seed=seed)
            reductions.append(size_reduction(problem, cluster(problem)))
        assert np.mean(reductions) >= 99.0

    def test_hm14_mmnl_ladder(self):
        ladder = (125, 250, 500, 1000, 2000)
        n_seeds = 30
        in_sample = np.empty((len(ladder), n_seeds))
        out_of_sample = np.empty((len(ladder), n_seeds))
        for seed in range(n_seeds):
            model = gen_hm14_mmnl(seed=seed)
            samples = {}
            for k, n in enumerate(ladder):
                solution = moa_solve(materialize_sample(model, n, seed))
                in_sample[k, seed] = solution.objective
                out_of_sample[k, seed] = estimate_Z(model, solution.decision, 100_000, seed, cache=samples).value

        def mean_and_stderr(values):
            return values.mean(axis=1), values.std(axis=1, ddof=1) / math.sqrt(n_seeds)

        z_mean, z_se = mean_and_stderr(in_sample)
        zhat_mean, zhat_se = mean_and_stderr(out_of_sample)
        for k in range(len(ladder) - 1):
            # 相邻两级之间允许 2 个标准误的波动
            assert z_mean[k + 1] <= z_mean[k] + 2.0 * math.hypot(z_se[k], z_se[k + 1])
            assert zhat_mean[k + 1] >= zhat_mean[k] - 2.0 * math.hypot(zhat_se[k], zhat_se[k + 1])

    @pytest.mark.parametrize("n,ceiling", [(6400, 1.0), (25600, 0.4)])
    def test_mmnl3_generalization_gap_closes(self, n, ceiling):
        gaps = []
        for seed in range(10):
            model = gen_mmnl3(Mmnl3Params(beta=1.0), seed=seed)
            coverage = build_coverage(materialize_sample(model, n, seed), n_scenarios=1, seed=seed)
            solution = solve_exact(cluster(coverage))
            gaps.append(rgen_gap(solution.objective, estimate_Z(model, solution.decision, 100_000, seed)))
        assert np.mean(gaps) < ceiling + 0.5

    def test_clustered_solves_are_not_slower(self, rng, random_coverage):
        def solve_time(problem):
            return min(solve_exact(problem).wall_time for _ in range(3))

        faster = 0
        for _ in range(200):
            n_cand = int(rng.integers(2, 9))
            budget = int(rng.integers(1, n_cand + 1))
            problem = random_coverage(rng, int(rng.integers(200, 2001)), n_cand, budget, density=rng.uniform(0.05, 0.4))
            faster += solve_time(cluster(problem)) <= solve_time(problem)
        assert faster >= 190
