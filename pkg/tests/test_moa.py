"""多割外逼近（MOA）及其主问题的测试。"""
from itertools import combinations

import numpy as np
import pytest

from src.models import DecisionVector, Method, objective_mnl
from src.solvers import (
    Cut,
    CustomerGroup,
    MoaConfig,
    group_lower_bound,
    group_value_grad,
    moa_solve,
    partition,
    solve_master,
    solve_mnl_bruteforce,
)
from src.utils.errors import InstanceValidationError, SolverLimitError


def _master_objective(cuts, lower_bounds, indices, n_candidates):
    x = DecisionVector.from_indices(n_candidates, indices).as_array()
    phi = np.asarray(lower_bounds, dtype=float).copy()
    for cut in cuts:
        phi[cut.group] = max(phi[cut.group], cut.value(x))
    return phi.sum()


class TestPartition:
    def test_singletons(self):
        groups = partition(4, 4)
        assert [g.members.tolist() for g in groups] == [[0], [1], [2], [3]]

    def test_single_group(self):
        assert partition(5, 1)[0].members.tolist() == [0, 1, 2, 3, 4]

    def test_sizes(self):
        assert [g.size for g in partition(10, 3)] == [4, 3, 3]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            partition(3, 0)
        with pytest.raises(ValueError):
            partition(3, 4)

    def test_caches_instance_data(self, rng, random_instance):
        instance = random_instance(rng, 6, 3, 2, 1)
        groups = partition(6, 2, instance)
        assert groups[1].exp_utilities.shape == (3, 3)
        np.testing.assert_allclose(groups[1].weights, instance.weights[3:])


class TestGroupValueGrad:
    def test_origin(self, rng, random_instance):
        instance = random_instance(rng, 5, 4, 2, 2)
        (group,) = partition(5, 1, instance)
        value, grad = group_value_grad(group, np.zeros(4))
        assert value == 0.0
        w = np.exp(instance.competitor_utilities).sum(axis=1)
        expected = -(instance.weights[:, None] * np.exp(instance.candidate_utilities) / w[:, None]).sum(axis=0)
        np.testing.assert_allclose(grad, expected, rtol=1e-12)

    def test_single_customer(self, make_instance):
        (group,) = partition(1, 1, make_instance([[0.0, 0.0]], n_candidates=1))
        value, grad = group_value_grad(group, [1.0])
        assert value == pytest.approx(-0.5)
        np.testing.assert_allclose(grad, [-0.25])

    def test_matches_finite_differences(self, rng, random_instance):
        instance = random_instance(rng, 8, 5, 3, 2)
        (group,) = partition(8, 1, instance)
        x = rng.random(5)
        _, grad = group_value_grad(group, x)
        h = 1e-6
        for c in range(5):
            step = np.zeros(5)
            step[c] = h
            numeric = (group_value_grad(group, x + step)[0] - group_value_grad(group, x - step)[0]) / (2 * h)
            assert grad[c] == pytest.approx(numeric, rel=1e-5, abs=1e-9)

    def test_value_at_binary_point(self, rng, random_instance):
        instance = random_instance(rng, 10, 6, 3, 3)
        x = DecisionVector.from_indices(6, [0, 2, 5])
        values = [group_value_grad(g, x.as_array())[0] for g in partition(10, 3, instance)]
        assert sum(values) == pytest.approx(-objective_mnl(instance, x), rel=1e-12)

    def test_cuts_underestimate(self, rng, random_instance):
        instance = random_instance(rng, 12, 6, 3, 6, scale=2.0)
        for group in partition(12, 4, instance):
            for _ in range(30):
                x = (rng.random(6) < 0.5).astype(float)
                y = (rng.random(6) < 0.5).astype(float)
                gx, grad = group_value_grad(group, x)
                gy, _ = group_value_grad(group, y)
                assert gy >= gx + grad @ (y - x) - 1e-12


class TestGroupLowerBound:
    def test_no_competitors(self, rng, make_instance):
        instance = make_instance(rng.normal(size=(4, 3)), n_candidates=3)
        groups = partition(4, 2, instance)
        assert group_lower_bound(groups[0]) == pytest.approx(-instance.weights[:2].sum())

    def test_no_candidates(self):
        group = CustomerGroup(
            members=np.arange(2),
            exp_utilities=np.zeros((2, 0)),
            competitor_mass=np.ones(2),
            weights=np.full(2, 0.5),
        )
        assert group_lower_bound(group) == 0.0

    def test_below_every_decision(self, rng, random_instance):
        instance = random_instance(rng, 9, 6, 2, 3)
        for group in partition(9, 3, instance):
            bound = group_lower_bound(group)
            for _ in range(100):
                x = (rng.random(6) < 0.5).astype(float)
                assert bound <= group_value_grad(group, x)[0] + 1e-15


class TestSolveMaster:
    def test_bounds_only(self):
        result = solve_master([], [-0.2, -0.3], budget=2, n_candidates=5)
        assert result.value == pytest.approx(-0.5)
        assert result.decision.indices == (0, 1)
        assert result.optimal

    def test_linear_objective(self):
        coefficients = np.array([-0.1, -0.5, -0.2, -0.9, -0.3])
        cut = Cut(group=0, coefficients=coefficients, intercept=0.0)
        result = solve_master([cut], [-100.0], budget=2, n_candidates=5)
        assert result.decision.indices == (1, 3)
        assert result.value == pytest.approx(-1.4)

    def test_matches_enumeration(self, rng):
        for _ in range(40):
            n_cand = int(rng.integers(2, 11))
            budget = int(rng.integers(1, min(4, n_cand) + 1))
            n_groups = int(rng.integers(1, 4))
            cuts = [
                Cut(group=int(rng.integers(n_groups)), coefficients=-rng.random(n_cand), intercept=float(rng.normal()))
                for _ in range(int(rng.integers(1, 8)))
            ]
            lower_bounds = -rng.random(n_groups) * 3.0
            result = solve_master(cuts, lower_bounds, budget, n_cand)
            best = min(
                _master_objective(cuts, lower_bounds, subset, n_cand)
                for subset in combinations(range(n_cand), budget)
            )
            assert result.value == pytest.approx(best, abs=1e-12)
            assert result.value == pytest.approx(
                _master_objective(cuts, lower_bounds, result.decision.indices, n_cand), abs=1e-12
            )

    def test_hint_does_not_change_optimum(self, rng):
        cuts = [Cut(group=0, coefficients=-rng.random(6), intercept=0.0) for _ in range(3)]
        plain = solve_master(cuts, [-10.0], 2, 6)
        hinted = solve_master(cuts, [-10.0], 2, 6, hint=DecisionVector.from_indices(6, [4, 5]))
        assert hinted.value == pytest.approx(plain.value)

    def test_optimum_in_trailing_columns(self):
        # 只有最后三列有负系数；结点下界必须考虑下一步之后才可选的列
        cut = Cut(group=0, coefficients=np.array([0.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0]), intercept=0.0)
        for hint in (None, DecisionVector.from_indices(7, [0, 1, 2])):
            result = solve_master([cut], [-10.0], budget=3, n_candidates=7, hint=hint)
            assert result.optimal
            assert result.decision.indices == (4, 5, 6)
            assert result.value == pytest.approx(-3.0)

    def test_hinted_matches_enumeration(self, rng):
        for _ in range(200):
            n_cand = int(rng.integers(3, 9))
            budget = int(rng.integers(2, n_cand))
            cuts = [
                Cut(group=int(rng.integers(2)), coefficients=-rng.random(n_cand), intercept=float(rng.normal()))
                for _ in range(int(rng.integers(1, 6)))
            ]
            lower_bounds = -rng.random(2) * 3.0
            hint = DecisionVector.first(n_cand, budget)
            result = solve_master(cuts, lower_bounds, budget, n_cand, hint=hint)
            best = min(
                _master_objective(cuts, lower_bounds, subset, n_cand)
                for subset in combinations(range(n_cand), budget)
            )
            assert result.value == pytest.approx(best, abs=1e-12)

    def test_node_limit(self, rng):
        cuts = [Cut(group=0, coefficients=-rng.random(12), intercept=0.0) for _ in range(4)]
        result = solve_master(cuts, [-10.0], 5, 12, node_limit=2)
        assert not result.optimal
        assert result.decision.count == 5

    def test_infeasible_budget(self):
        with pytest.raises(ValueError):
            solve_master([], [0.0], budget=3, n_candidates=2)


class TestMoaSolve:
    def test_single_candidate(self, make_instance):
        v = np.array([[0.5, 0.0, -1.0], [-0.3, 0.2, 0.1]])
        instance = make_instance(v, n_candidates=1)
        solution = moa_solve(instance)
        assert solution.iterations == 1
        assert solution.optimal
        assert solution.decision.indices == (0,)
        w = np.exp(v[:, 1:]).sum(axis=1)
        expected = np.mean(np.exp(v[:, 0]) / (np.exp(v[:, 0]) + w))
        assert solution.objective == pytest.approx(expected, rel=1e-12)
        assert solution.method is Method.MOA

    def test_matches_bruteforce(self, rng, random_instance):
        for _ in range(50):
            n_cand = int(rng.integers(4, 11))
            budget = int(rng.integers(1, 4))
            instance = random_instance(
                rng, int(rng.integers(5, 31)), n_cand, int(rng.integers(1, 4)), budget, scale=2.0
            )
            solution = moa_solve(instance)
            oracle = solve_mnl_bruteforce(instance)
            assert solution.optimal
            assert solution.objective == pytest.approx(oracle.objective, abs=1e-6)
            assert solution.decision.count == budget

    def test_trace_brackets_optimum(self, rng, random_instance):
        instance = random_instance(rng, 20, 9, 3, 3, scale=2.0)
        solution = moa_solve(instance)
        optimum = -solve_mnl_bruteforce(instance).objective
        masters = [row["master_value"] for row in solution.trace]
        incumbents = [row["incumbent_value"] for row in solution.trace]
        assert all(m <= optimum + 1e-9 for m in masters)
        assert all(i >= optimum - 1e-9 for i in incumbents)
        assert all(b >= a - 1e-12 for a, b in zip(masters, masters[1:]))
        assert all(b <= a + 1e-12 for a, b in zip(incumbents, incumbents[1:]))
        assert solution.trace[-1]["gap"] <= 1e-6
        assert solution.bound == pytest.approx(-masters[-1])

    @pytest.mark.parametrize("groups", [1, 3, None])
    def test_group_variants_agree(self, rng, random_instance, groups):
        instance = random_instance(rng, 15, 8, 2, 3, scale=2.0)
        solution = moa_solve(instance, MoaConfig(groups=groups))
        assert solution.optimal
        assert solution.objective == pytest.approx(solve_mnl_bruteforce(instance).objective, abs=1e-6)

    def test_multi_slot_budgets(self, rng, random_instance):
        for _ in range(60):
            n_cand = int(rng.integers(4, 9))
            budget = int(rng.integers(2, n_cand))
            instance = random_instance(rng, int(rng.integers(5, 25)), n_cand, 2, budget, scale=3.0)
            solution = moa_solve(instance)
            assert solution.optimal
            assert solution.objective == pytest.approx(solve_mnl_bruteforce(instance).objective, abs=1e-6)

    def test_requires_competitors(self, rng, make_instance):
        instance = make_instance(rng.normal(size=(3, 4)), n_candidates=4, budget=2)
        with pytest.raises(InstanceValidationError):
            moa_solve(instance)

    def test_iteration_limit(self, rng, make_instance):
        v = rng.normal(size=(10, 8))
        v[:, :2] -= 30.0
        instance = make_instance(v, n_candidates=6, budget=2)
        solution = moa_solve(instance, MoaConfig(max_iterations=1))
        assert not solution.optimal
        assert solution.iterations == 1
        assert solution.objective == pytest.approx(objective_mnl(instance, solution.decision))

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            MoaConfig(groups=0)
        with pytest.raises(ValueError):
            MoaConfig(max_iterations=0)


class TestMnlBruteforce:
    def test_lexicographic_tie(self, make_instance):
        instance = make_instance([[0.0, 0.0, 0.0, -1.0]], n_candidates=3, budget=2)
        assert solve_mnl_bruteforce(instance).decision.indices == (0, 1)

    def test_limit(self, rng, random_instance):
        instance = random_instance(rng, 2, 20, 1, 10)
        with pytest.raises(SolverLimitError):
            solve_mnl_bruteforce(instance, limit=100)
