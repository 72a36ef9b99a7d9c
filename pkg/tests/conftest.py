"""共享的测试夹具。"""
import numpy as np
import pytest

from src.models import ChoiceInstance, CoverageProblem, FacilityKind, facilities_from_array


def _make_instance(utilities, n_candidates: int, budget: int = 1, weights=None) -> ChoiceInstance:
    utilities = np.atleast_2d(np.asarray(utilities, dtype=float))
    n_customers, n_alt = utilities.shape
    n_competitors = n_alt - n_candidates
    if weights is None:
        weights = np.full(n_customers, 1.0 / n_customers)
    return ChoiceInstance(
        candidates=facilities_from_array(np.zeros((n_candidates, 2)), FacilityKind.CANDIDATE),
        competitors=facilities_from_array(
            np.zeros((n_competitors, 2)), FacilityKind.COMPETITOR, start_id=n_candidates
        ),
        utilities=utilities,
        weights=weights,
        budget=budget,
    )


def _random_instance(rng, n_customers, n_candidates, n_competitors, budget, scale=1.0) -> ChoiceInstance:
    utilities = rng.normal(0.0, scale, size=(n_customers, n_candidates + n_competitors))
    return _make_instance(utilities, n_candidates, budget)


def _random_coverage(rng, n_rows, n_candidates, budget, density=0.3) -> CoverageProblem:
    rows = rng.random((n_rows, n_candidates)) < density
    return CoverageProblem.uniform(rows, budget)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def make_instance():
    """由效用矩阵构造实例：make_instance(v, n_candidates, budget=1, weights=None)。"""
    return _make_instance


@pytest.fixture
def random_instance():
    """随机 MNL 实例：random_instance(rng, N, D, E, r, scale=1.0)。"""
    return _random_instance


@pytest.fixture
def random_coverage():
    """权重一致的随机覆盖问题：random_coverage(rng, rows, D, r, density=0.3)。"""
    return _random_coverage
