"""仿真 0-1 问题的数据模型：覆盖问题及其聚类形式。"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from src.models.instance import DecisionVector, WEIGHT_TOLERANCE
from src.utils.errors import InstanceValidationError


class MassView(NamedTuple):
    """求解器使用的统一视图：覆盖矩阵、每行质量与总质量。

    exact 为 True 时质量是整数计数，目标值按 covered_count / total_count 计算。
    """

    matrix: np.ndarray  # (rows, |D|) bool
    masses: np.ndarray  # int64 或 float
    total: Union[int, float]
    exact: bool

    def covered_mass(self, covered: np.ndarray) -> Union[int, float]:
        """被覆盖行的质量之和（整数精确求和，浮点用 fsum）。"""
        if self.exact:
            return int(self.masses[covered].sum())
        return math.fsum(self.masses[covered].tolist())

    def fraction(self, mass: Union[int, float]) -> float:
        return float(mass) / float(self.total) if self.total else 0.0


def _as_bool_matrix(rows, n_candidates: Optional[int]) -> np.ndarray:
    matrix = np.asarray(rows, dtype=bool)
    if matrix.ndim == 1 and matrix.size == 0:
        matrix = matrix.reshape(0, n_candidates or 0)
    if matrix.ndim != 2:
        raise InstanceValidationError(f"Coverage rows must form a 2-D matrix, got shape {matrix.shape}")
    return matrix


@dataclass(frozen=True, eq=False)
class CoverageProblem:
    """模拟客户 (n, s) 的捕获系数矩阵 a_nsc 与行权重。"""

    rows: np.ndarray  # (|N||S|, |D|) bool
    weights: np.ndarray  # (|N||S|,)
    budget: int
    counts: Optional[np.ndarray] = None  # 整数重数；权重一致时存在
    n_customers: int = 0
    n_scenarios: int = 1
    build_seconds: float = 0.0

    def __post_init__(self):
        rows = _as_bool_matrix(self.rows, None)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "weights", weights)
        if self.counts is not None:
            object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64).reshape(-1))
        self._validate()

    def _validate(self):
        if self.weights.shape != (self.rows.shape[0],):
            raise InstanceValidationError("One weight per coverage row is required")
        if self.rows.shape[0] and np.any(self.weights <= 0):
            raise InstanceValidationError("Coverage row weights must be positive")
        total = math.fsum(self.weights.tolist())
        if self.rows.shape[0] and abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise InstanceValidationError(f"Coverage row weights must sum to 1, got {total:.12f}")
        if self.counts is not None:
            if self.counts.shape != self.weights.shape or np.any(self.counts <= 0):
                raise InstanceValidationError("Counts must be positive integers, one per row")
        if not 1 <= self.budget <= self.n_candidates:
            raise InstanceValidationError(f"Budget r={self.budget} outside [1, {self.n_candidates}]")

    @classmethod
    def uniform(cls, rows, budget: int, **kwargs) -> "CoverageProblem":
        """所有行权重相同（1/(|N||S|)）的覆盖问题。"""
        matrix = _as_bool_matrix(rows, None)
        n_rows = matrix.shape[0]
        counts = np.ones(n_rows, dtype=np.int64)
        return cls(matrix, counts / n_rows, budget, counts=counts, **kwargs)

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_candidates(self) -> int:
        return int(self.rows.shape[1])

    def mass_view(self) -> MassView:
        if self.counts is not None:
            return MassView(self.rows, self.counts, int(self.counts.sum()), True)
        return MassView(self.rows, self.weights, math.fsum(self.weights.tolist()), False)

    def __str__(self) -> str:
        return (
            f"CoverageProblem(rows={self.n_rows}, D={self.n_candidates}, r={self.budget}, "
            f"N={self.n_customers}, S={self.n_scenarios})"
        )


@dataclass(frozen=True, eq=False)
class ClusteredProblem:
    """按偏好轮廓聚类后的问题：互不相同的非零轮廓 a_pc 及其质量 q_p。

    全零轮廓已删除，但其质量保留在 total_mass 中，目标值始终是整个市场的份额。
    """

    profiles: np.ndarray  # (|P|, |D|) bool
    masses: np.ndarray  # (|P|,)
    total_mass: float
    budget: int
    counts: Optional[np.ndarray] = None
    total_count: Optional[int] = None
    source_rows: int = 0  # 聚类前的行数 |N||S|
    n_customers: int = 0
    n_scenarios: int = 1
    build_seconds: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "profiles", _as_bool_matrix(self.profiles, None))
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float).reshape(-1))
        if self.counts is not None:
            object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64).reshape(-1))
        self._validate()

    def _validate(self):
        if self.masses.shape != (self.profiles.shape[0],):
            raise InstanceValidationError("One mass per profile is required")
        if self.profiles.shape[0]:
            if not self.profiles.any(axis=1).all():
                raise InstanceValidationError("Clustered problems cannot contain the all-zero profile")
            packed = np.packbits(self.profiles, axis=1)
            if np.unique(packed, axis=0).shape[0] != packed.shape[0]:
                raise InstanceValidationError("Profiles must be pairwise distinct")
        if math.fsum(self.masses.tolist()) > self.total_mass + WEIGHT_TOLERANCE:
            raise InstanceValidationError("Profile masses exceed the total mass")
        if (self.counts is None) != (self.total_count is None):
            raise InstanceValidationError("counts and total_count must be given together")
        if not 1 <= self.budget <= self.n_candidates:
            raise InstanceValidationError(f"Budget r={self.budget} outside [1, {self.n_candidates}]")

    @property
    def n_profiles(self) -> int:
        return int(self.profiles.shape[0])

    @property
    def n_candidates(self) -> int:
        return int(self.profiles.shape[1])

    @property
    def zero_mass(self) -> float:
        """被竞争者必然捕获的客户质量（已删除的全零轮廓）。"""
        if self.counts is not None:
            return (self.total_count - int(self.counts.sum())) * (self.total_mass / self.total_count)
        return self.total_mass - math.fsum(self.masses.tolist())

    def mass_view(self) -> MassView:
        if self.counts is not None:
            return MassView(self.profiles, self.counts, int(self.total_count), True)
        return MassView(self.profiles, self.masses, float(self.total_mass), False)

    def as_coverage(self) -> CoverageProblem:
        """还原为覆盖问题；全零质量作为一行全零行保留，以便再聚类是恒等映射。"""
        rows = self.profiles
        if self.counts is not None:
            counts = self.counts
            dropped = int(self.total_count) - int(counts.sum())
            if dropped > 0:
                rows = np.vstack([rows, np.zeros((1, self.n_candidates), dtype=bool)])
                counts = np.append(counts, dropped)
            weights = counts / float(self.total_count)
            return CoverageProblem(
                rows, weights, self.budget, counts=counts,
                n_customers=self.n_customers, n_scenarios=self.n_scenarios,
            )
        masses = self.masses
        dropped = self.total_mass - math.fsum(masses.tolist())
        if dropped > 0:
            rows = np.vstack([rows, np.zeros((1, self.n_candidates), dtype=bool)])
            masses = np.append(masses, dropped)
        return CoverageProblem(
            rows, masses / self.total_mass, self.budget,
            n_customers=self.n_customers, n_scenarios=self.n_scenarios,
        )

    def __str__(self) -> str:
        return (
            f"ClusteredProblem(profiles={self.n_profiles}, D={self.n_candidates}, r={self.budget}, "
            f"source_rows={self.source_rows})"
        )


def coverage_objective(problem: Union[CoverageProblem, ClusteredProblem], x: DecisionVector) -> float:
    """仿真问题的样本内目标 Z_NS(x)：被 x 覆盖的质量占总质量的比例。"""
    x.check(problem.n_candidates, problem.budget)
    view = problem.mass_view()
    mask = x.as_mask()
    if view.matrix.shape[0] == 0 or not mask.any():
        return 0.0
    covered = view.matrix[:, mask].any(axis=1)
    return view.fraction(view.covered_mass(covered))
