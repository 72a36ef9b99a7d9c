"""选址问题数据模型。"""
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.utils.errors import InfeasibleDecisionError, InstanceValidationError

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Point2D:
    """平面上的一个位置（距离单位）。"""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InstanceValidationError(f"Non-finite coordinates: ({self.x}, {self.y})")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


class FacilityKind(str, Enum):
    CANDIDATE = "candidate"
    COMPETITOR = "competitor"


@dataclass(frozen=True)
class Facility:
    """候选设施（集合 D）或竞争设施（集合 E）。"""

    id: int  # 实例内唯一
    position: Point2D
    kind: FacilityKind
    location_type: Optional[int] = None  # MMNL-3 的位置类型 l，其余族为空

    def __str__(self) -> str:
        suffix = f", type={self.location_type}" if self.location_type is not None else ""
        return f"Facility({self.kind.value} #{self.id} @ ({self.position.x:.2f}, {self.position.y:.2f}){suffix})"


def facilities_from_array(
    positions: np.ndarray,
    kind: FacilityKind,
    start_id: int = 0,
    location_types: Optional[Iterable[int]] = None,
) -> List[Facility]:
    """把坐标数组转换为 Facility 列表。

    参数:
        positions: (m, 2) 坐标
        kind: 设施类别
        start_id: 第一个设施的编号
        location_types: 可选的位置类型序列

    返回:
        Facility 列表
    """
    types = list(location_types) if location_types is not None else [None] * len(positions)
    return [
        Facility(
            id=start_id + i,
            position=Point2D(float(p[0]), float(p[1])),
            kind=kind,
            location_type=None if t is None else int(t),
        )
        for i, (p, t) in enumerate(zip(positions, types))
    ]


@dataclass(frozen=True, eq=False)
class ChoiceInstance:
    """有限支撑（条件视角）下的最大捕获问题。

    效用矩阵按 候选设施在前、竞争设施在后 的顺序存储，且已经乘过 beta/alpha。
    构造后不可变，可在线程间共享。
    """

    candidates: Tuple[Facility, ...]
    competitors: Tuple[Facility, ...]
    utilities: np.ndarray  # (|N|, |D|+|E|)
    weights: np.ndarray  # (|N|,)
    budget: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "competitors", tuple(self.competitors))
        utilities = np.array(self.utilities, dtype=float)
        weights = np.array(self.weights, dtype=float)
        utilities.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "utilities", utilities)
        object.__setattr__(self, "weights", weights)
        self._validate()

    def _validate(self):
        n_alt = len(self.candidates) + len(self.competitors)
        if self.utilities.ndim != 2 or self.utilities.shape[1] != n_alt:
            raise InstanceValidationError(
                f"Utility matrix must be |N| x {n_alt}, got {self.utilities.shape}"
            )
        if self.utilities.shape[0] < 1:
            raise InstanceValidationError("Instance needs at least one customer")
        if not np.all(np.isfinite(self.utilities)):
            raise InstanceValidationError("Utilities must be finite")
        if self.weights.shape != (self.utilities.shape[0],):
            raise InstanceValidationError(
                f"Expected {self.utilities.shape[0]} customer weights, got {self.weights.shape}"
            )
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise InstanceValidationError("Customer weights must be positive and finite")
        total = math.fsum(self.weights.tolist())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise InstanceValidationError(f"Customer weights must sum to 1, got {total:.12f}")
        if not 1 <= self.budget <= len(self.candidates):
            raise InstanceValidationError(
                f"Budget r={self.budget} outside [1, {len(self.candidates)}]"
            )

        facilities = self.candidates + self.competitors
        ids = [f.id for f in facilities]
        if len(set(ids)) != len(ids):
            raise InstanceValidationError("Facility ids must be unique")
        typed = [f.location_type is not None for f in facilities]
        if any(typed) and not all(typed):
            raise InstanceValidationError("Location types must be given for all facilities or none")

    @property
    def n_customers(self) -> int:
        return int(self.utilities.shape[0])

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    @property
    def n_competitors(self) -> int:
        return len(self.competitors)

    @property
    def is_typed(self) -> bool:
        return bool(self.candidates) and self.candidates[0].location_type is not None

    @property
    def candidate_utilities(self) -> np.ndarray:
        return self.utilities[:, : self.n_candidates]

    @property
    def competitor_utilities(self) -> np.ndarray:
        return self.utilities[:, self.n_candidates :]

    @cached_property
    def _row_shift(self) -> np.ndarray:
        # 每个客户的最大效用，用于 log-sum-exp 式的平移
        return self.utilities.max(axis=1)

    @cached_property
    def scaled_candidate_exp(self) -> np.ndarray:
        """e^{v_nc - m_n}，c ∈ D。所有比值型量都对平移不变。"""
        return np.exp(self.candidate_utilities - self._row_shift[:, None])

    @cached_property
    def scaled_competitor_mass(self) -> np.ndarray:
        """W_n e^{-m_n}，与 scaled_candidate_exp 同尺度。"""
        if self.n_competitors == 0:
            return np.zeros(self.n_customers)
        return np.exp(self.competitor_utilities - self._row_shift[:, None]).sum(axis=1)

    def with_budget(self, budget: int) -> "ChoiceInstance":
        return replace(self, budget=budget)

    def __str__(self) -> str:
        family = self.metadata.get("family", "custom")
        return (
            f"ChoiceInstance({family}, N={self.n_customers}, D={self.n_candidates}, "
            f"E={self.n_competitors}, r={self.budget})"
        )


@dataclass(frozen=True)
class DecisionVector:
    """开设决策 x ∈ {0,1}^{|D|}，按实例中的候选顺序索引。"""

    open: Tuple[bool, ...]

    @classmethod
    def from_indices(cls, n_candidates: int, indices: Iterable[int]) -> "DecisionVector":
        bits = [False] * n_candidates
        for i in indices:
            if not 0 <= i < n_candidates:
                raise IndexError(f"Candidate index {i} out of range [0, {n_candidates})")
            bits[i] = True
        return cls(tuple(bits))

    @classmethod
    def empty(cls, n_candidates: int) -> "DecisionVector":
        return cls((False,) * n_candidates)

    @classmethod
    def first(cls, n_candidates: int, budget: int) -> "DecisionVector":
        """字典序最小的可行决策：开设前 r 个候选。"""
        return cls.from_indices(n_candidates, range(min(budget, n_candidates)))

    @property
    def size(self) -> int:
        return len(self.open)

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(i for i, bit in enumerate(self.open) if bit)

    @property
    def count(self) -> int:
        return sum(self.open)

    def as_array(self) -> np.ndarray:
        return np.fromiter(self.open, dtype=float, count=len(self.open))

    def as_mask(self) -> np.ndarray:
        return np.fromiter(self.open, dtype=bool, count=len(self.open))

    def check(self, n_candidates: int, budget: int) -> None:
        """校验可行性，不可行时抛出 InfeasibleDecisionError。"""
        if self.size != n_candidates:
            raise InfeasibleDecisionError(
                f"Decision has {self.size} entries, instance has {n_candidates} candidates"
            )
        if self.count > budget:
            raise InfeasibleDecisionError(f"Decision opens {self.count} > r={budget} facilities")

    def to_bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.open)

    @classmethod
    def from_bitstring(cls, bits: str) -> "DecisionVector":
        return cls(tuple(ch == "1" for ch in bits.strip()))

    def __str__(self) -> str:
        return f"DecisionVector(open={list(self.indices)})"


class Method(str, Enum):
    SB = "SB"
    SBC = "SBC"
    MOA = "MOA"
    BRUTE = "BRUTE"


@dataclass
class Solution:
    """求解结果：决策、目标值与求解来源。"""

    decision: DecisionVector
    objective: float  # 市场份额，∈ [0, 1]
    method: Method
    wall_time: float = 0.0  # 秒
    iterations: int = 0
    nodes: int = 0
    optimal: bool = True
    bound: Optional[float] = None
    trace: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        """转换为字典用于日志记录/序列化。"""
        return {
            "method": self.method.value,
            "open": list(self.decision.indices),
            "bits": self.decision.to_bitstring(),
            "objective": self.objective,
            "optimal": self.optimal,
            "wall_time": self.wall_time,
            "iterations": self.iterations,
            "nodes": self.nodes,
            "bound": self.bound,
        }

    def __str__(self) -> str:
        flag = "" if self.optimal else ", NOT optimal"
        return (
            f"Solution({self.method.value}, open={list(self.decision.indices)}, "
            f"objective={self.objective:.6f}, time={self.wall_time * 1000:.1f}ms{flag})"
        )
