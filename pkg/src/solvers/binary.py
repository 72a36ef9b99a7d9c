"""基数约束下最大加权覆盖（仿真 0-1 问题）的精确求解。

决策按已开设下标的有序元组比较；在所有最优解中返回字典序最小者。
"""
import math
import time
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from src.models import ClusteredProblem, CoverageProblem, DecisionVector, MassView, Method, Solution
from src.utils.config import config
from src.utils.errors import SolverLimitError

Problem = Union[CoverageProblem, ClusteredProblem]


class SolverMode(str, Enum):
    BRANCH_AND_BOUND = "branch-and-bound"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class SolverConfig:
    """0-1 求解器设置。平局规则固定为字典序最小。"""

    mode: SolverMode = SolverMode.BRANCH_AND_BOUND
    node_limit: int = 5_000_000
    time_limit: float = 600.0  # 秒

    def __post_init__(self):
        object.__setattr__(self, "mode", SolverMode(self.mode))
        if self.node_limit <= 0 or self.time_limit <= 0:
            raise ValueError("Solver limits must be positive")

    @classmethod
    def from_config(cls) -> "SolverConfig":
        return cls(
            mode=config.get("solvers.binary.mode", SolverMode.BRANCH_AND_BOUND.value),
            node_limit=config.node_limit,
            time_limit=float(config.get("solvers.binary.time_limit", 600)),
        )


class _LimitReached(Exception):
    pass


def _method_for(problem: Problem) -> Method:
    return Method.SBC if isinstance(problem, ClusteredProblem) else Method.SB


def _gains(view: MassView, rows: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """每个列在尚未覆盖的行上的剩余增益。"""
    if rows.size == 0 or columns.size == 0:
        return np.zeros(columns.size, dtype=view.masses.dtype)
    return view.masses[rows] @ view.matrix[np.ix_(rows, columns)].astype(view.masses.dtype)


def _node_bound(view: MassView, rows: np.ndarray, columns: np.ndarray, gains: np.ndarray, slots: int):
    """剩余 slots 个位置可额外覆盖质量的上界：前 slots 大增益之和，且不超过可覆盖的剩余质量。"""
    if slots <= 0 or columns.size == 0 or rows.size == 0:
        return 0
    k = min(slots, columns.size)
    top = np.partition(gains, columns.size - k)[columns.size - k :].sum()
    coverable = view.masses[rows][view.matrix[np.ix_(rows, columns)].any(axis=1)].sum()
    return min(top, coverable)


def upper_bound(
    problem: Problem,
    fixed_in: Iterable[int],
    fixed_out: Iterable[int] = (),
) -> float:
    """部分赋值（固定开设 / 固定关闭 / 自由）下最优补全目标值的可容许上界。

    参数:
        problem: 覆盖问题或聚类问题
        fixed_in: 固定开设的候选下标
        fixed_out: 固定关闭的候选下标

    返回:
        目标值（市场份额）的上界，不低于任何可行补全的目标值
    """
    view = problem.mass_view()
    fixed_in = sorted(set(fixed_in))
    fixed_out = set(fixed_out)
    if fixed_out & set(fixed_in):
        raise ValueError("A candidate cannot be both fixed in and fixed out")
    slots = problem.budget - len(fixed_in)
    if slots < 0:
        raise ValueError(f"{len(fixed_in)} fixed candidates exceed the budget r={problem.budget}")

    covered = view.matrix[:, fixed_in].any(axis=1) if fixed_in else np.zeros(view.matrix.shape[0], dtype=bool)
    covered_mass = view.covered_mass(covered)
    rows = np.flatnonzero(~covered)
    free = np.array(
        [c for c in range(problem.n_candidates) if c not in fixed_out and c not in fixed_in], dtype=np.int64
    )
    gains = _gains(view, rows, free)
    extra = _node_bound(view, rows, free, gains, slots)
    return view.fraction(covered_mass + extra)


def _greedy(view: MassView, budget: int) -> Tuple[int, ...]:
    """按最大剩余增益贪心选列，平局取最小下标；增益为零时自然补齐最小的未用下标。"""
    n_cand = view.matrix.shape[1]
    chosen: List[int] = []
    rows = np.arange(view.matrix.shape[0])
    for _ in range(budget):
        columns = np.array([c for c in range(n_cand) if c not in chosen], dtype=np.int64)
        gains = _gains(view, rows, columns)
        pick = int(columns[int(np.argmax(gains))])
        chosen.append(pick)
        rows = rows[~view.matrix[rows, pick]]
    return tuple(sorted(chosen))


def _leaf_value(view: MassView, chosen: Sequence[int]):
    return view.covered_mass(view.matrix[:, list(chosen)].any(axis=1))


def _branch_and_bound(view: MassView, budget: int, solver_config: SolverConfig):
    """按下标字典序的深度优先分支定界。

    以贪心解的值作为初始门槛：先找到的（字典序更小的）不劣于门槛的解被接受，
    之后只接受严格更优的解，因此返回的是字典序最小的最优解。
    """
    n_cand = view.matrix.shape[1]
    tolerance = 0 if view.exact else 1e-12 * float(view.total)
    greedy = _greedy(view, budget)
    state = {"best": None, "value": _leaf_value(view, greedy), "nodes": 0}
    deadline = time.perf_counter() + solver_config.time_limit

    def prunable(bound) -> bool:
        if not view.exact:
            return bound < state["value"] - tolerance
        if state["best"] is None:
            return bound < state["value"]
        return bound <= state["value"]

    def visit(chosen: List[int], start: int, rows: np.ndarray, covered):
        state["nodes"] += 1
        if state["nodes"] > solver_config.node_limit or time.perf_counter() > deadline:
            raise _LimitReached()

        slots = budget - len(chosen)
        if slots == 0:
            value = covered if view.exact else _leaf_value(view, chosen)
            if (state["best"] is None and value >= state["value"]) or value > state["value"]:
                state["best"], state["value"] = tuple(chosen), value
            return

        # 界覆盖所有剩余列；子节点只从还能补满 r 个的前缀列中选
        remaining = np.arange(start, n_cand, dtype=np.int64)
        gains = _gains(view, rows, remaining)
        if prunable(covered + _node_bound(view, rows, remaining, gains, slots)):
            return
        for pos, column in enumerate(remaining[: n_cand - slots + 1 - start]):
            hit = view.matrix[rows, column]
            gained = int(gains[pos]) if view.exact else float(gains[pos])
            visit(chosen + [int(column)], int(column) + 1, rows[~hit], covered + gained)

    try:
        visit([], 0, np.arange(view.matrix.shape[0]), 0)
        optimal = True
    except _LimitReached:
        optimal = False

    best = state["best"] if state["best"] is not None else greedy
    value = state["value"] if state["best"] is not None else _leaf_value(view, greedy)
    return best, value, state["nodes"], optimal


def solve_exact(problem: Problem, solver_config: Optional[SolverConfig] = None) -> Solution:
    """精确求解仿真 0-1 问题（|x| = r），返回字典序最小的最优解。

    节点或时间上限耗尽时返回已知最好的可行解，optimal=False。
    """
    solver_config = solver_config or SolverConfig.from_config()
    if solver_config.mode is SolverMode.EXHAUSTIVE:
        solution = solve_bruteforce(problem)
        solution.method = _method_for(problem)
        return solution

    started = time.perf_counter()
    view = problem.mass_view()
    best, value, nodes, optimal = _branch_and_bound(view, problem.budget, solver_config)
    elapsed = time.perf_counter() - started

    decision = DecisionVector.from_indices(problem.n_candidates, best)
    objective = view.fraction(value)
    if not optimal:
        logger.warning(
            f"Branch-and-bound stopped after {nodes} nodes ({elapsed:.1f}s); returning best found "
            f"objective {objective:.6f}"
        )
    logger.debug(f"B&B on {problem}: {nodes} nodes, {elapsed * 1000:.1f}ms, objective {objective:.6f}")
    return Solution(
        decision=decision,
        objective=objective,
        method=_method_for(problem),
        wall_time=elapsed,
        nodes=nodes,
        optimal=optimal,
        bound=objective if optimal else None,
    )


def solve_bruteforce(problem: Problem, limit: Optional[int] = None) -> Solution:
    """枚举所有大小为 r 的子集（精确，平局取字典序最小）。

    超过组合数上限时抛出 SolverLimitError。
    """
    limit = limit or config.enumeration_limit
    n_cand, budget = problem.n_candidates, problem.budget
    n_subsets = math.comb(n_cand, budget)
    if n_subsets > limit:
        raise SolverLimitError(f"C({n_cand}, {budget}) = {n_subsets} subsets exceed the limit {limit}")

    started = time.perf_counter()
    view = problem.mass_view()
    best, best_value = None, None
    for subset in combinations(range(n_cand), budget):
        value = _leaf_value(view, subset)
        if best_value is None or value > best_value:
            best, best_value = subset, value
    elapsed = time.perf_counter() - started

    return Solution(
        decision=DecisionVector.from_indices(n_cand, best),
        objective=view.fraction(best_value),
        method=Method.BRUTE,
        wall_time=elapsed,
        nodes=n_subsets,
        optimal=True,
        bound=view.fraction(best_value),
    )
