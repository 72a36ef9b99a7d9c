"""MNL 有限支撑问题的多割外逼近（MOA）精确算法。

最小化 G(x) = Σ_t g_t(x)，其中 g_t 是第 t 组客户捕获份额的相反数（凸、连续可微）。
主问题把 φ_t = max(L_t, 各割平面) 折叠进目标，变成纯 0-1 问题，用分支定界精确求解。
"""
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.models import ChoiceInstance, DecisionVector, Method, Solution, objective_mnl
from src.utils.config import config
from src.utils.errors import InstanceValidationError, SolverLimitError


@dataclass(frozen=True, eq=False)
class CustomerGroup:
    """客户组 t；缓存组内客户的 e^{v}（按客户平移）、W 与权重。"""

    members: np.ndarray
    exp_utilities: Optional[np.ndarray] = None  # (m, |D|)
    competitor_mass: Optional[np.ndarray] = None  # (m,)
    weights: Optional[np.ndarray] = None  # (m,)

    @property
    def size(self) -> int:
        return int(self.members.size)


@dataclass(frozen=True)
class Cut:
    """次梯度割 φ_t ≥ coefficients·x + intercept。"""

    group: int
    coefficients: np.ndarray
    intercept: float

    def value(self, x: np.ndarray) -> float:
        return float(self.coefficients @ x + self.intercept)


@dataclass(frozen=True)
class MoaConfig:
    """MOA 设置。groups 为空时取 |N|（多割）；1 为单割；其余为混合版本。"""

    groups: Optional[int] = None
    tolerance: float = 1e-6
    max_iterations: int = 1000
    time_limit: float = 600.0
    master_node_limit: int = 5_000_000

    def __post_init__(self):
        if self.groups is not None and self.groups < 1:
            raise ValueError(f"Group count must be at least 1, got {self.groups}")
        if self.tolerance < 0 or self.max_iterations < 1:
            raise ValueError("Tolerance must be non-negative and max_iterations positive")

    @classmethod
    def from_config(cls, **overrides) -> "MoaConfig":
        section = config.section("solvers.moa")
        values = {
            "groups": section.get("groups"),
            "tolerance": config.moa_tolerance,
            "max_iterations": int(section.get("max_iterations", 1000)),
            "time_limit": float(section.get("time_limit", 600)),
            "master_node_limit": int(section.get("master_node_limit", 5_000_000)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def resolve_groups(self, n_customers: int) -> int:
        if self.groups is not None:
            return self.groups
        threshold = int(config.get("solvers.moa.large_instance_threshold", 10_000))
        if n_customers > threshold:
            return min(n_customers, int(config.get("solvers.moa.large_instance_groups", 20)))
        return n_customers


@dataclass
class MasterResult:
    decision: DecisionVector
    phi: np.ndarray
    value: float
    nodes: int = 0
    optimal: bool = True


def partition(n_customers: int, groups: int, instance: Optional[ChoiceInstance] = None) -> List[CustomerGroup]:
    """把客户按顺序切成 T 个连续块，块大小为 ⌈n/T⌉ 或 ⌊n/T⌋（大块在前）。

    参数:
        n_customers: 客户数 |N|
        groups: 组数 T
        instance: 提供时同时缓存组内数据

    返回:
        CustomerGroup 列表
    """
    if not 1 <= groups <= n_customers:
        raise ValueError(f"Group count T={groups} outside [1, {n_customers}]")
    blocks = np.array_split(np.arange(n_customers), groups)
    if instance is None:
        return [CustomerGroup(members=b) for b in blocks]
    return [
        CustomerGroup(
            members=b,
            exp_utilities=instance.scaled_candidate_exp[b],
            competitor_mass=instance.scaled_competitor_mass[b],
            weights=instance.weights[b],
        )
        for b in blocks
    ]


def group_value_grad(group: CustomerGroup, x) -> Tuple[float, np.ndarray]:
    """g_t(x) 及其梯度，x ∈ [0,1]^{|D|} 可以是松弛值。

    g_t(x) = -Σ q_n s_n/(s_n + W_n)，s_n = Σ_c e^{v_nc} x_c；
    ∂g_t/∂x_c = -Σ q_n W_n e^{v_nc} / (s_n + W_n)^2。
    """
    x = np.asarray(x, dtype=float)
    s = group.exp_utilities @ x
    denom = s + group.competitor_mass
    ratio = np.divide(s, denom, out=np.zeros_like(s), where=denom > 0)
    slope = np.divide(
        group.weights * group.competitor_mass, denom * denom, out=np.zeros_like(s), where=denom > 0
    )
    return -float(group.weights @ ratio), -(slope @ group.exp_utilities)


def group_lower_bound(group: CustomerGroup) -> float:
    """L_t = g_t(1)：g_t 按分量非增，全部开设时最小。"""
    n_cand = group.exp_utilities.shape[1]
    value, _ = group_value_grad(group, np.ones(n_cand))
    return value


def _evaluate_all(instance: ChoiceInstance, starts: np.ndarray, x: np.ndarray):
    """一次性计算所有组的 g_t(x) 与梯度（组为连续块，用 reduceat 聚合）。"""
    exp_u = instance.scaled_candidate_exp
    w = instance.scaled_competitor_mass
    q = instance.weights
    s = exp_u @ x
    denom = s + w
    values = -np.add.reduceat(q * s / denom, starts)
    slope = q * w / (denom * denom)
    grads = -np.add.reduceat(slope[:, None] * exp_u, starts, axis=0)
    return values, grads


class _MasterLimit(Exception):
    pass


def solve_master(
    cuts: Sequence[Cut],
    lower_bounds,
    budget: int,
    n_candidates: int,
    hint: Optional[DecisionVector] = None,
    node_limit: int = 5_000_000,
) -> MasterResult:
    """精确求解主问题 min_x Σ_t max(L_t, max_{k∈t} a_k·x + b_k)，|x| = r。

    深度优先按下标字典序搜索；结点下界为 Σ_t max(L_t, max_k 割在自由变量补全上的最小值)。
    提供 hint 时用其目标值作为初始门槛。平局返回字典序最小的解。
    """
    lower_bounds = np.asarray(lower_bounds, dtype=float)
    if not 1 <= budget <= n_candidates:
        raise ValueError(f"Infeasible budget r={budget} for {n_candidates} candidates")

    if cuts:
        coef = np.vstack([c.coefficients for c in cuts])
        intercept = np.array([c.intercept for c in cuts])
        owner = np.array([c.group for c in cuts], dtype=np.int64)
    else:
        coef = np.zeros((0, n_candidates))
        intercept = np.zeros(0)
        owner = np.zeros(0, dtype=np.int64)

    def aggregate(cut_values: np.ndarray) -> Tuple[float, np.ndarray]:
        phi = lower_bounds.copy()
        if cut_values.size:
            np.maximum.at(phi, owner, cut_values)
        return math.fsum(phi.tolist()), phi

    def evaluate(indices: Sequence[int]) -> Tuple[float, np.ndarray]:
        return aggregate(intercept + coef[:, list(indices)].sum(axis=1))

    threshold = math.inf
    if hint is not None and hint.count == budget and hint.size == n_candidates:
        threshold = evaluate(hint.indices)[0]
    state = {"best": None, "value": threshold, "nodes": 0}

    def visit(chosen: List[int], start: int, base: np.ndarray):
        state["nodes"] += 1
        if state["nodes"] > node_limit:
            raise _MasterLimit()
        slots = budget - len(chosen)
        if slots == 0:
            value, _ = aggregate(base)
            if (state["best"] is None and value <= state["value"]) or value < state["value"]:
                state["best"], state["value"] = tuple(chosen), value
            return

        free = np.arange(start, n_candidates - slots + 1)
        if coef.shape[0]:
            # 补全可用 start 之后的任意列，不只是下一个可选的列
            block = coef[:, start:n_candidates]
            if slots < block.shape[1]:
                cheapest = np.partition(block, slots - 1, axis=1)[:, :slots].sum(axis=1)
            else:
                cheapest = block.sum(axis=1)
            bound, _ = aggregate(base + cheapest)
        else:
            bound, _ = aggregate(base)
        if (state["best"] is None and bound > state["value"]) or (
            state["best"] is not None and bound >= state["value"]
        ):
            return
        for column in free:
            visit(chosen + [int(column)], int(column) + 1, base + coef[:, column])

    optimal = True
    try:
        visit([], 0, intercept.copy())
    except _MasterLimit:
        optimal = False

    best = state["best"]
    if best is None:
        best = hint.indices if hint is not None else tuple(range(budget))
    value, phi = evaluate(best)
    return MasterResult(
        decision=DecisionVector.from_indices(n_candidates, best),
        phi=phi,
        value=value,
        nodes=state["nodes"],
        optimal=optimal,
    )


def moa_solve(instance: ChoiceInstance, moa_config: Optional[MoaConfig] = None) -> Solution:
    """多割外逼近求解 max Z_N(x)，|x| = r。

    交替求解主问题与添加割平面，直到上界 G(x*) 与主问题值之差不超过容差。

    参数:
        instance: MNL 实例（每个客户都必须面对至少一个竞争设施）
        moa_config: 算法设置

    返回:
        Solution，iterations 为主问题求解次数，trace 为逐次迭代记录
    """
    moa_config = moa_config or MoaConfig.from_config()
    if np.any(instance.scaled_competitor_mass <= 0):
        raise InstanceValidationError("MOA needs every customer to face at least one competitor (W_n > 0)")

    started = time.perf_counter()
    n_cand, budget = instance.n_candidates, instance.budget
    groups = partition(instance.n_customers, moa_config.resolve_groups(instance.n_customers), instance)
    starts = np.cumsum([0] + [g.size for g in groups[:-1]])
    lower_bounds = np.array([group_lower_bound(g) for g in groups])

    cuts: List[Cut] = []
    seen: set = set()
    x = DecisionVector.first(n_cand, budget)
    best_x, best_ub = x, math.inf
    lower = -math.inf
    trace: List[Dict[str, float]] = []
    optimal = False
    iteration = 0
    master_nodes = 0

    while iteration < moa_config.max_iterations:
        iteration += 1
        xa = x.as_array()
        values, grads = _evaluate_all(instance, starts, xa)
        upper = math.fsum(values.tolist())
        if upper < best_ub:
            best_ub, best_x = upper, x

        for t in range(len(groups)):
            intercept = float(values[t] - grads[t] @ xa)
            key = (t, grads[t].tobytes(), intercept)
            if key not in seen:
                seen.add(key)
                cuts.append(Cut(group=t, coefficients=grads[t].copy(), intercept=intercept))

        master = solve_master(
            cuts, lower_bounds, budget, n_cand, hint=best_x, node_limit=moa_config.master_node_limit
        )
        master_nodes += master.nodes
        if not master.optimal:
            logger.warning(f"MOA master hit its node limit at iteration {iteration}; stopping")
            break
        lower = max(lower, master.value)
        gap = best_ub - lower
        trace.append({
            "iteration": iteration,
            "master_value": master.value,
            "incumbent_value": best_ub,
            "gap": gap,
            "cuts": len(cuts),
        })
        logger.debug(
            f"MOA it={iteration} master={master.value:.9f} incumbent={best_ub:.9f} "
            f"gap={gap:.3e} cuts={len(cuts)}"
        )
        if gap <= moa_config.tolerance:
            optimal = True
            break
        if time.perf_counter() - started > moa_config.time_limit:
            logger.warning(f"MOA time limit reached after {iteration} iterations (gap {gap:.3e})")
            break
        x = master.decision
    else:
        logger.warning(f"MOA reached max_iterations={moa_config.max_iterations} without closing the gap")

    elapsed = time.perf_counter() - started
    objective = objective_mnl(instance, best_x)
    logger.debug(f"MOA finished: {iteration} iterations, {len(cuts)} cuts, objective {objective:.6f}")
    return Solution(
        decision=best_x,
        objective=objective,
        method=Method.MOA,
        wall_time=elapsed,
        iterations=iteration,
        nodes=master_nodes,
        optimal=optimal,
        bound=-lower if math.isfinite(lower) else None,
        trace=trace,
    )


def solve_mnl_bruteforce(instance: ChoiceInstance, limit: Optional[int] = None) -> Solution:
    """枚举所有大小为 r 的子集最大化 Z_N(x)；平局取字典序最小。"""
    limit = limit or config.enumeration_limit
    n_cand, budget = instance.n_candidates, instance.budget
    n_subsets = math.comb(n_cand, budget)
    if n_subsets > limit:
        raise SolverLimitError(f"C({n_cand}, {budget}) = {n_subsets} subsets exceed the limit {limit}")

    started = time.perf_counter()
    best, best_value = None, -math.inf
    for subset in combinations(range(n_cand), budget):
        decision = DecisionVector.from_indices(n_cand, subset)
        value = objective_mnl(instance, decision)
        if value > best_value:
            best, best_value = decision, value
    return Solution(
        decision=best,
        objective=best_value,
        method=Method.BRUTE,
        wall_time=time.perf_counter() - started,
        nodes=n_subsets,
        optimal=True,
        bound=best_value,
    )
