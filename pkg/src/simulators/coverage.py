"""基于仿真的 0-1 重构与两步聚类。"""
import math
import time
from typing import Optional, Union

import numpy as np
from loguru import logger

from src.generators import GenerativeModel, NoiseModel, materialize_sample, sample_noise
from src.models import ChoiceInstance, ClusteredProblem, CoverageProblem
from src.utils.config import config
from src.utils.helpers import Stream, batches, rng_stream


def capture_row(utilities_with_noise, n_candidates: int) -> np.ndarray:
    """一次噪声抽样下的捕获系数 a_nsc = 1[u_c ≥ max_{k∈E} u_k]。

    参数:
        utilities_with_noise: 长度 |D|+|E| 的随机效用，候选在前
        n_candidates: |D|

    返回:
        长度 |D| 的布尔向量；E 为空时全为 True
    """
    u = np.asarray(utilities_with_noise, dtype=float)
    if u.ndim != 1 or u.size < n_candidates:
        raise ValueError(f"Expected a vector with at least {n_candidates} utilities, got shape {u.shape}")
    if u.size == n_candidates:
        return np.ones(n_candidates, dtype=bool)
    return u[:n_candidates] >= u[n_candidates:].max()


def _capture_block(v: np.ndarray, noise: np.ndarray, n_candidates: int) -> np.ndarray:
    # v: (b, C), noise: (b, S, C) -> (b*S, |D|)
    u = v[:, None, :] + noise
    if u.shape[2] == n_candidates:
        rows = np.ones(u.shape[:2] + (n_candidates,), dtype=bool)
    else:
        best_competitor = u[:, :, n_candidates:].max(axis=2)
        rows = u[:, :, :n_candidates] >= best_competitor[:, :, None]
    return rows.reshape(-1, n_candidates)


def build_coverage(
    source: Union[GenerativeModel, ChoiceInstance],
    n_customers: Optional[int] = None,
    n_scenarios: int = 1,
    noise: Optional[NoiseModel] = None,
    seed: int = 0,
) -> CoverageProblem:
    """构造仿真问题：每个客户 n 抽取 |S| 组随机项，得到 |N||S| 行捕获系数。

    参数:
        source: 生成模型（先抽取 |N| 个客户）或已有的 MNL 实例
        n_customers: 客户样本量；对实例可省略
        n_scenarios: 每个客户的情景数 |S|
        noise: 随机项分布，默认取配置
        seed: 根种子；客户与情景来自不同的随机流

    返回:
        CoverageProblem，行顺序为 (n, s) 的字典序
    """
    if n_scenarios < 1:
        raise ValueError(f"Need at least one scenario, got {n_scenarios}")
    started = time.perf_counter()

    if isinstance(source, GenerativeModel):
        if n_customers is None:
            raise ValueError("n_customers is required when sampling from a generative model")
        instance = materialize_sample(source, n_customers, seed)
    else:
        instance = source
        if n_customers is not None and n_customers != instance.n_customers:
            raise ValueError(f"Instance has {instance.n_customers} customers, {n_customers} requested")

    noise = noise or NoiseModel.from_config()
    rng = rng_stream(seed, Stream.SCENARIOS)
    n_alt = instance.utilities.shape[1]
    block = max(1, config.chunk_size // n_scenarios)

    blocks = []
    for start, stop in batches(instance.n_customers, block):
        eps = sample_noise(noise, rng, (stop - start, n_scenarios, n_alt))
        blocks.append(_capture_block(instance.utilities[start:stop], eps, instance.n_candidates))
    rows = np.vstack(blocks)

    q = instance.weights
    common = dict(
        n_customers=instance.n_customers,
        n_scenarios=n_scenarios,
        build_seconds=time.perf_counter() - started,
    )
    if np.all(q == q[0]):
        problem = CoverageProblem.uniform(rows, instance.budget, **common)
    else:
        problem = CoverageProblem(rows, np.repeat(q / n_scenarios, n_scenarios), instance.budget, **common)
    logger.debug(f"Built {problem} in {problem.build_seconds * 1000:.1f}ms")
    return problem


def cluster(problem: CoverageProblem) -> ClusteredProblem:
    """两步聚类：合并相同的捕获向量，再删除全零轮廓（其质量保留在总质量中）。

    轮廓顺序为首次出现的顺序。
    """
    started = time.perf_counter()
    rows = problem.rows
    n_rows, n_cand = rows.shape
    view = problem.mass_view()

    if n_rows == 0:
        profiles = np.zeros((0, n_cand), dtype=bool)
        inverse = np.zeros(0, dtype=np.int64)
    else:
        packed = np.ascontiguousarray(np.packbits(rows, axis=1))
        keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
        _, first_idx, inverse = np.unique(keys, return_index=True, return_inverse=True)
        order = np.argsort(first_idx, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        inverse = rank[inverse.ravel()]
        profiles = rows[first_idx[order]]

    n_groups = profiles.shape[0]
    masses = np.bincount(inverse, weights=problem.weights, minlength=n_groups)
    keep = profiles.any(axis=1)

    counts = total_count = None
    if view.exact:
        # 行本身可能带重数（例如由聚类问题还原而来），整数累加保证精确
        group_counts = np.zeros(n_groups, dtype=np.int64)
        np.add.at(group_counts, inverse, problem.counts)
        counts = group_counts[keep]
        total_count = int(view.total)

    clustered = ClusteredProblem(
        profiles=profiles[keep],
        masses=masses[keep],
        total_mass=math.fsum(problem.weights.tolist()),
        budget=problem.budget,
        counts=counts,
        total_count=total_count,
        source_rows=n_rows,
        n_customers=problem.n_customers,
        n_scenarios=problem.n_scenarios,
        build_seconds=problem.build_seconds + time.perf_counter() - started,
    )
    logger.debug(
        f"Clustered {n_rows} rows into {clustered.n_profiles} profiles "
        f"(reduction {size_reduction(problem, clustered):.2f}%)"
    )
    return clustered


def size_reduction(before: CoverageProblem, after: ClusteredProblem) -> float:
    """决策变量减少的百分比 100·(1 - |P| / (|N||S|))。"""
    if before.n_rows == 0:
        return 0.0
    return 100.0 * (1.0 - after.n_profiles / before.n_rows)
