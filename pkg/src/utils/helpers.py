"""工具函数。"""
from enum import IntEnum
from typing import Iterator, Tuple

import numpy as np
from scipy.special import entr


class Stream(IntEnum):
    """根种子派生出的独立随机流。

    改变 |S| 不会扰动客户样本，因为客户与情景来自不同的流。
    """

    FACILITIES = 0
    CUSTOMERS = 1
    SCENARIOS = 2
    EVALUATION = 3


def rng_stream(seed: int, stream: Stream) -> np.random.Generator:
    """由根种子和流编号构造确定性的随机数生成器。

    参数:
        seed: 根种子
        stream: 流编号

    返回:
        numpy Generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.default_rng(sequence)


def distance_matrix(points: np.ndarray, sites: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """计算点集到设施的距离矩阵。

    参数:
        points: (n, 2) 客户坐标
        sites: (m, 2) 设施坐标
        metric: "euclidean" 或 "manhattan"

    返回:
        (n, m) 距离矩阵
    """
    diff = points[:, None, :] - sites[None, :, :]
    if metric == "euclidean":
        return np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
    if metric == "manhattan":
        return np.abs(diff).sum(axis=2)
    raise ValueError(f"Unknown distance metric: {metric}")


def open_unit_interval(u: np.ndarray) -> np.ndarray:
    """把 [0,1) 上的均匀数压入开区间 (0,1)，保证双对数有限。"""
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, np.nextafter(1.0, 0.0))


def gumbel_quantile(u):
    """标准 Gumbel 分布的分位函数 -ln(-ln(u))。"""
    return -np.log(-np.log(u))


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """伯努利变量的熵（nats），0·ln0 = 0。"""
    p = np.asarray(p, dtype=float)
    return entr(p) + entr(1.0 - p)


def batches(total: int, size: int) -> Iterator[Tuple[int, int]]:
    """把 [0, total) 切成不超过 size 的连续区间。"""
    size = max(1, int(size))
    for start in range(0, total, size):
        yield start, min(start + size, total)


def format_pct(value: float) -> str:
    """格式化百分比用于日志输出。"""
    return "n/a" if value is None or np.isnan(value) else f"{value:.2f}%"
