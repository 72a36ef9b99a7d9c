"""评估指标：相对最优间隙 RGap、样本外估计 Ẑ 与相对泛化间隙 RGenGap。"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from loguru import logger

from src.generators import GenerativeModel
from src.models import ChoiceInstance, DecisionVector, Estimate, Solution, objective_mnl
from src.utils.config import config
from src.utils.errors import MetricError
from src.utils.helpers import Stream, batches, rng_stream


@dataclass(frozen=True, eq=False)
class EvaluationSample:
    """用于 Ẑ 的大样本：只保存计算捕获概率所需的 e^{v}（按客户平移）与 W。"""

    candidate_exp: np.ndarray  # (Ñ, |D|)
    competitor_mass: np.ndarray  # (Ñ,)

    @property
    def size(self) -> int:
        return int(self.competitor_mass.shape[0])

    def shares(self, x: DecisionVector) -> np.ndarray:
        s = self.candidate_exp @ x.as_array()
        denom = s + self.competitor_mass
        return np.divide(s, denom, out=np.zeros_like(s), where=s > 0)


SampleCache = Dict[Tuple[GenerativeModel, int, int], EvaluationSample]


def evaluation_sample(model: GenerativeModel, n_tilde: int, seed: int) -> EvaluationSample:
    """抽取评估样本。同一 (模型, Ñ, 种子) 总是得到同一批客户。"""
    if n_tilde < 1:
        raise ValueError(f"n_tilde must be at least 1, got {n_tilde}")
    rng = rng_stream(seed, Stream.EVALUATION)
    n_cand = model.n_candidates
    candidate_exp = np.empty((n_tilde, n_cand))
    competitor_mass = np.empty(n_tilde)
    for start, stop in batches(n_tilde, config.batch_size):
        v = model.sample_utilities(rng, stop - start)
        shift = v.max(axis=1, keepdims=True)
        scaled = np.exp(v - shift)
        candidate_exp[start:stop] = scaled[:, :n_cand]
        competitor_mass[start:stop] = scaled[:, n_cand:].sum(axis=1)
    logger.debug(f"Drew evaluation sample of {n_tilde} customers for {model} (seed={seed})")
    return EvaluationSample(candidate_exp, competitor_mass)


def rgap(x: DecisionVector, instance: ChoiceInstance, exact_optimum: Solution) -> float:
    """相对最优间隙 100·(Z_N(x*) − Z_N(x)) / Z_N(x*)。

    参数:
        x: 待评估的决策（例如仿真问题的解）
        instance: 有限支撑实例
        exact_optimum: 同一实例上精确方法的解

    返回:
        百分比
    """
    z_star = exact_optimum.objective
    if z_star <= 0:
        raise MetricError("RGap is undefined when the exact optimum is zero")
    return 100.0 * (z_star - objective_mnl(instance, x)) / z_star


def estimate_Z(
    model: GenerativeModel,
    x: DecisionVector,
    n_tilde: Optional[int] = None,
    seed: int = 0,
    cache: Optional[SampleCache] = None,
) -> Estimate:
    """在 Ñ 个新客户上估计 x 的真实市场份额 Ẑ(x)，同时给出标准误。

    参数:
        model: 生成模型
        x: 开设决策
        n_tilde: 评估样本量 Ñ
        seed: 根种子（使用评估流）
        cache: 调用方持有的样本缓存；多个决策在同一模型上评估时复用同一批客户

    返回:
        Estimate
    """
    n_tilde = n_tilde or config.n_tilde
    x.check(model.n_candidates, model.budget)
    if cache is None:
        sample = evaluation_sample(model, n_tilde, seed)
    else:
        key = (model, n_tilde, seed)
        if key not in cache:
            cache[key] = evaluation_sample(model, n_tilde, seed)
        sample = cache[key]
    shares = sample.shares(x)
    value = math.fsum(shares.tolist()) / n_tilde
    stderr = float(shares.std(ddof=1) / math.sqrt(n_tilde)) if n_tilde > 1 else 0.0
    return Estimate(value=min(max(value, 0.0), 1.0), stderr=stderr, sample_size=n_tilde)


def rgen_gap(in_sample: float, z_estimate: Union[float, Estimate]) -> float:
    """相对泛化间隙 100·(样本内值 − Ẑ) / 样本内值。"""
    if in_sample <= 0:
        raise MetricError(f"RGenGap needs a positive in-sample value, got {in_sample}")
    value = z_estimate.value if isinstance(z_estimate, Estimate) else float(z_estimate)
    return 100.0 * (in_sample - value) / in_sample
