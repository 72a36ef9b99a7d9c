"""基于熵的实例刻画：期望条件熵 𝓗(θ, ε) 与伯努利捕获熵（单位 nats）。"""
import math
from typing import Callable, Optional, Union

import numpy as np
from loguru import logger
from scipy.special import entr, softmax

from src.generators import GenerativeModel
from src.models import ChoiceInstance, EntropyReport, EntropyVariant, Estimate
from src.utils.config import config
from src.utils.helpers import Stream, batches, binary_entropy, rng_stream

Source = Union[GenerativeModel, ChoiceInstance]


def _choice_entropies(utilities: np.ndarray, n_candidates: int) -> np.ndarray:
    """每行在候选集合 D 上的 MNL 选择熵（竞争设施不参与）。"""
    if n_candidates <= 1:
        return np.zeros(utilities.shape[0])
    p = softmax(utilities[:, :n_candidates], axis=1)
    return entr(p).sum(axis=1)


def _capture_entropies(utilities: np.ndarray, n_candidates: int) -> np.ndarray:
    """每行 1[选择落在 D] 的二元熵；Gumbel 噪声下 P = Σ_D e^v / Σ_{D∪E} e^v。"""
    if utilities.shape[1] == n_candidates:
        return np.zeros(utilities.shape[0])
    p = softmax(utilities, axis=1)[:, :n_candidates].sum(axis=1)
    return binary_entropy(np.clip(p, 0.0, 1.0))


def _monte_carlo(
    model: GenerativeModel,
    kernel: Callable[[np.ndarray, int], np.ndarray],
    n_tilde: int,
    seed: int,
) -> Estimate:
    """对 θ 的 n_tilde 次抽样求 kernel 的均值与标准误，按批处理控制内存。"""
    if n_tilde < 1:
        raise ValueError(f"n_tilde must be at least 1, got {n_tilde}")
    rng = rng_stream(seed, Stream.EVALUATION)
    total = total_sq = 0.0
    for start, stop in batches(n_tilde, config.batch_size):
        values = kernel(model.sample_utilities(rng, stop - start), model.n_candidates)
        total += math.fsum(values.tolist())
        total_sq += math.fsum((values * values).tolist())
    mean = total / n_tilde
    variance = max(total_sq / n_tilde - mean * mean, 0.0)
    stderr = math.sqrt(variance / (n_tilde - 1)) if n_tilde > 1 else 0.0
    return Estimate(value=mean, stderr=stderr, sample_size=n_tilde)


def entropy_mnl(instance: ChoiceInstance) -> float:
    """有限支撑实例的期望条件熵，按客户等权平均。

    参数:
        instance: MNL 实例

    返回:
        𝓗 ∈ [0, ln|D|]
    """
    return float(np.mean(_choice_entropies(instance.utilities, instance.n_candidates)))


def entropy_mmnl(model: GenerativeModel, n_tilde: Optional[int] = None, seed: int = 0) -> float:
    """生成模型的期望条件熵，蒙特卡洛平均 n_tilde 次抽样。"""
    n_tilde = n_tilde or config.n_tilde
    return _monte_carlo(model, _choice_entropies, n_tilde, seed).value


def capture_entropy(source: Source, n_tilde: Optional[int] = None, seed: int = 0) -> float:
    """伯努利捕获熵：本公司全部候选对全部竞争者的二元选择的期望熵，∈ [0, ln 2]。"""
    if isinstance(source, ChoiceInstance):
        return float(np.mean(_capture_entropies(source.utilities, source.n_candidates)))
    return _monte_carlo(source, _capture_entropies, n_tilde or config.n_tilde, seed).value


def estimate_entropy(source: Source, n_tilde: Optional[int] = None, seed: int = 0) -> EntropyReport:
    """汇总熵报告：MNL 实例精确计算，生成模型用蒙特卡洛估计并给出标准误。"""
    if isinstance(source, ChoiceInstance):
        report = EntropyReport(
            entropy=entropy_mnl(source),
            variant=EntropyVariant.MNL_EXACT,
            sample_size=source.n_customers,
            capture_entropy=capture_entropy(source),
            n_candidates=source.n_candidates,
        )
    else:
        n_tilde = n_tilde or config.n_tilde
        choice = _monte_carlo(source, _choice_entropies, n_tilde, seed)
        capture = _monte_carlo(source, _capture_entropies, n_tilde, seed)
        report = EntropyReport(
            entropy=choice.value,
            variant=EntropyVariant.MMNL_MONTE_CARLO,
            sample_size=n_tilde,
            stderr=choice.stderr,
            capture_entropy=capture.value,
            n_candidates=source.n_candidates,
        )
    logger.debug(str(report))
    return report
