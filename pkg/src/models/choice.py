"""MNL 选择概率与有限支撑目标函数。

所有函数都是纯函数；ChoiceInstance 只读。
"""
import numpy as np
from scipy.special import softmax

from src.models.instance import ChoiceInstance, DecisionVector


def _check_customer(instance: ChoiceInstance, n: int) -> None:
    if not 0 <= n < instance.n_customers:
        raise IndexError(f"Customer index {n} out of range [0, {instance.n_customers})")


def competitor_mass(instance: ChoiceInstance, n: int) -> float:
    """竞争设施的效用总量 W_n = Σ_{c∈E} e^{v_nc}。

    参数:
        instance: 问题实例
        n: 客户下标

    返回:
        W_n；E 为空时为 0
    """
    _check_customer(instance, n)
    if instance.n_competitors == 0:
        return 0.0
    return float(np.exp(instance.competitor_utilities[n]).sum())


def mnl_probabilities(utilities) -> np.ndarray:
    """开放集合上的 MNL 选择概率 p_c = e^{v_c} / Σ_k e^{v_k}。

    softmax 内部先减去最大值，|v| 很大时也不会溢出。
    """
    v = np.asarray(utilities, dtype=float)
    if v.size == 0:
        raise ValueError("mnl_probabilities needs at least one alternative")
    if not np.all(np.isfinite(v)):
        raise ValueError("Utilities must be finite")
    return softmax(v)


def capture_shares(instance: ChoiceInstance, x: DecisionVector) -> np.ndarray:
    """所有客户的捕获概率向量（向量化版本）。"""
    x.check(instance.n_candidates, instance.budget)
    s = instance.scaled_candidate_exp @ x.as_array()
    denom = s + instance.scaled_competitor_mass
    return np.divide(s, denom, out=np.zeros_like(s), where=s > 0)


def capture_probability(instance: ChoiceInstance, n: int, x: DecisionVector) -> float:
    """客户 n 选择本公司某个开放设施的概率。

    参数:
        instance: 问题实例
        n: 客户下标
        x: 可行决策

    返回:
        Σ_{D(x)} e^v / (Σ_{D(x)} e^v + W_n)；D(x) 为空时为 0
    """
    _check_customer(instance, n)
    x.check(instance.n_candidates, instance.budget)
    mask = x.as_mask()
    if not mask.any():
        return 0.0
    s = float(instance.scaled_candidate_exp[n, mask].sum())
    if s <= 0.0:
        return 0.0
    return s / (s + float(instance.scaled_competitor_mass[n]))


def objective_mnl(instance: ChoiceInstance, x: DecisionVector) -> float:
    """有限支撑目标 Z_N(x) = Σ_n q_n · P_n(x)，不可行时抛出 InfeasibleDecisionError。"""
    shares = capture_shares(instance, x)
    value = float(instance.weights @ shares)
    return min(max(value, 0.0), 1.0)
