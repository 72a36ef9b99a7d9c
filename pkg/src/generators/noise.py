"""随机效用项 ε 的抽样。"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from src.utils.config import config
from src.utils.helpers import gumbel_quantile, open_unit_interval


class NoiseDistribution(str, Enum):
    GUMBEL = "gumbel"
    NORMAL = "normal"


@dataclass(frozen=True)
class NoiseModel:
    """ε 的分布：默认标准 Gumbel（MNL），也可换成正态（其他 RUM 模型）。"""

    distribution: NoiseDistribution = NoiseDistribution.GUMBEL
    sigma: float = 1.0  # 仅用于 normal

    def __post_init__(self):
        object.__setattr__(self, "distribution", NoiseDistribution(self.distribution))
        if self.distribution is NoiseDistribution.NORMAL and self.sigma < 0:
            raise ValueError(f"Normal noise needs sigma >= 0, got {self.sigma}")

    @classmethod
    def from_config(cls) -> "NoiseModel":
        return cls(
            distribution=config.get("simulation.noise", "gumbel"),
            sigma=float(config.get("simulation.noise_sigma", 1.0)),
        )


def sample_noise(
    model: NoiseModel,
    rng: np.random.Generator,
    count: Union[int, Tuple[int, ...]],
) -> np.ndarray:
    """抽取独立同分布的随机项。

    Gumbel 通过逆分布函数 g = -ln(-ln(u)) 抽样，u 落在开区间 (0,1)。

    参数:
        model: 噪声模型
        rng: 随机数生成器
        count: 样本数量或数组形状

    返回:
        随机项数组
    """
    shape = (count,) if isinstance(count, (int, np.integer)) else tuple(count)
    if any(dim < 0 for dim in shape) or (len(shape) == 1 and shape[0] < 1):
        raise ValueError(f"sample_noise needs a positive count, got {count}")
    if model.distribution is NoiseDistribution.GUMBEL:
        return gumbel_quantile(open_unit_interval(rng.random(shape)))
    return rng.normal(0.0, model.sigma, size=shape)
