"""HM14 类均匀随机实例生成器。"""
from dataclasses import asdict, dataclass

import numpy as np
from loguru import logger

from src.models import ChoiceInstance, FacilityKind, facilities_from_array
from src.utils.config import config
from src.utils.helpers import Stream, distance_matrix, rng_stream


@dataclass(frozen=True)
class Hm14Params:
    """HM14 实例参数。

    候选设施效用为 -beta·dist，竞争设施为 -alpha·beta·dist。
    """

    n_customers: int = 50
    n_candidates: int = 25
    n_competitors: int = 10
    beta: float = 1.0
    alpha: float = 0.1
    budget: int = 5
    region: float = 30.0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if min(self.n_customers, self.n_candidates) < 1 or self.n_competitors < 0:
            raise ValueError("Customer and candidate counts must be positive")
        if not 1 <= self.budget <= self.n_candidates:
            raise ValueError(f"Budget r={self.budget} outside [1, {self.n_candidates}]")
        if self.metric not in ("euclidean", "manhattan"):
            raise ValueError(f"Unknown distance metric: {self.metric}")

    @classmethod
    def from_config(cls, **overrides) -> "Hm14Params":
        """从 generators.hm14 配置段构造参数，overrides 优先。"""
        values = config.section("generators.hm14")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def gen_hm14(params: Hm14Params, seed: int) -> ChoiceInstance:
    """生成 HM14 实例：设施与客户在 [0, region]^2 上独立均匀分布。

    参数:
        params: 实例参数
        seed: 根种子（相同种子得到逐位相同的实例）

    返回:
        ChoiceInstance，客户权重均匀
    """
    facility_rng = rng_stream(seed, Stream.FACILITIES)
    customer_rng = rng_stream(seed, Stream.CUSTOMERS)

    cand_xy = facility_rng.uniform(0.0, params.region, size=(params.n_candidates, 2))
    comp_xy = facility_rng.uniform(0.0, params.region, size=(params.n_competitors, 2))
    cust_xy = customer_rng.uniform(0.0, params.region, size=(params.n_customers, 2))

    v_cand = -params.beta * distance_matrix(cust_xy, cand_xy, params.metric)
    v_comp = -params.alpha * params.beta * distance_matrix(cust_xy, comp_xy, params.metric)

    candidates = facilities_from_array(cand_xy, FacilityKind.CANDIDATE)
    competitors = facilities_from_array(comp_xy, FacilityKind.COMPETITOR, start_id=params.n_candidates)

    instance = ChoiceInstance(
        candidates=candidates,
        competitors=competitors,
        utilities=np.hstack([v_cand, v_comp]),
        weights=np.full(params.n_customers, 1.0 / params.n_customers),
        budget=params.budget,
        metadata={"family": "hm14", "seed": int(seed), **asdict(params)},
    )
    logger.debug(f"Generated {instance} (metric={params.metric}, beta={params.beta}, alpha={params.alpha})")
    return instance
