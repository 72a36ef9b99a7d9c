"""生成视角下的混合 logit 模型：HM14-MMNL 与 MMNL-3。

模型在构造后固定设施位置；客户属性 θ 由抽样器逐批抽取。
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from src.models import ChoiceInstance, Facility, FacilityKind, facilities_from_array
from src.utils.config import config
from src.utils.helpers import Stream, distance_matrix, rng_stream


class Family(str, Enum):
    HM14 = "hm14"
    HM14_MMNL = "hm14-mmnl"
    MMNL3 = "mmnl3"
    FILE = "file"


@dataclass(frozen=True)
class CustomerAttributes:
    """一批客户属性 θ：位置，以及 MMNL-3 的客户类型 K（1..3）与所在街区。"""

    positions: np.ndarray  # (n, 2)
    segments: Optional[np.ndarray] = None  # (n,) ∈ {1,2,3}
    neighborhoods: Optional[np.ndarray] = None  # (n,) ∈ {0..3}

    def __len__(self) -> int:
        return int(self.positions.shape[0])


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """无限支撑模型：固定设施 + 属性抽样器 + 效用函数 v_c(θ)。"""

    candidates: Tuple[Facility, ...]
    competitors: Tuple[Facility, ...]
    budget: int
    family: Family = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "competitors", tuple(self.competitors))

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    @property
    def n_competitors(self) -> int:
        return len(self.competitors)

    def facility_positions(self) -> np.ndarray:
        """(|D|+|E|, 2) 坐标，候选在前。"""
        return np.array([f.position.as_tuple() for f in self.candidates + self.competitors]).reshape(-1, 2)

    def sample_attributes(self, rng: np.random.Generator, n: int) -> CustomerAttributes:
        raise NotImplementedError

    def utilities(self, attributes: CustomerAttributes) -> np.ndarray:
        """(n, |D|+|E|) 确定性效用矩阵。"""
        raise NotImplementedError

    def sample_utilities(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.utilities(self.sample_attributes(rng, n))

    def __str__(self) -> str:
        return f"GenerativeModel({self.family.value}, D={self.n_candidates}, E={self.n_competitors}, r={self.budget})"


@dataclass(frozen=True, eq=False)
class Hm14MmnlModel(GenerativeModel):
    """客户位置在 [0, region]^2 上均匀，效用为负的曼哈顿距离。"""

    region: float = 30.0

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "family", Family.HM14_MMNL)

    def sample_attributes(self, rng: np.random.Generator, n: int) -> CustomerAttributes:
        return CustomerAttributes(positions=rng.uniform(0.0, self.region, size=(n, 2)))

    def utilities(self, attributes: CustomerAttributes) -> np.ndarray:
        return -distance_matrix(attributes.positions, self.facility_positions(), "manhattan")


@dataclass(frozen=True)
class Mmnl3Params:
    """MMNL-3 模型参数：三类客户、三类位置、四个街区。"""

    beta: float = 1.0
    delta: Tuple[float, ...] = (3.0, 1.0, 2.0)
    gamma: Tuple[Tuple[float, ...], ...] = ((20.0, 60.0, 30.0), (40.0, 20.0, 60.0), (60.0, 40.0, 20.0))
    pi: Tuple[float, ...] = (0.4, 0.3, 0.2, 0.1)
    rho: Tuple[Tuple[float, ...], ...] = (
        (0.2, 0.7, 0.1),
        (0.3, 0.4, 0.3),
        (0.3, 0.4, 0.3),
        (0.0, 0.2, 0.8),
    )
    mu: Tuple[Tuple[float, float], ...] = ((2.0, -2.0), (-10.0, -10.0), (-4.0, 10.0), (12.0, -5.0))
    sigma: Tuple[Tuple[Tuple[float, float], Tuple[float, float]], ...] = (
        ((9.0, 1.0), (1.0, 9.0)),
        ((9.0, -6.0), (-6.0, 9.0)),
        ((16.0, 1.0), (1.0, 4.0)),
        ((2.0, 0.0), (0.0, 21.0)),
    )
    candidates_per_type: int = 20
    competitors_per_type: int = 10
    region: float = 15.0
    budget: int = 10

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        pi, rho = np.asarray(self.pi), np.asarray(self.rho)
        if abs(pi.sum() - 1.0) > 1e-12 or np.any(pi < 0):
            raise ValueError("pi must be a probability vector")
        if rho.shape != (len(pi), len(self.delta)) or np.any(np.abs(rho.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("Each row of rho must be a probability vector over customer types")
        if np.asarray(self.gamma).shape != (len(self.delta), len(self.delta)):
            raise ValueError("gamma must be (customer types) x (location types)")
        for j, cov in enumerate(self.sigma):
            cov = np.asarray(cov)
            if not np.allclose(cov, cov.T):
                raise ValueError(f"sigma[{j}] is not symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as e:
                raise ValueError(f"sigma[{j}] is not positive definite") from e
        if not 1 <= self.budget <= self.candidates_per_type * len(self.delta):
            raise ValueError(f"Budget r={self.budget} outside the candidate range")

    @classmethod
    def from_config(cls, **overrides) -> "Mmnl3Params":
        values = config.section("generators.mmnl3")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**{k: _freeze(v) for k, v in values.items()})

    @property
    def n_location_types(self) -> int:
        return len(self.delta)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True, eq=False)
class Mmnl3Model(GenerativeModel):
    """v_c(θ) = -β(δ_K·M_c(θ) + γ_{K,l(c)})，M_c 为曼哈顿距离。"""

    params: Mmnl3Params = field(default_factory=Mmnl3Params)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "family", Family.MMNL3)
        facilities = self.candidates + self.competitors
        object.__setattr__(self, "_types", np.array([f.location_type for f in facilities], dtype=int))
        object.__setattr__(
            self, "_cholesky", np.stack([np.linalg.cholesky(np.asarray(s)) for s in self.params.sigma])
        )

    def sample_attributes(self, rng: np.random.Generator, n: int) -> CustomerAttributes:
        p = self.params
        neighborhoods = rng.choice(len(p.pi), size=n, p=np.asarray(p.pi))
        cumulative = np.cumsum(np.asarray(p.rho), axis=1)[neighborhoods]
        u = rng.random(n)
        # u >= 累积概率的个数即为 K-1；截断防止累积和的舍入误差
        segments = np.minimum((u[:, None] >= cumulative).sum(axis=1), len(p.delta) - 1) + 1
        z = rng.standard_normal((n, 2))
        positions = np.asarray(p.mu)[neighborhoods] + np.einsum("nij,nj->ni", self._cholesky[neighborhoods], z)
        return CustomerAttributes(positions=positions, segments=segments, neighborhoods=neighborhoods)

    def utilities(self, attributes: CustomerAttributes) -> np.ndarray:
        p = self.params
        k = attributes.segments - 1
        distances = distance_matrix(attributes.positions, self.facility_positions(), "manhattan")
        delta = np.asarray(p.delta)[k]
        gamma = np.asarray(p.gamma)[k][:, self._types]
        return -p.beta * (delta[:, None] * distances + gamma)


def gen_hm14_mmnl(
    seed: int,
    n_candidates: Optional[int] = None,
    n_competitors: Optional[int] = None,
    budget: Optional[int] = None,
) -> Hm14MmnlModel:
    """HM14-MMNL：50 个候选与 10 个竞争设施均匀固定在 [0,30]^2，r = 5。"""
    section = config.section("generators.hm14_mmnl")
    n_candidates = n_candidates or int(section.get("n_candidates", 50))
    n_competitors = n_competitors if n_competitors is not None else int(section.get("n_competitors", 10))
    budget = budget or int(section.get("budget", 5))
    region = float(section.get("region", 30.0))

    rng = rng_stream(seed, Stream.FACILITIES)
    cand_xy = rng.uniform(0.0, region, size=(n_candidates, 2))
    comp_xy = rng.uniform(0.0, region, size=(n_competitors, 2))
    model = Hm14MmnlModel(
        candidates=facilities_from_array(cand_xy, FacilityKind.CANDIDATE),
        competitors=facilities_from_array(comp_xy, FacilityKind.COMPETITOR, start_id=n_candidates),
        budget=budget,
        region=region,
    )
    logger.debug(f"Generated {model} (seed={seed})")
    return model


def gen_mmnl3(params: Mmnl3Params, seed: int) -> Mmnl3Model:
    """MMNL-3：每种位置类型 20 个候选与 10 个竞争设施，均匀固定在 [-15,15]^2。"""
    rng = rng_stream(seed, Stream.FACILITIES)
    n_types = params.n_location_types
    n_cand = params.candidates_per_type * n_types
    n_comp = params.competitors_per_type * n_types
    cand_xy = rng.uniform(-params.region, params.region, size=(n_cand, 2))
    comp_xy = rng.uniform(-params.region, params.region, size=(n_comp, 2))
    cand_types = np.repeat(np.arange(n_types), params.candidates_per_type)
    comp_types = np.repeat(np.arange(n_types), params.competitors_per_type)
    model = Mmnl3Model(
        candidates=facilities_from_array(cand_xy, FacilityKind.CANDIDATE, location_types=cand_types),
        competitors=facilities_from_array(
            comp_xy, FacilityKind.COMPETITOR, start_id=n_cand, location_types=comp_types
        ),
        budget=params.budget,
        params=params,
    )
    logger.debug(f"Generated {model} (beta={params.beta}, seed={seed})")
    return model


def materialize_sample(model: GenerativeModel, n: int, seed: int) -> ChoiceInstance:
    """抽取 n 个客户属性并转换为权重均匀的 MNL 实例。

    参数:
        model: 生成模型
        n: 样本量 |N|
        seed: 根种子（使用客户流）

    返回:
        ChoiceInstance
    """
    if n < 1:
        raise ValueError(f"Sample size must be at least 1, got {n}")
    rng = rng_stream(seed, Stream.CUSTOMERS)
    utilities = model.sample_utilities(rng, n)
    return ChoiceInstance(
        candidates=model.candidates,
        competitors=model.competitors,
        utilities=utilities,
        weights=np.full(n, 1.0 / n),
        budget=model.budget,
        metadata={"family": model.family.value, "seed": int(seed), "n": int(n)},
    )
