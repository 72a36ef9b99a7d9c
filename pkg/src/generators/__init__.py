"""实例与随机项生成器模块。"""
from .noise import NoiseDistribution, NoiseModel, sample_noise
from .hm14 import Hm14Params, gen_hm14
from .mmnl import (
    CustomerAttributes,
    Family,
    GenerativeModel,
    Hm14MmnlModel,
    Mmnl3Model,
    Mmnl3Params,
    gen_hm14_mmnl,
    gen_mmnl3,
    materialize_sample,
)

__all__ = [
    "NoiseDistribution",
    "NoiseModel",
    "sample_noise",
    "Hm14Params",
    "gen_hm14",
    "CustomerAttributes",
    "Family",
    "GenerativeModel",
    "Hm14MmnlModel",
    "Mmnl3Model",
    "Mmnl3Params",
    "gen_hm14_mmnl",
    "gen_mmnl3",
    "materialize_sample",
]
