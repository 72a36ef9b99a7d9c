"""分析器模块：熵与评估指标。"""
from .entropy import capture_entropy, entropy_mmnl, entropy_mnl, estimate_entropy
from .metrics import EvaluationSample, SampleCache, estimate_Z, evaluation_sample, rgap, rgen_gap

__all__ = [
    "capture_entropy",
    "entropy_mmnl",
    "entropy_mnl",
    "estimate_entropy",
    "EvaluationSample",
    "SampleCache",
    "estimate_Z",
    "evaluation_sample",
    "rgap",
    "rgen_gap",
]
