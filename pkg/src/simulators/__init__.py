"""仿真重构模块。"""
from .coverage import build_coverage, capture_row, cluster, size_reduction

__all__ = ["build_coverage", "capture_row", "cluster", "size_reduction"]
