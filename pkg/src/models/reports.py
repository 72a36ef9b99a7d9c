"""熵与评估指标的报告模型。"""
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Optional

from src.utils.helpers import format_pct


class EntropyVariant(str, Enum):
    MNL_EXACT = "mnl-exact"
    MMNL_MONTE_CARLO = "mmnl-monte-carlo"


@dataclass(frozen=True)
class Estimate:
    """蒙特卡洛估计值及其标准误。"""

    value: float
    stderr: float
    sample_size: int

    def __str__(self) -> str:
        return f"{self.value:.6f} ± {self.stderr:.6f} (n={self.sample_size})"


@dataclass
class EntropyReport:
    """期望条件熵 𝓗(θ, ε) 的估计（单位 nats）。"""

    entropy: float
    variant: EntropyVariant
    sample_size: int
    stderr: float = 0.0
    capture_entropy: Optional[float] = None  # 伯努利捕获熵
    n_candidates: int = 0

    @property
    def upper_bound(self) -> float:
        """熵的理论上界 ln|D|。"""
        return math.log(self.n_candidates) if self.n_candidates > 0 else 0.0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["variant"] = self.variant.value
        data["unit"] = "nats"
        return data

    def __str__(self) -> str:
        bern = "" if self.capture_entropy is None else f", capture={self.capture_entropy:.4f}"
        return (
            f"EntropyReport({self.variant.value}, H={self.entropy:.4f} nats "
            f"(<= {self.upper_bound:.4f}), n={self.sample_size}{bern})"
        )


@dataclass
class GapReport:
    """一个解的评估指标。未定义的指标保持 NaN。"""

    rgap_pct: float = math.nan
    rgen_gap_pct: float = math.nan
    z_insample: float = math.nan
    z_estimate: float = math.nan
    size_reduction_pct: float = math.nan
    n_tilde: int = 0

    def __str__(self) -> str:
        return (
            f"GapReport(rgap={format_pct(self.rgap_pct)}, rgen={format_pct(self.rgen_gap_pct)}, "
            f"size_reduction={format_pct(self.size_reduction_pct)})"
        )


CSV_COLUMNS = (
    "family", "beta", "alpha", "r", "n", "s", "seed", "method", "time_ms",
    "objective", "rgap_pct", "rgen_gap_pct", "entropy", "size_reduction_pct", "optimal_flag",
)


@dataclass
class ReportRow:
    """报告 CSV 中的一行：(cell, method, seed)。"""

    family: str
    beta: float
    alpha: float
    r: int
    n: int
    s: int
    seed: int
    method: str
    time_ms: Optional[float]
    objective: float
    rgap_pct: float
    rgen_gap_pct: float
    entropy: float
    size_reduction_pct: float
    optimal_flag: bool

    def to_record(self) -> dict:
        """转换为 CSV 记录，浮点数固定格式以保证逐字节可复现。"""
        record = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None or (isinstance(value, float) and math.isnan(value)):
                record[f.name] = ""
            elif isinstance(value, bool):
                record[f.name] = int(value)
            elif isinstance(value, float):
                record[f.name] = f"{value:.10g}"
            else:
                record[f.name] = value
        return record
