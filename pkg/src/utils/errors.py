"""异常类型。"""
from typing import Optional, Tuple, Union


class CaptureError(Exception):
    """本项目所有异常的基类。"""


class InstanceFormatError(CaptureError, ValueError):
    """实例文件无法解析。"""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        path: Tuple[Union[str, int], ...] = (),
    ):
        self.message = message
        self.line = line
        self.column = column
        self.path = path  # JSON 中出错对象的位置，例如 ("customers", 3)
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class InstanceValidationError(CaptureError, ValueError):
    """实例数据违反不变量。"""


class InfeasibleDecisionError(CaptureError, ValueError):
    """决策向量长度不符或超出预算。"""


class SolverLimitError(CaptureError, RuntimeError):
    """穷举规模超出允许的上限。"""


class MetricError(CaptureError, ArithmeticError):
    """指标在给定输入下无定义（例如最优值为 0）。"""


class ConfigError(CaptureError, ValueError):
    """实验配置无效。"""
