"""配置管理器模块。"""
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from loguru import logger


class ConfigManager:
    """管理来自 YAML 文件的应用程序配置。"""

    def __init__(self, config_path: Optional[str] = None):
        """初始化配置管理器。

        参数:
            config_path: 配置文件路径。默认为 config/config.yaml
        """
        if config_path is None:
            # 获取项目根目录
            project_root = Path(__file__).parent.parent.parent
            config_path = project_root / "config" / "config.yaml"

        self.config_path = Path(config_path)
        self.config = self._load_config()
        logger.debug(f"配置已从 {self.config_path} 加载")

    def _load_config(self) -> Dict[str, Any]:
        """从 YAML 文件加载配置。

        返回:
            配置字典
        """
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                return yaml.safe_load(f) or {}
        except FileNotFoundError:
            logger.error(f"配置文件未找到: {self.config_path}")
            raise
        except yaml.YAMLError as e:
            logger.error(f"解析 YAML 配置错误: {e}")
            raise

    def reload(self, config_path: str) -> None:
        """切换到另一个配置文件（CLI 的 --config）。"""
        self.config_path = Path(config_path)
        self.config = self._load_config()
        logger.info(f"配置已重新加载: {self.config_path}")

    def get(self, key_path: str, default: Any = None) -> Any:
        """通过点分隔的路径获取配置值。

        参数:
            key_path: 配置键的点分隔路径（例如，"solvers.moa.tolerance"）
            default: 键未找到时的默认值

        返回:
            配置值
        """
        keys = key_path.split(".")
        value = self.config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return default if value is None else value

    def section(self, key_path: str) -> Dict[str, Any]:
        """返回一个配置段的浅拷贝（不存在时为空字典）。"""
        value = self.get(key_path, {})
        return dict(value) if isinstance(value, dict) else {}

    @property
    def chunk_size(self) -> int:
        """构造覆盖矩阵时的批大小。"""
        return int(self.get("simulation.chunk_size", 4096))

    @property
    def node_limit(self) -> int:
        """0-1 求解器的节点上限。"""
        return int(self.get("solvers.binary.node_limit", 5_000_000))

    @property
    def enumeration_limit(self) -> int:
        """穷举求解的组合数上限。"""
        return int(self.get("solvers.binary.enumeration_limit", 1_000_000))

    @property
    def moa_tolerance(self) -> float:
        """MOA 的绝对收敛容差。"""
        return float(self.get("solvers.moa.tolerance", 1e-6))

    @property
    def n_tilde(self) -> int:
        """蒙特卡洛评估样本量。"""
        return int(self.get("analysis.n_tilde", 100_000))

    @property
    def batch_size(self) -> int:
        return int(self.get("analysis.batch_size", 50_000))

    @property
    def log_level(self) -> str:
        """获取日志级别。"""
        return self.get("logging.level", "INFO")

    @property
    def log_file(self) -> str:
        """获取日志文件路径。"""
        return self.get("logging.file", "logs/max_capture.log")


# 全局配置实例
config = ConfigManager()
