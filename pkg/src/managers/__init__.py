"""管理器模块。"""
from .instance_manager import (
    InstanceManager,
    instance_to_dict,
    load_coverage,
    load_instance,
    parse_instance,
    save_coverage,
    save_instance,
)

__all__ = [
    "InstanceManager",
    "instance_to_dict",
    "load_coverage",
    "load_instance",
    "parse_instance",
    "save_coverage",
    "save_instance",
]
