"""实例管理器模块：实例文件的读写、校验与缓存。

文件格式（JSON）:
    {"candidates": [{"id", "x", "y", "type"?}], "competitors": [...], "r": int,
     "customers": [{"q"?, "v": [...]}], "metadata"?: {...}}
其中 "v" 按 候选在前、竞争设施在后 的顺序排列；全部客户省略 "q" 时取 1/|N|。
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from src.models import (
    ChoiceInstance,
    ClusteredProblem,
    CoverageProblem,
    Facility,
    FacilityKind,
    Point2D,
)
from src.utils.errors import CaptureError, InstanceFormatError

PathLike = Union[str, Path]


def _parse_json(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"{source}: {e.msg}", line=e.lineno, column=e.colno) from e


def _locate(text: str, path: Tuple[Union[str, int], ...]) -> Optional[Tuple[int, int]]:
    """在原始 JSON 文本中找到 path 指向的值，返回其 (行, 列)；找不到时返回 None。"""
    decoder = json.JSONDecoder()

    def skip(i: int) -> int:
        while i < len(text) and text[i] in " \t\r\n":
            i += 1
        return i

    def after_item(i: int) -> int:
        i = skip(i)
        return skip(i + 1) if text[i] == "," else i

    try:
        pos = skip(0)
        for step in path:
            if isinstance(step, str):
                if text[pos] != "{":
                    return None
                pos = skip(pos + 1)
                while text[pos] != "}":
                    key, pos = decoder.raw_decode(text, pos)
                    pos = skip(skip(pos) + 1)
                    if key == step:
                        break
                    _, pos = decoder.raw_decode(text, pos)
                    pos = after_item(pos)
                else:
                    return None
            else:
                if text[pos] != "[":
                    return None
                pos = skip(pos + 1)
                for _ in range(step):
                    _, pos = decoder.raw_decode(text, pos)
                    pos = after_item(pos)
                if text[pos] == "]":
                    return None
    except (ValueError, IndexError):
        return None
    return text.count("\n", 0, pos) + 1, pos - text.rfind("\n", 0, pos)


def _require(data: Dict[str, Any], key: str, where: str, at: Tuple[Union[str, int], ...] = ()) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise InstanceFormatError(f"Missing field '{key}' in {where}", path=at)
    return data[key]


def _parse_facilities(items: Any, kind: FacilityKind, where: str) -> List[Facility]:
    if not isinstance(items, list):
        raise InstanceFormatError(f"'{where}' must be a list", path=(where,))
    facilities = []
    for i, item in enumerate(items):
        path = f"{where}[{i}]"
        at = (where, i)
        try:
            location_type = item.get("type")
            facilities.append(
                Facility(
                    id=int(_require(item, "id", path, at)),
                    position=Point2D(float(_require(item, "x", path, at)), float(_require(item, "y", path, at))),
                    kind=kind,
                    location_type=None if location_type is None else int(location_type),
                )
            )
        except (TypeError, ValueError, AttributeError) as e:
            if isinstance(e, CaptureError):
                raise
            raise InstanceFormatError(f"Invalid facility at {path}: {e}", path=at) from e
    return facilities


def parse_instance(data: Any, source: str = "<memory>") -> ChoiceInstance:
    """把已解码的 JSON 对象转换为 ChoiceInstance（含不变量校验）。"""
    if not isinstance(data, dict):
        raise InstanceFormatError(f"{source}: top-level value must be an object")
    candidates = _parse_facilities(_require(data, "candidates", source), FacilityKind.CANDIDATE, "candidates")
    competitors = _parse_facilities(data.get("competitors", []), FacilityKind.COMPETITOR, "competitors")
    customers = _require(data, "customers", source)
    if not isinstance(customers, list) or not customers:
        raise InstanceFormatError(f"{source}: 'customers' must be a non-empty list", path=("customers",))

    n_alt = len(candidates) + len(competitors)
    rows, weights = [], []
    for i, customer in enumerate(customers):
        v = _require(customer, "v", f"customers[{i}]", ("customers", i))
        if not isinstance(v, list) or len(v) != n_alt:
            raise InstanceFormatError(
                f"customers[{i}].v must list {n_alt} utilities (candidates first)", path=("customers", i)
            )
        try:
            rows.append([float(u) for u in v])
            weights.append(None if customer.get("q") is None else float(customer["q"]))
        except (TypeError, ValueError) as e:
            raise InstanceFormatError(f"customers[{i}] has a non-numeric value: {e}", path=("customers", i)) from e

    given = [w is not None for w in weights]
    if not any(given):
        weights = [1.0 / len(customers)] * len(customers)
    elif not all(given):
        raise InstanceFormatError(f"{source}: 'q' must be given for every customer or for none")

    try:
        budget = int(_require(data, "r", source))
    except (TypeError, ValueError) as e:
        raise InstanceFormatError(f"{source}: 'r' must be an integer", path=("r",)) from e

    return ChoiceInstance(
        candidates=candidates,
        competitors=competitors,
        utilities=np.array(rows, dtype=float).reshape(len(customers), n_alt),
        weights=np.array(weights, dtype=float),
        budget=budget,
        metadata=dict(data.get("metadata") or {}),
    )


def load_instance(path: PathLike) -> ChoiceInstance:
    """读取实例文件。

    参数:
        path: JSON 文件路径

    返回:
        ChoiceInstance

    异常:
        InstanceFormatError: 文件无法解析或缺少字段（附出错对象所在的行列号）
        InstanceValidationError: 数据违反实例不变量
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        instance = parse_instance(_parse_json(text, str(path)), str(path))
    except InstanceFormatError as e:
        position = _locate(text, e.path) if e.line is None and e.path else None
        if position is None:
            raise
        raise InstanceFormatError(e.message, line=position[0], column=position[1], path=e.path) from e
    logger.info(f"已加载实例 {path}: {instance}")
    return instance


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _facility_record(facility: Facility) -> Dict[str, Any]:
    record = {"id": facility.id, "x": facility.position.x, "y": facility.position.y}
    if facility.location_type is not None:
        record["type"] = facility.location_type
    return record


def instance_to_dict(instance: ChoiceInstance) -> Dict[str, Any]:
    return {
        "candidates": [_facility_record(f) for f in instance.candidates],
        "competitors": [_facility_record(f) for f in instance.competitors],
        "r": instance.budget,
        "customers": [
            {"q": float(q), "v": row.tolist()} for q, row in zip(instance.weights, instance.utilities)
        ],
        "metadata": _jsonable(instance.metadata),
    }


def save_instance(instance: ChoiceInstance, path: PathLike) -> Path:
    """写出实例文件；浮点数以 repr 精度写入，再次读取逐位相同。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n", encoding="utf-8")
    logger.info(f"已保存实例 {instance} -> {path}")
    return path


def save_coverage(problem: Union[CoverageProblem, ClusteredProblem], path: PathLike) -> Path:
    """写出仿真问题（行以位串表示）以便复现。"""
    path = Path(path)
    clustered = isinstance(problem, ClusteredProblem)
    matrix = problem.profiles if clustered else problem.rows
    record = {
        "kind": "clustered" if clustered else "coverage",
        "budget": problem.budget,
        "n_candidates": problem.n_candidates,
        "n_customers": problem.n_customers,
        "n_scenarios": problem.n_scenarios,
        "rows": ["".join("1" if b else "0" for b in row) for row in matrix],
        "weights": (problem.masses if clustered else problem.weights).tolist(),
        "counts": None if problem.counts is None else problem.counts.tolist(),
    }
    if clustered:
        record.update(
            total_mass=problem.total_mass,
            total_count=problem.total_count,
            source_rows=problem.source_rows,
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    logger.info(f"已保存 {problem} -> {path}")
    return path


def load_coverage(path: PathLike) -> Union[CoverageProblem, ClusteredProblem]:
    """读取 save_coverage 写出的文件。"""
    path = Path(path)
    data = _parse_json(path.read_text(encoding="utf-8"), str(path))
    n_cand = int(_require(data, "n_candidates", str(path)))
    bits = _require(data, "rows", str(path))
    if any(len(row) != n_cand or set(row) - {"0", "1"} for row in bits):
        raise InstanceFormatError(f"{path}: every row must be a bit string of length {n_cand}")
    matrix = np.array([[ch == "1" for ch in row] for row in bits], dtype=bool).reshape(len(bits), n_cand)
    common = dict(
        budget=int(_require(data, "budget", str(path))),
        counts=data.get("counts"),
        n_customers=int(data.get("n_customers", 0)),
        n_scenarios=int(data.get("n_scenarios", 1)),
    )
    weights = np.array(_require(data, "weights", str(path)), dtype=float)
    if data.get("kind") == "clustered":
        return ClusteredProblem(
            profiles=matrix,
            masses=weights,
            total_mass=float(_require(data, "total_mass", str(path))),
            total_count=data.get("total_count"),
            source_rows=int(data.get("source_rows", 0)),
            **common,
        )
    return CoverageProblem(rows=matrix, weights=weights, **common)


class InstanceManager:
    """管理实验中用到的实例，按文件路径缓存已加载的实例。"""

    def __init__(self):
        self.instances: Dict[str, ChoiceInstance] = {}  # 绝对路径 -> 实例

    def load(self, path: PathLike) -> ChoiceInstance:
        """加载实例（已加载过的直接返回缓存）。"""
        key = str(Path(path).resolve())
        if key not in self.instances:
            self.instances[key] = load_instance(path)
        return self.instances[key]

    def get(self, path: PathLike) -> Optional[ChoiceInstance]:
        return self.instances.get(str(Path(path).resolve()))

    def __len__(self) -> int:
        return len(self.instances)
