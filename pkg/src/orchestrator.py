"""实验网格的主编排器。"""
import asyncio
import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional

import pandas as pd
import yaml
from loguru import logger

from src.analyzers import SampleCache, entropy_mmnl, entropy_mnl, estimate_Z, rgap, rgen_gap
from src.generators import (
    Family,
    GenerativeModel,
    Hm14Params,
    Mmnl3Params,
    NoiseModel,
    gen_hm14,
    gen_hm14_mmnl,
    gen_mmnl3,
    materialize_sample,
)
from src.managers import InstanceManager
from src.models import CSV_COLUMNS, ChoiceInstance, GapReport, ReportRow, Solution
from src.simulators import build_coverage, cluster, size_reduction
from src.solvers import MoaConfig, moa_solve, solve_exact, solve_mnl_bruteforce
from src.utils.config import config
from src.utils.errors import ConfigError, MetricError, SolverLimitError

METHODS = ("sb", "sbc", "moa", "brute")
SIMULATION_METHODS = ("sb", "sbc")


def _as_list(value: Any) -> List[Any]:
    if value is None:
        return [None]
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class ExperimentConfig:
    """一个实验网格：族参数 × |N| 阶梯 × |S| 阶梯 × 种子。

    betas/alphas/budgets/n_candidates 为空表示使用 config.yaml 中该族的默认值。
    """

    family: Family
    methods: List[str]
    seeds: List[int]
    n_values: List[Optional[int]] = field(default_factory=lambda: [None])
    s_values: List[int] = field(default_factory=lambda: [1])
    betas: List[Optional[float]] = field(default_factory=lambda: [None])
    alphas: List[Optional[float]] = field(default_factory=lambda: [None])
    budgets: List[Optional[int]] = field(default_factory=lambda: [None])
    n_candidates: List[Optional[int]] = field(default_factory=lambda: [None])
    n_tilde: int = 100_000
    output: Path = Path("reports/experiment.csv")
    instance_path: Optional[Path] = None
    jobs: int = 1
    moa_groups: Optional[int] = None

    def __post_init__(self):
        try:
            self.family = Family(self.family)
        except ValueError as e:
            raise ConfigError(f"Unknown family '{self.family}'") from e
        self.methods = [str(m).lower() for m in self.methods]
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"Unknown methods: {sorted(unknown)}")
        if not self.methods or not self.seeds:
            raise ConfigError("An experiment needs at least one method and one seed")
        if self.family is Family.FILE and self.instance_path is None:
            raise ConfigError("family 'file' needs instance_path")
        if any(s is None or s < 1 for s in self.s_values) or self.n_tilde < 1 or self.jobs < 1:
            raise ConfigError("|S| ladder, n_tilde and jobs must be positive")
        self.output = Path(self.output)
        if self.instance_path is not None:
            self.instance_path = Path(self.instance_path)

    @classmethod
    def from_yaml(cls, path, **overrides) -> "ExperimentConfig":
        """从实验 YAML 构造配置；overrides 中非空的值覆盖文件内容。"""
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read experiment file {path}: {e}") from e

        aliases = {"n": "n_values", "s": "s_values", "beta": "betas", "alpha": "alphas", "r": "budgets"}
        values = {aliases.get(k, k): v for k, v in raw.items()}
        values.update({aliases.get(k, k): v for k, v in overrides.items() if v is not None})
        values.setdefault("n_tilde", config.n_tilde)
        values.setdefault("jobs", int(config.get("report.jobs", 1)))
        for key in ("n_values", "s_values", "betas", "alphas", "budgets", "n_candidates", "seeds", "methods"):
            if key in values:
                values[key] = _as_list(values[key])
        known = {f.name for f in fields(cls)}
        extra = set(values) - known
        if extra:
            raise ConfigError(f"Unknown experiment keys: {sorted(extra)}")
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment file {path}: {e}") from e

    @property
    def summary_path(self) -> Path:
        return self.output.with_name(f"{self.output.stem}_summary.csv")


@dataclass(frozen=True)
class Cell:
    """网格中的一个单元（不含 |S|：仿真方法在单元内遍历 |S| 阶梯）。"""

    beta: Optional[float]
    alpha: Optional[float]
    r: Optional[int]
    n_candidates: Optional[int]
    n: Optional[int]


class Built(NamedTuple):
    """一个 (单元, 种子) 的输入：有限样本实例、生成模型（有限支撑族为空）、熵及实际使用的 β、α。"""

    instance: ChoiceInstance
    model: Optional[GenerativeModel]
    entropy: float
    beta: Optional[float]
    alpha: Optional[float]


@dataclass
class ExperimentResult:
    rows: List[ReportRow]
    output: Path
    summary_path: Optional[Path]

    @property
    def non_optimal(self) -> int:
        return sum(1 for row in self.rows if not row.optimal_flag)


class _OrderedSink:
    """按任务顺序写 CSV 行：先完成的任务先缓存，保证输出与并发度无关。"""

    def __init__(self, path: Path):
        self.path = path
        self.pending: Dict[int, List[ReportRow]] = {}
        self.next_index = 0
        self.lock = asyncio.Lock()
        path.parent.mkdir(parents=True, exist_ok=True)
        self.handle = open(path, "w", encoding="utf-8", newline="")
        self.writer = csv.DictWriter(self.handle, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        self.writer.writeheader()

    async def put(self, index: int, rows: List[ReportRow]):
        async with self.lock:
            self.pending[index] = rows
            while self.next_index in self.pending:
                for row in self.pending.pop(self.next_index):
                    self.writer.writerow(row.to_record())
                self.next_index += 1
            self.handle.flush()

    def close(self):
        self.handle.close()


class ExperimentOrchestrator:
    """编排实验：生成/加载实例，逐方法求解，计算指标，写报告。"""

    def __init__(self, experiment: ExperimentConfig):
        """初始化编排器。

        参数:
            experiment: 实验配置
        """
        self.experiment = experiment
        self.instance_manager = InstanceManager()
        self.include_timing = bool(config.get("report.include_timing", False))
        self.noise = NoiseModel.from_config()
        self.moa_config = MoaConfig.from_config(groups=experiment.moa_groups)

    def cells(self) -> List[Cell]:
        e = self.experiment
        return [
            Cell(beta, alpha, r, d, n)
            for beta, alpha, r, d, n in itertools.product(e.betas, e.alphas, e.budgets, e.n_candidates, e.n_values)
        ]

    def tasks(self) -> List[tuple]:
        return [(cell, seed) for cell in self.cells() for seed in self.experiment.seeds]

    def _build(self, cell: Cell, seed: int) -> Built:
        family = self.experiment.family
        if family in (Family.FILE, Family.HM14):
            if family is Family.FILE:
                instance = self.instance_manager.load(self.experiment.instance_path)
                if cell.r is not None:
                    instance = instance.with_budget(cell.r)
            else:
                params = Hm14Params.from_config(
                    n_customers=cell.n, n_candidates=cell.n_candidates, beta=cell.beta, alpha=cell.alpha,
                    budget=cell.r,
                )
                instance = gen_hm14(params, seed)
            meta = instance.metadata
            return Built(
                instance, None, entropy_mnl(instance), meta.get("beta", cell.beta), meta.get("alpha", cell.alpha)
            )

        if cell.n is None:
            raise ConfigError(f"family '{family.value}' needs an |N| ladder")
        if family is Family.HM14_MMNL:
            model = gen_hm14_mmnl(seed, n_candidates=cell.n_candidates, budget=cell.r)
            beta, alpha = 1.0, 1.0
        else:
            params = Mmnl3Params.from_config(beta=cell.beta, budget=cell.r)
            model = gen_mmnl3(params, seed)
            beta, alpha = params.beta, None
        entropy = entropy_mmnl(model, self.experiment.n_tilde, seed)
        return Built(materialize_sample(model, cell.n, seed), model, entropy, beta, alpha)

    def _row(self, built: Built, seed: int, method: str, s: Optional[int], solution: Optional[Solution],
             gaps: GapReport) -> ReportRow:
        time_ms = None
        if solution is not None and self.include_timing:
            time_ms = solution.wall_time * 1000.0
        return ReportRow(
            family=self.experiment.family.value,
            beta=built.beta,
            alpha=built.alpha,
            r=built.instance.budget,
            n=built.instance.n_customers,
            s=s,
            seed=seed,
            method=method,
            time_ms=time_ms,
            objective=math.nan if solution is None else solution.objective,
            rgap_pct=gaps.rgap_pct,
            rgen_gap_pct=gaps.rgen_gap_pct,
            entropy=built.entropy,
            size_reduction_pct=gaps.size_reduction_pct,
            optimal_flag=solution is not None and solution.optimal,
        )

    def _metrics(self, built: Built, seed: int, solution: Solution, reference: Optional[Solution],
                 samples: SampleCache, size_reduction_pct: float = math.nan) -> GapReport:
        gaps = GapReport(z_insample=solution.objective, size_reduction_pct=size_reduction_pct)
        try:
            if reference is not None:
                gaps.rgap_pct = rgap(solution.decision, built.instance, reference)
            if built.model is not None:
                z_hat = estimate_Z(built.model, solution.decision, self.experiment.n_tilde, seed, cache=samples)
                gaps.z_estimate = z_hat.value
                gaps.n_tilde = z_hat.sample_size
                gaps.rgen_gap_pct = rgen_gap(solution.objective, z_hat)
        except MetricError as e:
            logger.warning(f"Metric undefined for {solution.method.value}: {e}")
        logger.debug(f"{solution.method.value} seed={seed}: {gaps}, {solution.wall_time * 1000:.1f}ms")
        return gaps

    def _solve_exact_mnl(self, method: str, instance: ChoiceInstance) -> Optional[Solution]:
        try:
            if method == "moa":
                return moa_solve(instance, self.moa_config)
            return solve_mnl_bruteforce(instance)
        except SolverLimitError as e:
            logger.warning(f"{method} skipped for {instance}: {e}")
            return None

    def run_task(self, cell: Cell, seed: int) -> List[ReportRow]:
        """运行一个 (单元, 种子)：按配置顺序每个方法输出一行，仿真方法每个 |S| 一行。

        有限样本上的精确解（MOA 或穷举）作为 RGap 的参照；生成族另外计算 RGenGap。
        """
        built = self._build(cell, seed)
        logger.info(f"Cell {cell} seed={seed}: {built.instance}, entropy={built.entropy:.4f}")

        exact = {
            method: self._solve_exact_mnl(method, built.instance)
            for method in self.experiment.methods
            if method not in SIMULATION_METHODS
        }
        reference = next((sol for sol in exact.values() if sol is not None and sol.optimal), None)
        # 评估样本只在本任务内复用
        samples: SampleCache = {}

        rows: List[ReportRow] = []
        for method in self.experiment.methods:
            if method not in SIMULATION_METHODS:
                solution = exact[method]
                gaps = GapReport() if solution is None else self._metrics(built, seed, solution, reference, samples)
                rows.append(self._row(built, seed, method, None, solution, gaps))
                continue
            for s in self.experiment.s_values:
                coverage = build_coverage(built.instance, n_scenarios=s, noise=self.noise, seed=seed)
                reduction = math.nan
                if method == "sbc":
                    clustered = cluster(coverage)
                    reduction = size_reduction(coverage, clustered)
                    solution = solve_exact(clustered)
                else:
                    solution = solve_exact(coverage)
                gaps = self._metrics(built, seed, solution, reference, samples, size_reduction_pct=reduction)
                rows.append(self._row(built, seed, method, s, solution, gaps))
        return rows

    async def run_experiment(self) -> ExperimentResult:
        """运行整个网格，写出逐行 CSV 与按单元平均的汇总表。"""
        tasks = self.tasks()
        experiment = self.experiment
        logger.info(
            f"🚀 Running {experiment.family.value} experiment: {len(tasks)} tasks, "
            f"methods={experiment.methods}, jobs={experiment.jobs}"
        )
        sink = _OrderedSink(experiment.output)
        loop = asyncio.get_running_loop()
        results: List[List[ReportRow]] = [[] for _ in tasks]

        async def run_one(index: int, executor: ThreadPoolExecutor):
            cell, seed = tasks[index]
            rows = await loop.run_in_executor(executor, self.run_task, cell, seed)
            results[index] = rows
            await sink.put(index, rows)
            logger.info(f"[{index + 1}/{len(tasks)}] wrote {len(rows)} rows for seed={seed}")

        try:
            with ThreadPoolExecutor(max_workers=experiment.jobs) as executor:
                await asyncio.gather(*(run_one(i, executor) for i in range(len(tasks))))
        finally:
            sink.close()

        rows = [row for chunk in results for row in chunk]
        summary_path = self.write_summary() if rows else None
        result = ExperimentResult(rows=rows, output=experiment.output, summary_path=summary_path)
        logger.info(f"Report written to {experiment.output} ({len(rows)} rows, {result.non_optimal} flagged)")
        return result

    def write_summary(self) -> Path:
        """按 (单元, 方法, |S|) 对种子求平均，每组一行。"""
        frame = pd.read_csv(self.experiment.output)
        frame["z_estimate"] = frame["objective"] * (1.0 - frame["rgen_gap_pct"] / 100.0)
        keys = ["family", "beta", "alpha", "r", "n", "s", "method"]
        summary = (
            frame.groupby(keys, dropna=False, sort=False)
            .agg(
                seeds=("seed", "count"),
                time_ms=("time_ms", "mean"),
                objective=("objective", "mean"),
                z_estimate=("z_estimate", "mean"),
                rgap_pct=("rgap_pct", "mean"),
                rgen_gap_pct=("rgen_gap_pct", "mean"),
                entropy=("entropy", "mean"),
                size_reduction_pct=("size_reduction_pct", "mean"),
                optimal=("optimal_flag", "min"),
            )
            .reset_index()
        )
        path = self.experiment.summary_path
        summary.to_csv(path, index=False, float_format="%.6g")
        logger.info(f"Summary written to {path}")
        return path


def run_experiment(experiment: ExperimentConfig) -> ExperimentResult:
    """同步入口：运行一个实验配置。"""
    return asyncio.run(ExperimentOrchestrator(experiment).run_experiment())
