"""最大捕获选址工具的主入口点。

子命令: generate / solve / entropy / evaluate / bench。
退出码: 0 成功；2 存在未证明最优的结果；1 配置或 IO 错误。
"""
import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
import yaml
from loguru import logger

from .analyzers import estimate_entropy, estimate_Z
from .generators import (
    Family,
    Hm14Params,
    Mmnl3Params,
    NoiseModel,
    gen_hm14,
    gen_hm14_mmnl,
    gen_mmnl3,
    materialize_sample,
)
from .managers import load_instance, save_instance
from .models import DecisionVector, objective_mnl
from .orchestrator import ExperimentConfig, ExperimentOrchestrator
from .simulators import build_coverage, cluster
from .solvers import MoaConfig, SolverConfig, moa_solve, solve_exact, solve_mnl_bruteforce
from .utils.config import config
from .utils.errors import CaptureError

EXIT_OK, EXIT_ERROR, EXIT_NOT_OPTIMAL = 0, 1, 2
GENERATIVE = (Family.HM14_MMNL.value, Family.MMNL3.value)


def setup_logging(level: Optional[str] = None):
    """配置日志记录。"""
    level = level or config.log_level
    # 移除默认处理程序
    logger.remove()

    # 控制台输出到 stderr，stdout 留给命令结果
    logger.add(
        sink=sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>",
        level=level,
    )

    # 添加文件处理程序
    logger.add(
        sink=config.log_file,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {message}",
        level=level,
        rotation=config.get("logging.max_size", "10 MB"),
        retention=config.get("logging.backup_count", 5),
    )

    logger.debug(f"日志已初始化: {level}")


def _emit(payload: dict):
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def _parse_open(text: str, n_candidates: int) -> DecisionVector:
    text = text.strip()
    if text and set(text) <= {"0", "1"} and len(text) == n_candidates:
        return DecisionVector.from_bitstring(text)
    indices = [int(part) for part in text.split(",") if part.strip()]
    return DecisionVector.from_indices(n_candidates, indices)


def _model(args):
    """按命令行参数构造生成模型。"""
    if args.family == Family.HM14_MMNL.value:
        return gen_hm14_mmnl(args.seed, n_candidates=args.candidates, n_competitors=args.competitors, budget=args.r)
    return gen_mmnl3(Mmnl3Params.from_config(beta=args.beta, budget=args.r), args.seed)


def cmd_generate(args) -> int:
    if args.family == Family.HM14.value:
        params = Hm14Params.from_config(
            n_customers=args.n, n_candidates=args.candidates, n_competitors=args.competitors,
            beta=args.beta, alpha=args.alpha, budget=args.r,
        )
        instance = gen_hm14(params, args.seed)
    else:
        if args.n is None:
            raise CaptureError(f"--n is required for family {args.family}")
        instance = materialize_sample(_model(args), args.n, args.seed)
    save_instance(instance, args.out)
    _emit({"instance": str(args.out), "customers": instance.n_customers,
           "candidates": instance.n_candidates, "competitors": instance.n_competitors, "r": instance.budget})
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    if args.r is not None:
        instance = instance.with_budget(args.r)
    method = args.method
    payload = {"instance": str(args.instance)}

    if method in ("sb", "sbc"):
        if args.seed is None:
            raise CaptureError("--seed is required for simulation methods")
        coverage = build_coverage(instance, n_scenarios=args.scenarios, noise=NoiseModel.from_config(), seed=args.seed)
        problem = cluster(coverage) if method == "sbc" else coverage
        solution = solve_exact(problem, SolverConfig.from_config())
        payload["z_mnl"] = objective_mnl(instance, solution.decision)
    elif method == "moa":
        solution = moa_solve(instance, MoaConfig.from_config(groups=args.groups))
    else:
        solution = solve_mnl_bruteforce(instance)

    if args.trace and solution.trace:
        pd.DataFrame(solution.trace).to_csv(args.trace, index=False)
        logger.info(f"MOA trace written to {args.trace}")
    logger.info(str(solution))
    payload.update(solution.to_dict())
    _emit(payload)
    return EXIT_OK if solution.optimal else EXIT_NOT_OPTIMAL


def cmd_entropy(args) -> int:
    if args.instance:
        source = load_instance(args.instance)
    elif args.family in GENERATIVE:
        source = _model(args)
    else:
        raise CaptureError("entropy needs --instance or a generative --family")
    report = estimate_entropy(source, n_tilde=args.n_tilde, seed=args.seed)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.instance:
        instance = load_instance(args.instance)
        x = _parse_open(args.open, instance.n_candidates)
        _emit({"objective": objective_mnl(instance, x), "open": list(x.indices)})
        return EXIT_OK
    if args.family not in GENERATIVE:
        raise CaptureError("evaluate needs --instance or a generative --family")
    model = _model(args)
    x = _parse_open(args.open, model.n_candidates)
    estimate = estimate_Z(model, x, n_tilde=args.n_tilde, seed=args.seed)
    _emit({"z_estimate": estimate.value, "stderr": estimate.stderr, "n_tilde": estimate.sample_size,
           "open": list(x.indices)})
    return EXIT_OK


def cmd_bench(args) -> int:
    experiment = ExperimentConfig.from_yaml(
        args.experiment, seeds=args.seeds, jobs=args.jobs, output=args.output, n_tilde=args.n_tilde
    )
    result = asyncio.run(ExperimentOrchestrator(experiment).run_experiment())
    _emit({"report": str(result.output), "summary": str(result.summary_path), "rows": len(result.rows),
           "non_optimal": result.non_optimal})
    return EXIT_NOT_OPTIMAL if result.non_optimal else EXIT_OK


def _family_args(parser: argparse.ArgumentParser, required: bool = False):
    parser.add_argument("--family", choices=[f.value for f in Family if f is not Family.FILE], required=required)
    parser.add_argument("--n", type=int, help="客户数 |N|")
    parser.add_argument("--candidates", type=int, help="候选设施数 |D|")
    parser.add_argument("--competitors", type=int, help="竞争设施数 |E|")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("-r", "--budget", dest="r", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="替代的 config.yaml")
    common.add_argument("--log-level", help="覆盖 logging.level")

    parser = argparse.ArgumentParser(prog="max-capture", description="随机效用需求下的最大捕获竞争选址")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="生成实例文件")
    _family_args(p, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("solve", parents=[common], help="求解实例文件")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--method", choices=["sb", "sbc", "moa", "brute"], default="moa")
    p.add_argument("--seed", type=int, help="仿真方法必需")
    p.add_argument("-s", "--scenarios", type=int, default=1, help="|S|")
    p.add_argument("-r", "--budget", dest="r", type=int)
    p.add_argument("--groups", type=int, help="MOA 的组数 T")
    p.add_argument("--trace", type=Path, help="MOA 迭代记录的 CSV 路径")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("entropy", parents=[common], help="估计期望条件熵")
    p.add_argument("--instance", type=Path)
    _family_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-tilde", type=int)
    p.set_defaults(handler=cmd_entropy)

    p = sub.add_parser("evaluate", parents=[common], help="评估一个决策的市场份额")
    p.add_argument("--instance", type=Path)
    _family_args(p)
    p.add_argument("--open", required=True, help="开设的候选下标（逗号分隔）或位串")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-tilde", type=int)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("bench", parents=[common], help="运行实验网格")
    p.add_argument("--experiment", type=Path, required=True)
    p.add_argument("--seed", "--seeds", dest="seeds", type=int, nargs="+")
    p.add_argument("--jobs", type=int)
    p.add_argument("--output", type=Path)
    p.add_argument("--n-tilde", type=int)
    p.set_defaults(handler=cmd_bench)
    return parser


def cli(argv: Optional[List[str]] = None) -> int:
    """命令行入口，返回退出码。"""
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config.reload(args.config)
        setup_logging(args.log_level)
        return args.handler(args)
    except (CaptureError, OSError, ValueError, yaml.YAMLError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("正在关闭...")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(cli())
