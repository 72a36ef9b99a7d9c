"""求解器模块。"""
from .binary import SolverConfig, SolverMode, solve_bruteforce, solve_exact, upper_bound
from .moa import (
    Cut,
    CustomerGroup,
    MasterResult,
    MoaConfig,
    group_lower_bound,
    group_value_grad,
    moa_solve,
    partition,
    solve_master,
    solve_mnl_bruteforce,
)

__all__ = [
    "SolverConfig",
    "SolverMode",
    "solve_bruteforce",
    "solve_exact",
    "upper_bound",
    "Cut",
    "CustomerGroup",
    "MasterResult",
    "MoaConfig",
    "group_lower_bound",
    "group_value_grad",
    "moa_solve",
    "partition",
    "solve_master",
    "solve_mnl_bruteforce",
]
