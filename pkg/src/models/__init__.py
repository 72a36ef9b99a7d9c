"""数据模型模块。"""
from .instance import (
    ChoiceInstance,
    DecisionVector,
    Facility,
    FacilityKind,
    Method,
    Point2D,
    Solution,
    facilities_from_array,
)
from .choice import (
    capture_probability,
    capture_shares,
    competitor_mass,
    mnl_probabilities,
    objective_mnl,
)
from .coverage import ClusteredProblem, CoverageProblem, MassView, coverage_objective
from .reports import CSV_COLUMNS, EntropyReport, EntropyVariant, Estimate, GapReport, ReportRow

__all__ = [
    "ChoiceInstance",
    "DecisionVector",
    "Facility",
    "FacilityKind",
    "Method",
    "Point2D",
    "Solution",
    "facilities_from_array",
    "capture_probability",
    "capture_shares",
    "competitor_mass",
    "mnl_probabilities",
    "objective_mnl",
    "ClusteredProblem",
    "CoverageProblem",
    "MassView",
    "coverage_objective",
    "CSV_COLUMNS",
    "EntropyReport",
    "GapReport",
    "EntropyVariant",
    "Estimate",
    "ReportRow",
]
