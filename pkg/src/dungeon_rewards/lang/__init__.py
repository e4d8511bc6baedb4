"""Sandboxed reward-program language."""

from .evaluator import (
    BudgetExceeded,
    EvalBudget,
    GridFeatures,
    RewardEvalError,
    evaluate,
    interpret,
)
from .parser import RewardProgram, RewardSyntaxError, parse
from .stats import RewardStats, collect_stats, format_report

__all__ = [
    "BudgetExceeded",
    "EvalBudget",
    "GridFeatures",
    "RewardEvalError",
    "RewardProgram",
    "RewardStats",
    "RewardSyntaxError",
    "collect_stats",
    "evaluate",
    "format_report",
    "interpret",
    "parse",
]
