"""Reward statistics from random-agent rollouts, used for self-alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .parser import RewardProgram


@dataclass(frozen=True)
class RewardStats:
    mean: float
    std: float  # population
    zero_pct: float
    sample_count: int

    @classmethod
    def from_trace(cls, rewards: Sequence[float]) -> "RewardStats":
        n = len(rewards)
        if n == 0:
            raise ValueError("empty reward trace")
        mean = math.fsum(rewards) / n
        var = math.fsum((r - mean) ** 2 for r in rewards) / n
        zeros = sum(1 for r in rewards if r == 0.0)
        return cls(mean, math.sqrt(var), 100.0 * zeros / n, n)

    def report(self) -> str:
        return format_report(self)


def format_report(s: RewardStats) -> str:
    return f"Mean: {s.mean:.6f}\nStd: {s.std:.6f}\nZero Value Percent: {s.zero_pct:.4f}%\n"


def collect_stats(program: RewardProgram, cfg, seed: int, n_episodes: int = 1,
                  *, return_trace: bool = False):
    """Mean/std/zero share of rewards over ``n_episodes`` random-agent episodes.

    Evaluation errors propagate as ``RewardEvalError`` with ``step`` set.
    """
    from ..env import run_episode
    from ..policies import RandomPolicy
    from ..seeding import derive_seed

    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    trace: list[float] = []
    policy = RandomPolicy()
    for i in range(n_episodes):
        ep = run_episode(cfg, derive_seed(seed, i, 0), policy, program,
                         policy_seed=derive_seed(seed, i, 1))
        trace.extend(ep.rewards)
    stats = RewardStats.from_trace(trace)
    return (stats, trace) if return_trace else stats
