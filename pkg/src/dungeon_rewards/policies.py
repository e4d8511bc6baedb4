"""Level-generation policies: uniform random and greedy one-step lookahead.

The greedy policy stands in for a trained PPO agent. At each step it
scores every candidate tile placement at the cursor with the reward
program and takes the best one (lowest action index on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, EnvState, run_episode
from .lang.evaluator import GridFeatures, compiled
from .lang.parser import RewardProgram
from .level import LevelGrid
from .seeding import derive_seed

POLICY_KINDS = ("random", "greedy")


@dataclass(frozen=True)
class RandomPolicy:
    kind = "random"

    def start(self, seed: int) -> np.random.Generator:
        return np.random.default_rng(seed)

    def act(self, st: EnvState, cfg: EnvConfig, feats: GridFeatures, rng: np.random.Generator) -> int:
        return act_random(cfg.n_actions, rng)


def act_random(n_actions: int, rng: np.random.Generator) -> int:
    return int(rng.integers(n_actions))


@dataclass(frozen=True)
class GreedyPolicy:
    program: RewardProgram
    epsilon: float = 0.05
    kind = "greedy"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def start(self, seed: int) -> np.random.Generator:
        return np.random.default_rng(seed)

    def act(self, st: EnvState, cfg: EnvConfig, feats: GridFeatures, rng: np.random.Generator) -> int:
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            return act_random(cfg.n_actions, rng)
        return act_greedy(st, cfg, self.program, feats)


def act_greedy(st: EnvState, cfg: EnvConfig, program: RewardProgram,
               feats: GridFeatures | None = None) -> int:
    """Index of the placement that maximizes ``R(grid, candidate)``."""
    if st.cursor_protected:
        return 0
    fn = compiled(program)
    if feats is None:
        feats = GridFeatures(st.grid)
    r, c = st.cursor
    old = int(st.grid[r, c])
    best_i, best_v = 0, None
    for i, t in enumerate(cfg.action_tiles):
        t = int(t)
        if t == old:
            cand = feats.edited(st.grid, old, old)
        else:
            cells = st.grid.copy()
            cells[r, c] = t
            cand = feats.edited(cells, old, t, (r, c))
        v = fn(feats, cand)
        if best_v is None or v > best_v:
            best_i, best_v = i, v
    return best_i


def make_policy(kind: str, program: RewardProgram | None = None, epsilon: float = 0.05):
    if kind == "random":
        return RandomPolicy()
    if kind == "greedy":
        if program is None:
            raise ValueError("greedy policy needs a reward program")
        return GreedyPolicy(program, epsilon)
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")


def generate_batch(cfg: EnvConfig, program: RewardProgram, policy, n: int, seed: int) -> list[LevelGrid]:
    """Terminal levels of ``n`` independent episodes.

    Episode ``i`` uses seeds derived from ``(seed, i)`` only, so any subset
    or ordering of episodes reproduces the same levels.
    """
    levels = []
    for i in range(n):
        ep = run_episode(cfg, derive_seed(seed, i, 0), policy, program,
                         policy_seed=derive_seed(seed, i, 1), score=False)
        levels.append(ep.terminal)
    return levels


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "greedy"
    epsilon: float = 0.05

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def build(self, program: RewardProgram | None = None):
        return make_policy(self.kind, program, self.epsilon)
