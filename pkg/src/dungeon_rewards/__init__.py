"""Iterative reward-program refinement for grid-dungeon level generation."""

from .archive import Archive, StrategyConfig, ThoughtNode
from .env import EnvConfig, reset, run_episode, step
from .lang import EvalBudget, RewardProgram, RewardStats, collect_stats, evaluate, parse
from .level import LevelGrid, Position, Tile, parse_text, render_image, render_text, tile_glyph
from .patheval import INSTRUCTIONS, Instruction, accuracy, detect_encounters, find_path, fitness
from .policies import GreedyPolicy, PolicyConfig, RandomPolicy, generate_batch

__version__ = "0.1.0"

__all__ = [
    "Archive", "StrategyConfig", "ThoughtNode",
    "EnvConfig", "reset", "run_episode", "step",
    "EvalBudget", "RewardProgram", "RewardStats", "collect_stats", "evaluate", "parse",
    "LevelGrid", "Position", "Tile", "parse_text", "render_image", "render_text", "tile_glyph",
    "INSTRUCTIONS", "Instruction", "accuracy", "detect_encounters", "find_path", "fitness",
    "GreedyPolicy", "PolicyConfig", "RandomPolicy", "generate_batch",
]
