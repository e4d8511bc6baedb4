"""Prompt rendering and response handling for the refine, align, feedback
and self-evaluation roles."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..lang.parser import RewardProgram, RewardSyntaxError, parse
from ..lang.stats import RewardStats
from ..level import LevelGrid, render_text
from ..patheval import Instruction
from .backends import ChatBackend

PROMPT_DIR = Path(__file__).with_name("prompts")
TEMPLATE_NAMES = ("refine", "align", "feedback", "self_eval")
FEEDBACK_VARIANTS = ("specific", "generic", "none")
KNOWN_PLACEHOLDERS = frozenset({
    "instruction", "grammar", "tile_enum", "current_iter", "max_iter", "parent_reward",
    "parent_feedback", "aux_block", "stats_report", "levels_text", "reward_source",
    "metric_description",
})

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


class TemplateError(KeyError):
    pass


class GenerationError(RuntimeError):
    """An LLM reply could not be turned into a usable result."""


def extract_code(completion: str) -> str:
    """Body of the last fenced block, or the whole reply if there is none."""
    blocks = _FENCE_RE.findall(completion)
    if blocks:
        return blocks[-1].strip() + "\n"
    return completion.strip() + "\n"


def parse_score(completion: str) -> float:
    """First number in [0, 1]; otherwise the first number clamped to [0, 1]."""
    nums = [float(m) for m in _NUMBER_RE.findall(completion)]
    if not nums:
        raise GenerationError("no score found in self-evaluation reply")
    for x in nums:
        if 0.0 <= x <= 1.0:
            return x
    return min(max(nums[0], 0.0), 1.0)


def placeholders(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name is not None}


@dataclass
class PromptBundle:
    templates: dict[str, str]
    grammar: str
    tile_enum: str
    initial_reward: str
    generic_feedback: str
    metric_description: str

    @classmethod
    def load(cls, directory=PROMPT_DIR) -> "PromptBundle":
        d = Path(directory)

        def read(name: str) -> str:
            return (d / name).read_text(encoding="utf-8")

        return cls(
            templates={n: read(f"{n}.txt") for n in TEMPLATE_NAMES},
            grammar=read("grammar.txt").rstrip("\n"),
            tile_enum=read("tile_enum.txt").rstrip("\n"),
            initial_reward=read("initial_reward.rwd"),
            generic_feedback=read("generic_feedback.txt"),
            metric_description=read("metric_description.txt").rstrip("\n"),
        )

    def render(self, name: str, **ctx) -> str:
        template = self.templates[name]
        values = {"grammar": self.grammar, "tile_enum": self.tile_enum,
                  "metric_description": self.metric_description, **ctx}
        wanted = placeholders(template)
        unknown = wanted - KNOWN_PLACEHOLDERS
        if unknown:
            raise TemplateError(f"template {name!r} uses unknown placeholders {sorted(unknown)}")
        missing = wanted - values.keys()
        if missing:
            raise TemplateError(f"template {name!r} needs unsupplied placeholders {sorted(missing)}")
        try:
            return template.format_map({k: values[k] for k in wanted})
        except (KeyError, IndexError, ValueError) as e:
            raise TemplateError(f"template {name!r}: {e}") from None


class Transcript:
    """Persists every request/response pair as ``iter_<y>/<role>_<n>.*.txt``."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None
        self.pairs: list[tuple[str, str, str]] = []
        self._counts: dict[tuple[int, str], int] = {}

    def next_name(self, iteration: int, role: str) -> str:
        n = self._counts.get((iteration, role), 0) + 1
        self._counts[(iteration, role)] = n
        return f"iter_{iteration}/{role}_{n}"

    def write(self, name: str, suffix: str, text: str) -> None:
        if self.root is None:
            return
        path = self.root / f"{name}.{suffix}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


@dataclass
class RefineContext:
    instruction: Instruction
    current_iter: int
    max_iter: int
    parent_reward: str | None = None
    parent_feedback: str | None = None
    parent_fitness: float | None = None
    aux: Sequence[tuple[str, float]] = field(default_factory=list)
    show_fitness: bool = False


def render_aux_block(ctx: RefineContext) -> str:
    if not ctx.show_fitness:
        return ""
    parts = []
    if ctx.parent_fitness is not None:
        parts.append(
            "\n# Fitness of the Current Reward Function\n"
            f"{ctx.parent_fitness:.3f} (0 to 1; share of scenario monster labels the generated levels satisfy)\n"
        )
    if ctx.aux:
        parts.append("\n# Other Reward Functions and Their Fitness\n"
                     "Compare them and combine their advantageous elements.\n")
        for i, (src, fit) in enumerate(ctx.aux, 1):
            parts.append(f"\n## Reward function {i} (fitness {fit:.3f})\n```\n{src.rstrip()}\n```\n")
    return "".join(parts)


def render_levels(levels: Sequence[LevelGrid], limit: int) -> str:
    out = []
    for i, g in enumerate(levels[:limit], 1):
        out.append(f"Level {i}:\n{render_text(g)}")
    return "\n".join(out)


class LLMBridge:
    def __init__(self, backend: ChatBackend, prompts: PromptBundle | None = None,
                 transcript: Transcript | None = None, feedback_levels: int = 5):
        self.backend = backend
        self.prompts = prompts or PromptBundle.load()
        self.transcript = transcript or Transcript()
        self.feedback_levels = feedback_levels

    def ask(self, iteration: int, role: str, prompt: str) -> str:
        name = self.transcript.next_name(iteration, role)
        self.transcript.write(name, "request", prompt)
        reply = self.backend.complete(prompt)
        self.transcript.write(name, "response", reply)
        self.transcript.pairs.append((name, prompt, reply))
        return reply

    def _program_from(self, iteration: int, role: str, prompt: str) -> tuple[str, RewardProgram]:
        source = extract_code(self.ask(iteration, role, prompt))
        try:
            return source, parse(source)
        except RewardSyntaxError as first:
            retry = (
                f"{prompt}\n\n# Your Previous Reply Did Not Parse\n{first}\n"
                f"Previous program:\n```\n{source.rstrip()}\n```\n"
                "Reply again with the corrected complete program in a single fenced code block.\n"
            )
            source = extract_code(self.ask(iteration, role, retry))
            try:
                return source, parse(source)
            except RewardSyntaxError as second:
                raise GenerationError(f"{role}: reply failed to parse twice; last error: {second}") from second

    def generate_reward(self, ctx: RefineContext) -> tuple[str, RewardProgram]:
        first = ctx.parent_reward is None
        prompt = self.prompts.render(
            "refine",
            instruction=ctx.instruction.text,
            current_iter=ctx.current_iter,
            max_iter=ctx.max_iter,
            parent_reward=(self.prompts.initial_reward if first else ctx.parent_reward).rstrip("\n"),
            parent_feedback=(
                "None yet. Outline the components the reward needs, then write it."
                if first or not ctx.parent_feedback else ctx.parent_feedback.rstrip("\n")
            ),
            aux_block=render_aux_block(ctx),
        )
        return self._program_from(ctx.current_iter, "refine", prompt)

    def align_reward(self, source: str, stats: RewardStats, iteration: int) -> tuple[str, RewardProgram]:
        prompt = self.prompts.render(
            "align", reward_source=source.rstrip("\n"), stats_report=stats.report()
        )
        return self._program_from(iteration, "align", prompt)

    def generate_feedback(self, source: str, levels: Sequence[LevelGrid], variant: str,
                          instruction: Instruction, iteration: int) -> str | None:
        if variant == "none":
            return None
        if variant == "generic":
            return self.prompts.generic_feedback
        if variant != "specific":
            raise ValueError(f"unknown feedback variant {variant!r}")
        prompt = self.prompts.render(
            "feedback",
            instruction=instruction.text,
            reward_source=source.rstrip("\n"),
            levels_text=render_levels(levels, self.feedback_levels),
        )
        return self.ask(iteration, "feedback", prompt)

    def self_evaluate_fitness(self, levels: Sequence[LevelGrid], instruction: Instruction,
                              iteration: int) -> float:
        prompt = self.prompts.render(
            "self_eval",
            instruction=instruction.text,
            levels_text=render_levels(levels, self.feedback_levels),
        )
        return parse_score(self.ask(iteration, "self_eval", prompt))
