"""Instruction-level accuracy of generated levels.

For every key the simulated player takes the shortest route player -> key
-> door. Routes whose player -> key leg passes over another key are
dropped. Any enemy within the 5x5 window around a cell of a remaining
route counts as encountered; the encountered set is compared label by
label with the enemies the instruction names.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .level import ENEMIES, LevelGrid, Position, Tile

# up, down, left, right
NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))
KERNEL_RADIUS = 2  # 5x5 window


class PathEvalError(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    text: str
    truth: tuple[bool, bool, bool]  # (BAT, SCORPION, SPIDER)

    def __post_init__(self):
        if len(self.truth) != len(ENEMIES):
            raise PathEvalError("instruction truth needs exactly 3 entries (bat, scorpion, spider)")
        object.__setattr__(self, "truth", tuple(bool(x) for x in self.truth))

    @classmethod
    def from_text(cls, text: str) -> "Instruction":
        """Ground truth is the set of enemies the story mentions."""
        words = set(re.findall(r"[a-z]+", text.lower()))
        truth = tuple(
            any(w in words for w in (e.name.lower(), e.name.lower() + "s")) for e in ENEMIES
        )
        return cls(text.strip(), truth)


INSTRUCTIONS = {
    1: Instruction(
        "The player needs to obtain a key and escape through the door. "
        "To pick up the key, the player encounters bat monsters.",
        (True, False, False),
    ),
    2: Instruction(
        "The player needs to obtain a key and escape through the door. "
        "To pick up the key, the player encounters bat and spider monsters.",
        (True, False, True),
    ),
}


def load_instruction(ref) -> Instruction:
    """Built-in instruction by id (``1``/``2``) or a story text file."""
    if isinstance(ref, Instruction):
        return ref
    s = str(ref)
    if s.isdigit():
        try:
            return INSTRUCTIONS[int(s)]
        except KeyError:
            raise PathEvalError(f"no built-in instruction {s}; known: {sorted(INSTRUCTIONS)}") from None
    path = Path(s)
    if not path.is_file():
        raise PathEvalError(f"instruction file not found: {s}")
    return Instruction.from_text(path.read_text(encoding="utf-8"))


@dataclass
class EncounterReport:
    prediction: tuple[bool, bool, bool]
    trajectories: list[tuple[Position, list[Position]]] = field(default_factory=list)

    @property
    def solution_count(self) -> int:
        return len(self.trajectories)


def find_path(g: LevelGrid, start, goal) -> list[Position] | None:
    """Shortest 4-connected path through non-wall cells, endpoints included.

    Breadth-first with neighbor order up, down, left, right, so ties
    always resolve the same way. Returns ``None`` if ``goal`` is
    unreachable.
    """
    cells = g.cells
    h, w = cells.shape
    sr, sc = start
    gr, gc = goal
    if not (0 <= sr < h and 0 <= sc < w and 0 <= gr < h and 0 <= gc < w):
        raise PathEvalError("path endpoints out of bounds")
    if cells[sr, sc] == Tile.WALL or cells[gr, gc] == Tile.WALL:
        return None
    parent = {(sr, sc): None}
    q = deque([(sr, sc)])
    while q:
        cur = q.popleft()
        if cur == (gr, gc):
            break
        r, c = cur
        for dr, dc in NEIGHBORS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in parent and cells[nr, nc] != Tile.WALL:
                parent[(nr, nc)] = cur
                q.append((nr, nc))
    if (gr, gc) not in parent:
        return None
    path = []
    node = (gr, gc)
    while node is not None:
        path.append(Position(*node))
        node = parent[node]
    path.reverse()
    return path


def _single(g: LevelGrid, t: Tile) -> Position:
    pos = g.positions(t)
    if len(pos) != 1:
        raise PathEvalError(f"level must contain exactly one {t.name}, found {len(pos)}")
    return pos[0]


def detect_encounters(g: LevelGrid) -> EncounterReport:
    player = _single(g, Tile.PLAYER)
    door = _single(g, Tile.DOOR)
    cells = g.cells
    h, w = cells.shape
    keys = g.positions(Tile.KEY)
    seen = np.zeros(cells.shape, dtype=bool)
    trajectories = []
    for k in keys:
        to_key = find_path(g, player, k)
        if to_key is None:
            continue
        to_door = find_path(g, k, door)
        if to_door is None:
            continue
        if sum(1 for p in to_key if cells[p.row, p.col] == Tile.KEY) != 1:
            continue
        route = to_key + to_door[1:]
        trajectories.append((k, route))
        for p in route:
            seen[max(p.row - KERNEL_RADIUS, 0):min(p.row + KERNEL_RADIUS + 1, h),
                 max(p.col - KERNEL_RADIUS, 0):min(p.col + KERNEL_RADIUS + 1, w)] = True
    window = cells[seen]
    prediction = tuple(bool(np.any(window == e)) for e in ENEMIES)
    return EncounterReport(prediction, trajectories)


def accuracy(truth: Sequence[bool], pred: Sequence[bool]) -> float:
    if len(truth) != len(pred):
        raise PathEvalError("truth and prediction lengths differ")
    return sum(1 for a, b in zip(truth, pred) if bool(a) == bool(b)) / len(truth)


@dataclass(frozen=True)
class LevelScore:
    accuracy: float
    report: EncounterReport


def score_level(g: LevelGrid, instr: Instruction) -> LevelScore:
    rep = detect_encounters(g)
    return LevelScore(accuracy(instr.truth, rep.prediction), rep)


def fitness(levels: Iterable[LevelGrid], instr: Instruction) -> float:
    """Mean accuracy over a batch of levels, in [0, 1]."""
    scores = [score_level(g, instr).accuracy for g in levels]
    if not scores:
        raise PathEvalError("fitness needs at least one level")
    return sum(scores) / len(scores)
