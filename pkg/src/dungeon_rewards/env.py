"""Narrow-representation level-editing environment.

A cursor scans the grid in row-major order; each step replaces the tile
under the cursor with one of the action tiles unless the cell is protected
(the 3x3 neighborhoods of the player and the door). An episode is
``scans_per_episode`` full scans. Rewards are computed by the episode
runner, not by ``step``, so one trajectory can be scored by several
programs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .seeding import derive_seed
from .level import DEFAULT_SIDE, LevelGrid, Position, Tile, check_level_dims
from .lang.evaluator import GridFeatures, RewardEvalError, compiled
from .lang.parser import RewardProgram

DEFAULT_ACTION_TILES = (Tile.EMPTY, Tile.WALL, Tile.BAT, Tile.SCORPION, Tile.SPIDER)
DEFAULT_INIT_WEIGHTS = {
    Tile.EMPTY: 0.55,
    Tile.WALL: 0.25,
    Tile.BAT: 0.05,
    Tile.SCORPION: 0.05,
    Tile.SPIDER: 0.05,
    Tile.KEY: 0.05,
}
SPAWN_MODES = ("corners", "edges")
MIN_SPAWN_SEPARATION = 4  # Chebyshev distance; keeps the protected 3x3 areas disjoint


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    height: int = DEFAULT_SIDE
    width: int = DEFAULT_SIDE
    scans_per_episode: int = 3
    spawn_mode: str = "edges"
    action_tiles: tuple[Tile, ...] = DEFAULT_ACTION_TILES
    init_weights: dict = field(default_factory=lambda: dict(DEFAULT_INIT_WEIGHTS))
    seed: int = 0

    def __post_init__(self):
        try:
            check_level_dims(self.height, self.width)
        except ValueError as e:
            raise EnvError(str(e)) from None
        if self.scans_per_episode < 1:
            raise EnvError("scans_per_episode must be >= 1")
        if self.spawn_mode not in SPAWN_MODES:
            raise EnvError(f"spawn_mode must be one of {SPAWN_MODES}, got {self.spawn_mode!r}")
        tiles = tuple(Tile(int(t)) for t in self.action_tiles)
        if not tiles:
            raise EnvError("action_tiles must not be empty")
        if len(set(tiles)) != len(tiles):
            raise EnvError("action_tiles must not repeat")
        if Tile.PLAYER in tiles or Tile.DOOR in tiles:
            raise EnvError("PLAYER and DOOR cannot be action tiles")
        object.__setattr__(self, "action_tiles", tiles)
        weights = {Tile(int(k) if not isinstance(k, str) else Tile[k]): float(v)
                   for k, v in self.init_weights.items()}
        if Tile.PLAYER in weights or Tile.DOOR in weights:
            raise EnvError("PLAYER and DOOR cannot appear in init_weights")
        if any(w < 0 for w in weights.values()) or sum(weights.values()) <= 0:
            raise EnvError("init_weights must be non-negative with a positive sum")
        object.__setattr__(self, "init_weights", weights)

    @property
    def episode_length(self) -> int:
        return self.scans_per_episode * self.height * self.width

    @property
    def n_actions(self) -> int:
        return len(self.action_tiles)

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "scans_per_episode": self.scans_per_episode,
            "spawn_mode": self.spawn_mode,
            "action_tiles": [t.name for t in self.action_tiles],
            "init_weights": {t.name: w for t, w in sorted(self.init_weights.items())},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        if "action_tiles" in d:
            d["action_tiles"] = tuple(Tile[t] if isinstance(t, str) else Tile(t) for t in d["action_tiles"])
        return cls(**d)


@dataclass(frozen=True)
class EnvState:
    grid: np.ndarray  # (h, w) uint8, treated as immutable
    cursor: Position
    step_index: int
    protected: np.ndarray  # (h, w) bool
    player_pos: Position
    door_pos: Position
    rng_state: dict
    episode_length: int

    @property
    def done(self) -> bool:
        return self.step_index >= self.episode_length

    @property
    def level(self) -> LevelGrid:
        return LevelGrid._trusted(self.grid.copy())

    @property
    def cursor_protected(self) -> bool:
        return bool(self.protected[self.cursor.row, self.cursor.col])


@dataclass(frozen=True)
class StepOutcome:
    prev_grid: LevelGrid
    curr_grid: LevelGrid
    reward: float
    done: bool


def protection_mask(shape: tuple[int, int], *centers: Position) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    h, w = shape
    for p in centers:
        mask[max(p.row - 1, 0):min(p.row + 2, h), max(p.col - 1, 0):min(p.col + 2, w)] = True
    return mask


def _border_cells(h: int, w: int) -> list[tuple[int, int]]:
    cells = [(0, c) for c in range(w)] + [(h - 1, c) for c in range(w)]
    cells += [(r, 0) for r in range(1, h - 1)] + [(r, w - 1) for r in range(1, h - 1)]
    return cells


def _spawn(cfg: EnvConfig, rng: np.random.Generator) -> tuple[Position, Position]:
    h, w = cfg.height, cfg.width
    if cfg.spawn_mode == "corners":
        diagonals = (((0, 0), (h - 1, w - 1)), ((0, w - 1), (h - 1, 0)))
        a, b = diagonals[int(rng.integers(2))]
        if rng.integers(2):
            a, b = b, a
        return Position(*a), Position(*b)
    border = _border_cells(h, w)
    while True:
        a = border[int(rng.integers(len(border)))]
        b = border[int(rng.integers(len(border)))]
        if max(abs(a[0] - b[0]), abs(a[1] - b[1])) >= MIN_SPAWN_SEPARATION:
            return Position(*a), Position(*b)


def reset(cfg: EnvConfig, seed: int | None = None) -> EnvState:
    """Fresh random level with player and door placed per ``cfg.spawn_mode``."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    player, door = _spawn(cfg, rng)
    tiles = sorted(cfg.init_weights)
    weights = np.array([cfg.init_weights[t] for t in tiles], dtype=np.float64)
    draws = rng.choice(np.array([int(t) for t in tiles], dtype=np.uint8),
                       size=(cfg.height, cfg.width), p=weights / weights.sum())
    grid = draws.astype(np.uint8)
    grid[player.row, player.col] = Tile.PLAYER
    grid[door.row, door.col] = Tile.DOOR
    grid.setflags(write=False)
    mask = protection_mask(grid.shape, player, door)
    mask.setflags(write=False)
    return EnvState(
        grid=grid,
        cursor=Position(0, 0),
        step_index=0,
        protected=mask,
        player_pos=player,
        door_pos=door,
        rng_state=rng.bit_generator.state,
        episode_length=cfg.episode_length,
    )


def _advance(cursor: Position, h: int, w: int) -> Position:
    c = cursor.col + 1
    if c < w:
        return Position(cursor.row, c)
    r = cursor.row + 1
    return Position(r if r < h else 0, 0)


def step_grid(st: EnvState, cfg: EnvConfig, action_index: int) -> tuple[EnvState, np.ndarray, int, int]:
    """Transition returning ``(new_state, new_grid, old_tile, new_tile)``."""
    if st.done:
        raise EnvError("step called after the episode finished")
    if not 0 <= action_index < len(cfg.action_tiles):
        raise EnvError(f"action index {action_index} out of range 0..{len(cfg.action_tiles) - 1}")
    r, c = st.cursor
    old = int(st.grid[r, c])
    new = old
    grid = st.grid
    if not st.protected[r, c]:
        new = int(cfg.action_tiles[action_index])
        if new != old:
            grid = grid.copy()
            grid[r, c] = new
            grid.setflags(write=False)
    nxt = replace(
        st,
        grid=grid,
        cursor=_advance(st.cursor, cfg.height, cfg.width),
        step_index=st.step_index + 1,
    )
    return nxt, grid, old, new


def step(st: EnvState, cfg: EnvConfig, action_index: int) -> tuple[EnvState, StepOutcome]:
    """One edit at the cursor. The outcome's reward is left at 0.0."""
    nxt, grid, _, _ = step_grid(st, cfg, action_index)
    out = StepOutcome(
        prev_grid=LevelGrid._trusted(st.grid.copy()),
        curr_grid=LevelGrid._trusted(grid.copy()),
        reward=0.0,
        done=nxt.done,
    )
    return nxt, out


class Policy(Protocol):
    def start(self, seed: int) -> object:
        """Per-episode policy state (e.g. an RNG)."""

    def act(self, st: EnvState, cfg: EnvConfig, feats: GridFeatures, ctx: object) -> int:
        ...


@dataclass
class Episode:
    terminal: LevelGrid
    rewards: list[float]
    initial: LevelGrid
    player_pos: Position
    door_pos: Position
    grids: list[np.ndarray] | None = None


def run_episode(
    cfg: EnvConfig,
    seed: int,
    policy: Policy,
    program: RewardProgram | None,
    *,
    policy_seed: int | None = None,
    keep_grids: bool = False,
    score: bool = True,
) -> Episode:
    """Roll one episode and score every transition with ``program``.

    With ``score=False`` no rewards are computed (the trace is empty); used
    when only terminal levels are wanted. Reward errors are re-raised with
    the failing step index attached.
    """
    st = reset(cfg, seed)
    initial = st.level
    fn = compiled(program) if program is not None else None
    feats = GridFeatures(st.grid)
    ctx = policy.start(derive_seed(seed, 1) if policy_seed is None else policy_seed)
    rewards: list[float] = []
    grids = [st.grid] if keep_grids else None
    while not st.done:
        a = policy.act(st, cfg, feats, ctx)
        nxt, grid, old, new = step_grid(st, cfg, a)
        nfeats = feats.edited(grid, old, new, st.cursor).detach()
        if score and fn is not None:
            try:
                rewards.append(fn(feats, nfeats))
            except RewardEvalError as e:
                e.step = st.step_index
                raise
        if grids is not None:
            grids.append(grid)
        st, feats = nxt, nfeats
    return Episode(
        terminal=st.level,
        rewards=rewards,
        initial=initial,
        player_pos=st.player_pos,
        door_pos=st.door_pos,
        grids=grids,
    )
