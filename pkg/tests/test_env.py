import numpy as np
import pytest

from dungeon_rewards.env import (
    DEFAULT_ACTION_TILES, EnvConfig, EnvError, protection_mask, reset, run_episode, step,
)
from dungeon_rewards.lang import parse
from dungeon_rewards.level import Position, Tile
from dungeon_rewards.policies import RandomPolicy
from oracles import validate_sequence


def chebyshev(a, b):
    return max(abs(a.row - b.row), abs(a.col - b.col))


def on_border(p, h, w):
    return p.row in (0, h - 1) or p.col in (0, w - 1)


def test_reset_is_deterministic():
    cfg = EnvConfig()
    a, b = reset(cfg, 11), reset(cfg, 11)
    assert np.array_equal(a.grid, b.grid)
    assert (a.player_pos, a.door_pos) == (b.player_pos, b.door_pos)
    assert not np.array_equal(a.grid, reset(cfg, 12).grid)


@pytest.mark.parametrize("seed", range(40))
def test_edges_spawn(seed):
    cfg = EnvConfig(height=12, width=17)
    st = reset(cfg, seed)
    assert on_border(st.player_pos, 12, 17) and on_border(st.door_pos, 12, 17)
    assert chebyshev(st.player_pos, st.door_pos) >= 4
    assert int((st.grid == Tile.PLAYER).sum()) == 1
    assert int((st.grid == Tile.DOOR).sum()) == 1


@pytest.mark.parametrize("seed", range(20))
def test_corner_spawn(seed):
    cfg = EnvConfig(spawn_mode="corners")
    st = reset(cfg, seed)
    corners = {(0, 0), (0, 15), (15, 0), (15, 15)}
    p, d = tuple(st.player_pos), tuple(st.door_pos)
    assert p in corners and d in corners
    assert p[0] != d[0] and p[1] != d[1]


def test_protection_mask_clips():
    m = protection_mask((10, 10), Position(0, 0), Position(5, 5))
    assert m.sum() == 4 + 9
    assert m[:2, :2].all() and m[4:7, 4:7].all()


def test_cursor_scans_row_major_and_wraps():
    cfg = EnvConfig(height=10, width=10, scans_per_episode=2)
    st = reset(cfg, 0)
    seen = []
    while not st.done:
        seen.append(tuple(st.cursor))
        st, out = step(st, cfg, 0)
    assert len(seen) == 200
    assert seen[:100] == [(r, c) for r in range(10) for c in range(10)]
    assert seen[100:] == seen[:100]
    with pytest.raises(EnvError):
        step(st, cfg, 0)


def test_step_edits_only_unprotected_cells():
    cfg = EnvConfig(height=10, width=10)
    st = reset(cfg, 3)
    wall = DEFAULT_ACTION_TILES.index(Tile.WALL)
    while not st.done:
        r, c = st.cursor
        before = int(st.grid[r, c])
        prot = st.cursor_protected
        st, out = step(st, cfg, wall)
        after = int(out.curr_grid.cells[r, c])
        assert after == (before if prot else Tile.WALL)
        assert out.reward == 0.0
    with pytest.raises(EnvError):
        step(reset(cfg, 3), cfg, 99)


def test_config_validation():
    with pytest.raises(EnvError):
        EnvConfig(height=9)
    with pytest.raises(EnvError):
        EnvConfig(width=21)
    with pytest.raises(EnvError):
        EnvConfig(spawn_mode="middle")
    with pytest.raises(EnvError):
        EnvConfig(scans_per_episode=0)
    cfg = EnvConfig(height=12, width=14)
    assert EnvConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.episode_length == 3 * 12 * 14


def test_random_episode_invariants():
    cfg = EnvConfig()
    program = parse("return count(curr, WALL) - count(prev, WALL);")
    for seed in range(5):
        ep = run_episode(cfg, seed, RandomPolicy(), program, keep_grids=True)
        assert len(ep.rewards) == 768
        assert set(ep.rewards) <= {-1.0, 0.0, 1.0}
        st = reset(cfg, seed)
        validate_sequence(ep.grids, st.protected)
        assert np.array_equal(ep.grids[-1], ep.terminal.cells)


def test_episode_is_deterministic():
    cfg = EnvConfig(height=10, width=13)
    a = run_episode(cfg, 5, RandomPolicy(), None)
    b = run_episode(cfg, 5, RandomPolicy(), None)
    assert a.terminal == b.terminal and a.initial == b.initial
    assert a.rewards == []
