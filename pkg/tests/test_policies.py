from dataclasses import replace

import numpy as np
import pytest

from dungeon_rewards.env import DEFAULT_ACTION_TILES, EnvConfig, reset, run_episode
from dungeon_rewards.lang import parse
from dungeon_rewards.level import Position, Tile
from dungeon_rewards.policies import (
    GreedyPolicy, PolicyConfig, RandomPolicy, act_greedy, act_random, generate_batch,
)
from dungeon_rewards.seeding import derive_seed

MONOTONE = [f"return count(curr, {t});" for t in ("EMPTY", "WALL", "BAT", "SCORPION", "SPIDER")]


def episode_return(cfg, program, policy, seed):
    return sum(run_episode(cfg, seed, policy, program).rewards)


def test_random_action_frequencies():
    rng = np.random.default_rng(0)
    n, k = 20_000, 5
    counts = np.bincount([act_random(k, rng) for _ in range(n)], minlength=k)
    sigma = np.sqrt(n * (1 / k) * (1 - 1 / k))
    assert np.all(np.abs(counts - n / k) < 3 * sigma)


def test_greedy_examples():
    cfg = EnvConfig(height=10, width=10)
    st = replace(reset(cfg, 0), cursor=Position(5, 5))
    assert not st.cursor_protected
    assert act_greedy(st, cfg, parse("return count(curr, WALL);")) == DEFAULT_ACTION_TILES.index(Tile.WALL)
    assert act_greedy(st, cfg, parse("return count(curr, SPIDER);")) == DEFAULT_ACTION_TILES.index(Tile.SPIDER)
    assert act_greedy(st, cfg, parse("return 0;")) == 0  # ties go to the lowest index
    assert act_greedy(st, cfg, parse("return -count(curr, EMPTY);")) == 1


def test_greedy_is_noop_on_protected_cell():
    cfg = EnvConfig(height=10, width=10, spawn_mode="corners")
    st0 = reset(cfg, 0)
    for pos in (st0.player_pos, st0.door_pos, Position(1, 1), Position(8, 8)):
        st = replace(st0, cursor=pos)
        if st.cursor_protected:
            assert act_greedy(st, cfg, parse("return count(curr, WALL);")) == 0
    st = replace(st0, cursor=st0.player_pos)
    assert act_greedy(st, cfg, parse("return count(curr, WALL);")) == 0


def test_all_wall_program():
    cfg = EnvConfig()
    program = parse("return count(curr, WALL);")
    for seed in range(3):
        ep = run_episode(cfg, seed, GreedyPolicy(program, epsilon=0.0), program)
        st = reset(cfg, seed)
        cells = ep.terminal.cells
        assert (cells[~st.protected] == Tile.WALL).all()
        assert np.array_equal(cells[st.protected], st.grid[st.protected])


def test_greedy_beats_random_on_monotone_programs():
    cfg = EnvConfig()
    for src in MONOTONE:
        program = parse(src)
        seeds = range(20)
        greedy = np.mean([episode_return(cfg, program, GreedyPolicy(program, 0.0), s) for s in seeds])
        rand = np.mean([episode_return(cfg, program, RandomPolicy(), s) for s in seeds])
        assert greedy >= rand, src


def test_greedy_is_deterministic():
    cfg = EnvConfig(height=12, width=12)
    program = parse("return 5 * (dist(curr, PLAYER, BAT) <= 2) - count(curr, SCORPION);")
    pol = GreedyPolicy(program, 0.0)
    a = generate_batch(cfg, program, pol, 3, seed=9)
    b = generate_batch(cfg, program, pol, 3, seed=9)
    assert a == b


def test_batch_episodes_are_independent():
    cfg = EnvConfig(height=10, width=10)
    program = parse("return count(curr, BAT);")
    pol = GreedyPolicy(program, 0.3)
    full = generate_batch(cfg, program, pol, 4, seed=2)
    one = run_episode(cfg, derive_seed(2, 3, 0), pol, program, policy_seed=derive_seed(2, 3, 1))
    assert full[3] == one.terminal
    assert len(set(full)) == 4


def test_policy_config():
    program = parse("return 0;")
    assert isinstance(PolicyConfig("random").build(), RandomPolicy)
    assert PolicyConfig("greedy", 0.1).build(program).epsilon == 0.1
    with pytest.raises(ValueError):
        PolicyConfig("ppo")
    with pytest.raises(ValueError):
        PolicyConfig("greedy", 1.5)
    with pytest.raises(ValueError):
        PolicyConfig("greedy").build(None)
