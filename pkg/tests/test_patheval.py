import numpy as np
import pytest

from dungeon_rewards.level import LevelGrid, Position, Tile, parse_text
from dungeon_rewards.patheval import (
    INSTRUCTIONS, Instruction, PathEvalError, accuracy, detect_encounters, find_path, fitness,
    load_instruction, score_level,
)
from oracles import oracle_encounters, relaxation_distances


def random_maze(rng, h, w, wall_p):
    cells = np.where(rng.random((h, w)) < wall_p, Tile.WALL, Tile.EMPTY).astype(np.uint8)
    return cells


def random_level(rng, h=10, w=10):
    """Random grid with exactly one player and one door, some keys and enemies."""
    probs = np.array([0.45, 0.3, 0, 0.06, 0.06, 0.06, 0.07, 0])
    cells = rng.choice(np.arange(1, 9), size=(h, w), p=probs / probs.sum()).astype(np.uint8)
    flat = rng.choice(h * w, size=2, replace=False)
    cells[np.unravel_index(flat[0], (h, w))] = Tile.PLAYER
    cells[np.unravel_index(flat[1], (h, w))] = Tile.DOOR
    return cells


def test_accuracy_worked_example():
    a = accuracy((True, False, False), (True, True, False))
    assert a == pytest.approx(2 / 3)
    assert f"{a:.2f}" == "0.67"
    assert accuracy((True, False, True), (True, False, True)) == 1.0
    assert accuracy((True, True, True), (False, False, False)) == 0.0
    with pytest.raises(PathEvalError):
        accuracy((True,), (True, False, False))


def test_instructions():
    assert INSTRUCTIONS[1].truth == (True, False, False)
    assert INSTRUCTIONS[2].truth == (True, False, True)
    assert load_instruction("2") == INSTRUCTIONS[2]
    assert Instruction.from_text("Scorpions guard the vault.").truth == (False, True, False)
    with pytest.raises(PathEvalError):
        load_instruction("7")


def test_instruction_from_file(tmp_path):
    f = tmp_path / "story.txt"
    f.write_text("A spider nest and a lone bat.\n")
    assert load_instruction(str(f)).truth == (True, False, True)


def test_find_path_basics():
    g = parse_text("P.#.......\n" + "..#.......\n" * 8 + "...D......\n")
    path = find_path(g, Position(0, 0), Position(9, 3))
    assert path[0] == Position(0, 0) and path[-1] == Position(9, 3)
    assert len(path) == 13
    for a, b in zip(path, path[1:]):
        assert abs(a.row - b.row) + abs(a.col - b.col) == 1
        assert g[b] != Tile.WALL
    walled = parse_text("P.#.......\n..#.......\n##........\n" + ".........D\n" * 7)
    assert find_path(walled, Position(0, 0), Position(9, 9)) is None
    assert find_path(g, Position(0, 0), Position(0, 0)) == [Position(0, 0)]


def test_find_path_tie_break_prefers_up_down_first():
    # from the center, both (dr, dc) orders reach the corner in 2 steps
    g = LevelGrid.filled(10, 10)
    path = find_path(g, Position(5, 5), Position(6, 6))
    assert path == [Position(5, 5), Position(6, 5), Position(6, 6)]


def test_bfs_lengths_match_relaxation_oracle():
    rng = np.random.default_rng(20240601)
    for _ in range(500):
        h, w = (int(x) for x in rng.integers(3, 13, size=2))
        cells = random_maze(rng, h, w, rng.uniform(0.1, 0.45))
        src = tuple(int(x) for x in rng.integers(0, (h, w)))
        dst = tuple(int(x) for x in rng.integers(0, (h, w)))
        cells[src] = cells[dst] = Tile.EMPTY
        d = relaxation_distances(cells, src)
        path = find_path(LevelGrid(cells), Position(*src), Position(*dst))
        if d[dst] < 0:
            assert path is None
        else:
            assert path is not None and len(path) - 1 == d[dst]


def test_three_key_fixture(fixtures):
    g = parse_text((fixtures / "three_keys.txt").read_text())
    rep = detect_encounters(g)
    assert rep.solution_count == 2
    keys = [k for k, _ in rep.trajectories]
    assert Position(1, 5) not in keys  # reachable only across another key
    assert set(keys) == {Position(1, 3), Position(5, 1)}
    for k, path in rep.trajectories:
        assert path[0] == Position(1, 1) and path[-1] == Position(8, 8)
        assert k in path
    # the spider sits next to the excluded route only
    assert rep.prediction == (True, False, False)


def test_requires_single_player_and_door():
    g = LevelGrid.filled(10, 10).with_cell(Position(0, 0), Tile.PLAYER)
    with pytest.raises(PathEvalError):
        detect_encounters(g)
    g2 = g.with_cell(Position(9, 9), Tile.DOOR).with_cell(Position(0, 9), Tile.DOOR)
    with pytest.raises(PathEvalError):
        detect_encounters(g2)


def test_no_keys_means_no_encounters():
    g = parse_text("P.B.......\n" + ".........." * 1 + "\n" + "..........\n" * 7 + ".........D\n")
    rep = detect_encounters(g)
    assert rep.solution_count == 0 and rep.prediction == (False, False, False)


def test_window_is_clipped_at_border():
    rows = ["P.K......."] + [".........."] * 8 + ["........BD"]
    rep = detect_encounters(parse_text("\n".join(rows) + "\n"))
    assert rep.prediction == (True, False, False)


def test_encounters_match_oracle_on_random_grids():
    rng = np.random.default_rng(7)
    checked = 0
    with_solutions = 0
    for _ in range(200):
        cells = random_level(rng)
        rep = detect_encounters(LevelGrid(cells))
        pred, n = oracle_encounters(cells)
        assert rep.prediction == pred
        assert rep.solution_count == n
        checked += 1
        with_solutions += n > 0
    assert checked == 200 and with_solutions >= 50


def test_fitness_is_mean_accuracy(fixtures):
    g = parse_text((fixtures / "three_keys.txt").read_text())
    empty = parse_text("P.........\n" + "..........\n" * 8 + ".........D\n")
    instr = INSTRUCTIONS[2]
    s = score_level(g, instr)
    assert s.accuracy == pytest.approx(2 / 3)
    assert fitness([g, empty], instr) == pytest.approx((2 / 3 + 1 / 3) / 2)
    with pytest.raises(PathEvalError):
        fitness([], instr)
