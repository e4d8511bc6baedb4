import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))

FIXTURES = TESTS / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def demo_config(out_dir, **overrides):
    from dungeon_rewards.cli import demo_playbook
    from dungeon_rewards.orchestrator import RunConfig

    base = {
        "strategy": {"kind": "chain"},
        "n_feedback": 6,
        "n_align": 5,
        "eval_levels": 30,
        "policy": {"kind": "greedy", "epsilon": 0.0},
        "backend": {"kind": "scripted", "script_path": demo_playbook()},
        "seed": 7,
        "out_dir": str(out_dir),
    }
    base.update(overrides)
    return RunConfig.from_dict(base)


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory):
    """Two back-to-back runs of the bundled scripted demo: (summaries, seconds)."""
    import time

    from dungeon_rewards.orchestrator import run

    summaries, seconds = [], []
    for i in range(2):
        t0 = time.perf_counter()
        summaries.append(run(demo_config(tmp_path_factory.mktemp(f"demo{i}"))))
        seconds.append(time.perf_counter() - t0)
    return summaries, seconds


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
