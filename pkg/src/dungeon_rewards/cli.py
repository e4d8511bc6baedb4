"""Command-line entry point: ``dungeon-rewards <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from .archive import SaturatedArchive
from .env import EnvConfig
from .lang.evaluator import RewardEvalError
from .lang.parser import RewardSyntaxError, parse
from .level import LevelError, parse_text, render_image, render_text
from .llm.backends import BackendError
from .orchestrator import ConfigError, OutputError, RunConfig, report, run
from .patheval import PathEvalError, load_instruction, score_level
from .policies import PolicyConfig, generate_batch

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_OUTPUT = 4

log = logging.getLogger("dungeon_rewards")


def demo_playbook() -> str:
    return str(resources.files("dungeon_rewards") / "data" / "playbooks" / "chain_demo.json")


def _build_run_config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(base, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
    strategy = dict(base.get("strategy") or {})
    if args.strategy:
        strategy["kind"] = args.strategy
    if args.breadth is not None:
        strategy["breadth"] = args.breadth
    if args.n_best is not None:
        strategy["n_best"] = args.n_best
    if args.n_worst is not None:
        strategy["n_worst"] = args.n_worst
    base["strategy"] = strategy
    for key, val in (
        ("instruction", args.instruction),
        ("n_feedback", args.n_feedback),
        ("n_align", args.n_align),
        ("eval_levels", args.eval_levels),
        ("seed", args.seed),
        ("out_dir", args.out),
    ):
        if val is not None:
            base[key] = val
    if args.fitness:
        base["fitness_mode"] = {"heuristic": "heuristic", "llm": "llm_self_eval"}[args.fitness]
    if args.feedback:
        base["feedback_variant"] = args.feedback
    policy = dict(base.get("policy") or {})
    if args.policy:
        policy["kind"] = args.policy
    if args.epsilon is not None:
        policy["epsilon"] = args.epsilon
    base["policy"] = policy
    backend = dict(base.get("backend") or {})
    if args.backend:
        backend["kind"] = {"http": "http_chat", "mock": "scripted"}[args.backend]
    if args.playbook:
        backend["script_path"] = args.playbook
    if args.model:
        backend["model"] = args.model
    if args.endpoint:
        backend["endpoint"] = args.endpoint
    backend.setdefault("kind", "scripted")
    if backend["kind"] in ("scripted", "mock") and not backend.get("script_path"):
        backend["script_path"] = demo_playbook()
    base["backend"] = backend
    return RunConfig.from_dict(base)


def cmd_run(args) -> int:
    try:
        cfg = _build_run_config(args)
        summary = run(cfg, force=args.force)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as e:
        print(f"backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    except OutputError as e:
        print(f"output error: {e}", file=sys.stderr)
        return EXIT_OUTPUT
    except SaturatedArchive as e:
        print(f"run halted: {e}", file=sys.stderr)
        return EXIT_FAILURE
    print(report(summary.out_dir).table(), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rep = report(args.run_dir)
    except (OutputError, ValueError, KeyError) as e:
        print(f"report error: {e}", file=sys.stderr)
        return EXIT_OUTPUT
    print(rep.table(), end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        instr = load_instruction(args.instruction)
    except PathEvalError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    files = sorted(Path(args.levels).glob("*.txt"), key=lambda p: (len(p.stem), p.stem))
    if not files:
        print(f"no level files (*.txt) in {args.levels}", file=sys.stderr)
        return EXIT_CONFIG
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("level", "acc", "bat", "scorpion", "spider", "solutions"))
    total = 0.0
    for f in files:
        try:
            g = parse_text(f.read_text(encoding="utf-8"))
            s = score_level(g, instr)
        except (LevelError, PathEvalError) as e:
            print(f"{f}: {e}", file=sys.stderr)
            return EXIT_FAILURE
        total += s.accuracy
        p = s.report.prediction
        w.writerow((f.stem, f"{s.accuracy:.6f}", int(p[0]), int(p[1]), int(p[2]), s.report.solution_count))
    w.writerow(("mean", f"{total / len(files):.6f}", "", "", "", ""))
    return EXIT_OK


def cmd_env_play(args) -> int:
    try:
        program = parse(Path(args.reward).read_text(encoding="utf-8"))
        env = EnvConfig(height=args.height, width=args.width, spawn_mode=args.spawn)
        policy = PolicyConfig(args.policy, args.epsilon).build(program)
    except RewardSyntaxError as e:
        print(f"{args.reward}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        levels = generate_batch(env, program, policy, args.n, args.seed)
    except RewardEvalError as e:
        print(f"reward evaluation failed: {e}", file=sys.stderr)
        return EXIT_FAILURE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i, g in enumerate(levels):
            (out / f"{i}.txt").write_text(render_text(g), encoding="utf-8")
            (out / f"{i}.png").write_bytes(render_image(g, args.cell_px))
    except OSError as e:
        print(f"output error: {e}", file=sys.stderr)
        return EXIT_OUTPUT
    print(f"wrote {len(levels)} levels to {out}")
    return EXIT_OK


def cmd_dsl_check(args) -> int:
    try:
        source = Path(args.file).read_text(encoding="utf-8")
    except OSError as e:
        print(f"{args.file}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        program = parse(source)
    except RewardSyntaxError as e:
        print(f"{args.file}:{e.line}:{e.col}: {e.kind} error: {e.message}", file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(program.dump())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dungeon-rewards",
        description="Iterative reward-program refinement for dungeon level generation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the refinement loop")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--strategy", choices=["cot", "tot", "got"])
    p.add_argument("--instruction", help="built-in instruction id (1, 2) or a story text file")
    p.add_argument("--n-feedback", type=int)
    p.add_argument("--n-align", type=int)
    p.add_argument("--breadth", type=int)
    p.add_argument("--n-best", type=int)
    p.add_argument("--n-worst", type=int)
    p.add_argument("--eval-levels", type=int)
    p.add_argument("--fitness", choices=["heuristic", "llm"])
    p.add_argument("--feedback", choices=["specific", "generic", "none"])
    p.add_argument("--backend", choices=["http", "mock"])
    p.add_argument("--playbook", help="scripted replies for --backend mock")
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--policy", choices=["random", "greedy"])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="run directory")
    p.add_argument("--force", action="store_true", help="write into a non-empty run directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a finished run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("eval", help="score level files against an instruction")
    p.add_argument("--instruction", required=True)
    p.add_argument("--levels", required=True, help="directory of level .txt files")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("env-play", help="generate levels with a policy and a reward file")
    p.add_argument("--policy", choices=["random", "greedy"], default="greedy")
    p.add_argument("--reward", required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--spawn", choices=["edges", "corners"], default="edges")
    p.add_argument("--cell-px", type=int, default=16)
    p.set_defaults(func=cmd_env_play)

    p = sub.add_parser("dsl-check", help="parse a reward program and print its normalized form")
    p.add_argument("file")
    p.set_defaults(func=cmd_dsl_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
