"""The refinement loop: refine -> self-align -> generate -> score -> feedback.

Run directory layout::

    config.snapshot  archive.index  archive/  metrics.csv
    iter_<y>/reward.rwd  reward_aligned_<z>.rwd  stats_<z>.txt
    iter_<y>/levels/<i>.txt|.png  feedback.txt  record.json
    iter_<y>/<role>_<n>.request.txt|.response.txt
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .archive import Archive, StrategyConfig, ThoughtNode
from .env import EnvConfig
from .lang.evaluator import RewardEvalError
from .lang.stats import collect_stats
from .level import render_image, render_text
from .llm.backends import BackendConfig, BackendError, ChatBackend, make_backend
from .llm.bridge import FEEDBACK_VARIANTS, GenerationError, LLMBridge, PromptBundle, RefineContext, Transcript
from .patheval import PathEvalError, fitness as heuristic_fitness, load_instruction
from .policies import PolicyConfig, generate_batch
from .seeding import derive_seed

log = logging.getLogger(__name__)

FITNESS_MODES = ("heuristic", "llm_self_eval")
METRICS_HEADER = ("y", "node_id", "fitness", "best_fitness_so_far")

# seed-derivation tags
_ALIGN_TAG = 1
_LEVELS_TAG = 2


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


@dataclass(frozen=True)
class RunConfig:
    instruction: str = "1"
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    n_feedback: int = 6
    n_align: int = 5
    eval_levels: int = 30
    fitness_mode: str = "heuristic"
    feedback_variant: str = "specific"
    env: EnvConfig = field(default_factory=EnvConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    backend: BackendConfig | None = None
    seed: int = 0
    out_dir: str = "runs/latest"
    align_episodes: int = 1
    feedback_levels: int = 5
    cell_px: int = 16
    write_png: bool = True
    prompt_dir: str | None = None

    def __post_init__(self):
        if self.n_feedback < 1:
            raise ConfigError("n_feedback must be >= 1")
        if self.n_align < 0:
            raise ConfigError("n_align must be >= 0")
        if self.eval_levels < 1:
            raise ConfigError("eval_levels must be >= 1")
        if self.align_episodes < 1:
            raise ConfigError("align_episodes must be >= 1")
        if self.fitness_mode not in FITNESS_MODES:
            raise ConfigError(f"fitness_mode must be one of {FITNESS_MODES}")
        if self.feedback_variant not in FEEDBACK_VARIANTS:
            raise ConfigError(f"feedback_variant must be one of {FEEDBACK_VARIANTS}")
        if self.backend is None:
            raise ConfigError("a backend configuration is required")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["strategy"] = asdict(self.strategy)
        d["env"] = self.env.to_dict()
        d["policy"] = asdict(self.policy)
        d["backend"] = asdict(self.backend)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if isinstance(d.get("strategy"), dict):
                d["strategy"] = StrategyConfig(**d["strategy"])
            if isinstance(d.get("env"), dict):
                d["env"] = EnvConfig.from_dict(d["env"])
            if isinstance(d.get("policy"), dict):
                d["policy"] = PolicyConfig(**d["policy"])
            if isinstance(d.get("backend"), dict):
                d["backend"] = BackendConfig(**d["backend"])
            if "instruction" in d:
                d["instruction"] = str(d["instruction"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(data)


@dataclass
class IterationRecord:
    iteration: int
    node_id: int
    parent_id: int | None
    reward_path: str | None
    alignment: list[dict]
    level_paths: list[str]
    fitness: float
    feedback_path: str | None
    duration_s: float
    error: str | None = None


@dataclass
class RunSummary:
    out_dir: Path
    fitness: list[float]
    records: list[IterationRecord]
    archive: Archive

    @property
    def best_fitness(self) -> float:
        return max(self.fitness)


def _write(path: Path, text: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text, encoding="utf-8")


def metrics_csv(rows: list[tuple[int, int, float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for y, nid, f, best in rows:
        w.writerow([y, nid, f"{f:.6f}", f"{best:.6f}"])
    return buf.getvalue()


def _prepare_out_dir(out: Path, force: bool) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        if any(out.iterdir()) and not force:
            raise OutputError(f"output directory {out} is not empty (use --force to reuse it)")
        probe = out / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OutputError:
        raise
    except OSError as e:
        raise OutputError(f"output directory {out} is not writable: {e}") from None


def run(cfg: RunConfig, backend: ChatBackend | None = None, *, force: bool = False) -> RunSummary:
    """Execute ``cfg.n_feedback`` refinement iterations and persist everything.

    A failed iteration (unparseable replies, reward evaluation errors, an
    unreadable self-evaluation score) is committed with fitness 0 and a
    diagnostic as its feedback; the run continues. Backend failures abort.
    """
    try:
        instruction = load_instruction(cfg.instruction)
    except PathEvalError as e:
        raise ConfigError(str(e)) from None
    if backend is None:
        try:
            backend = make_backend(cfg.backend)
        except (OSError, ValueError, KeyError, BackendError) as e:
            raise ConfigError(f"cannot set up backend: {e}") from None
    out = Path(cfg.out_dir)
    _prepare_out_dir(out, force)
    _write(out / "config.snapshot", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    prompts = PromptBundle.load(cfg.prompt_dir) if cfg.prompt_dir else PromptBundle.load()
    bridge = LLMBridge(backend, prompts, Transcript(out), feedback_levels=cfg.feedback_levels)
    archive = Archive(cfg.strategy)
    rows: list[tuple[int, int, float, float]] = []
    records: list[IterationRecord] = []
    best = 0.0

    for y in range(1, cfg.n_feedback + 1):
        t0 = time.perf_counter()
        it_dir = out / f"iter_{y}"
        it_dir.mkdir(parents=True, exist_ok=True)
        parent = archive.select_parent()
        aux = archive.retrieve_auxiliary(parent)
        ctx = RefineContext(
            instruction=instruction,
            current_iter=y,
            max_iter=cfg.n_feedback,
            parent_reward=parent.reward_source if parent else None,
            parent_feedback=parent.feedback if parent else None,
            parent_fitness=parent.fitness if parent else None,
            aux=[(n.reward_source, n.fitness) for n in aux],
            show_fitness=cfg.strategy.kind == "graph",
        )
        source = ""
        reward_path = None
        alignment: list[dict] = []
        level_paths: list[str] = []
        feedback_path = None
        error = None
        try:
            source, program = bridge.generate_reward(ctx)
            _write(it_dir / "reward.rwd", source)
            reward_path = f"iter_{y}/reward.rwd"
            for z in range(1, cfg.n_align + 1):
                stats = collect_stats(program, cfg.env, derive_seed(cfg.seed, y, _ALIGN_TAG, z),
                                      cfg.align_episodes)
                _write(it_dir / f"stats_{z}.txt", stats.report())
                source, program = bridge.align_reward(source, stats, y)
                _write(it_dir / f"reward_aligned_{z}.rwd", source)
                alignment.append({"stats": f"iter_{y}/stats_{z}.txt",
                                  "reward": f"iter_{y}/reward_aligned_{z}.rwd"})
            policy = cfg.policy.build(program)
            levels = generate_batch(cfg.env, program, policy, cfg.eval_levels,
                                    derive_seed(cfg.seed, y, _LEVELS_TAG))
            for i, g in enumerate(levels):
                _write(it_dir / "levels" / f"{i}.txt", render_text(g))
                if cfg.write_png:
                    _write(it_dir / "levels" / f"{i}.png", render_image(g, cfg.cell_px))
                level_paths.append(f"iter_{y}/levels/{i}.txt")
            if cfg.fitness_mode == "heuristic":
                fit = heuristic_fitness(levels, instruction)
            else:
                fit = bridge.self_evaluate_fitness(levels, instruction, y)
            feedback = bridge.generate_feedback(source, levels, cfg.feedback_variant, instruction, y)
        except (GenerationError, RewardEvalError, PathEvalError) as e:
            error = f"{type(e).__name__}: {e}"
            log.warning("iteration %d failed: %s", y, error)
            fit = 0.0
            feedback = (
                f"Iteration {y} failed and scored 0: {error}\n"
                "Fix this problem before anything else."
            )
        if feedback is not None:
            _write(it_dir / "feedback.txt", feedback)
            feedback_path = f"iter_{y}/feedback.txt"

        node = ThoughtNode(
            iteration=y,
            reward_source=source,
            parent_id=parent.id if parent else None,
            feedback=feedback,
            fitness=fit,
        )
        node_id = archive.commit(node)
        archive.save(out)
        best = max(best, fit)
        rows.append((y, node_id, fit, best))
        _write(out / "metrics.csv", metrics_csv(rows))
        rec = IterationRecord(
            iteration=y,
            node_id=node_id,
            parent_id=node.parent_id,
            reward_path=reward_path,
            alignment=alignment,
            level_paths=level_paths,
            fitness=fit,
            feedback_path=feedback_path,
            duration_s=round(time.perf_counter() - t0, 3),
            error=error,
        )
        _write(it_dir / "record.json", json.dumps(asdict(rec), indent=2) + "\n")
        records.append(rec)
        log.info("iteration %d: node %d fitness %.3f (best %.3f)", y, node_id, fit, best)

    return RunSummary(out, [r[2] for r in rows], records, archive)


@dataclass(frozen=True)
class Report:
    rows: list[tuple[int, int, float, float]]
    initial: float
    best: float
    best_iteration: int
    last: float

    def table(self) -> str:
        lines = [f"{'y':>3} {'node':>5} {'fitness':>9} {'best':>9}"]
        for y, nid, f, b in self.rows:
            lines.append(f"{y:>3} {nid:>5} {f:>9.3f} {b:>9.3f}")
        lines.append(
            f"initial {self.initial:.3f}  best {self.best:.3f} (y={self.best_iteration})  last {self.last:.3f}"
        )
        return "\n".join(lines) + "\n"


def report(run_dir) -> Report:
    """Summarize ``metrics.csv`` and (re)write ``summary.csv`` in the run directory."""
    run_dir = Path(run_dir)
    path = run_dir / "metrics.csv"
    if not path.is_file():
        raise OutputError(f"no metrics.csv in {run_dir}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [(int(r["y"]), int(r["node_id"]), float(r["fitness"]), float(r["best_fitness_so_far"]))
                for r in reader]
    if not rows:
        raise OutputError(f"{path} has no iterations")
    fits = [r[2] for r in rows]
    best = max(fits)
    rep = Report(rows, fits[0], best, rows[fits.index(best)][0], fits[-1])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "value"))
    for k, v in (("initial", rep.initial), ("best", rep.best), ("last", rep.last)):
        w.writerow((k, f"{v:.6f}"))
    w.writerow(("best_iteration", rep.best_iteration))
    w.writerow(("iterations", len(rows)))
    _write(run_dir / "summary.csv", buf.getvalue())
    return rep

