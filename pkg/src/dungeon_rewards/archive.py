"""Archive of reward-refinement iterations and parent selection.

``chain`` always extends the newest node. ``tree`` and ``graph`` extend the
fittest node that still has room for children (ties go to the newest);
``graph`` additionally hands the best (and optionally worst) other nodes
to the refinement prompt as comparison material.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

STRATEGIES = ("chain", "tree", "graph")
STRATEGY_ALIASES = {"cot": "chain", "tot": "tree", "got": "graph"}


class ArchiveError(RuntimeError):
    pass


class SaturatedArchive(ArchiveError):
    """Every scored node already has ``breadth`` children."""


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "chain"
    breadth: int = 2
    n_best: int = 2
    n_worst: int = 0

    def __post_init__(self):
        kind = STRATEGY_ALIASES.get(self.kind, self.kind)
        if kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        object.__setattr__(self, "kind", kind)
        if kind == "chain":
            object.__setattr__(self, "breadth", 1)
        if self.breadth < 1:
            raise ValueError("breadth must be >= 1")
        if self.n_best < 0 or self.n_worst < 0:
            raise ValueError("n_best and n_worst must be >= 0")


@dataclass
class ThoughtNode:
    iteration: int
    reward_source: str
    parent_id: int | None = None
    feedback: str | None = None
    fitness: float | None = None
    id: int = -1
    created_seq: int = -1

    def __post_init__(self):
        if self.fitness is not None and not 0.0 <= self.fitness <= 1.0:
            raise ArchiveError(f"fitness {self.fitness} outside [0, 1]")
        if self.iteration < 1:
            raise ArchiveError("iteration must be >= 1")


@dataclass
class Archive:
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    nodes: dict[int, ThoughtNode] = field(default_factory=dict)
    children: dict[int, int] = field(default_factory=dict)
    _next_seq: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def __getitem__(self, node_id: int) -> ThoughtNode:
        return self.nodes[node_id]

    def child_count(self, node_id: int) -> int:
        return self.children.get(node_id, 0)

    def commit(self, node: ThoughtNode) -> int:
        """Append ``node``, assigning its id and sequence number."""
        if node.parent_id is None:
            if node.iteration != 1 and self.nodes:
                raise ArchiveError("only first-iteration nodes may be roots")
        else:
            if node.parent_id not in self.nodes:
                raise ArchiveError(f"unknown parent {node.parent_id}")
            if self.child_count(node.parent_id) >= self.strategy.breadth:
                raise ArchiveError(
                    f"node {node.parent_id} already has {self.strategy.breadth} children"
                )
        node.id = self._next_seq
        node.created_seq = self._next_seq
        self._next_seq += 1
        self.nodes[node.id] = node
        if node.parent_id is not None:
            self.children[node.parent_id] = self.child_count(node.parent_id) + 1
        return node.id

    def select_parent(self) -> ThoughtNode | None:
        if not self.nodes:
            return None
        if self.strategy.kind == "chain":
            return max(self.nodes.values(), key=lambda n: n.created_seq)
        eligible = [
            n for n in self.nodes.values()
            if n.fitness is not None and self.child_count(n.id) < self.strategy.breadth
        ]
        if not eligible:
            raise SaturatedArchive(
                f"all {len(self.nodes)} scored nodes have {self.strategy.breadth} children"
            )
        return max(eligible, key=lambda n: (n.fitness, n.created_seq))

    def retrieve_auxiliary(self, parent: ThoughtNode | None) -> list[ThoughtNode]:
        """Best ``n_best`` then worst ``n_worst`` scored nodes other than ``parent``."""
        if self.strategy.kind != "graph":
            return []
        pid = parent.id if parent is not None else None
        pool = [n for n in self.nodes.values() if n.fitness is not None and n.id != pid]
        best = sorted(pool, key=lambda n: (n.fitness, n.created_seq), reverse=True)
        picked = best[: self.strategy.n_best]
        taken = {n.id for n in picked}
        n_worst = 0
        for n in sorted(pool, key=lambda n: (n.fitness, -n.created_seq)):
            if n_worst >= self.strategy.n_worst:
                break
            if n.id not in taken:
                picked.append(n)
                taken.add(n.id)
                n_worst += 1
        return picked

    # persistence

    def save(self, directory) -> Path:
        """Write ``archive.index`` (JSON lines) plus per-node body files."""
        directory = Path(directory)
        body_dir = directory / "archive"
        body_dir.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps({"strategy": asdict(self.strategy)}, sort_keys=True)]
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            reward_path = f"archive/node_{n.id}.rwd"
            (directory / reward_path).write_text(n.reward_source, encoding="utf-8")
            feedback_path = None
            if n.feedback is not None:
                feedback_path = f"archive/node_{n.id}.feedback.txt"
                (directory / feedback_path).write_text(n.feedback, encoding="utf-8")
            lines.append(json.dumps({
                "id": n.id,
                "iteration": n.iteration,
                "parent_id": n.parent_id,
                "fitness": n.fitness,
                "created_seq": n.created_seq,
                "reward_path": reward_path,
                "feedback_path": feedback_path,
            }, sort_keys=True))
        index = directory / "archive.index"
        index.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return index

    @classmethod
    def load(cls, directory) -> "Archive":
        directory = Path(directory)
        lines = (directory / "archive.index").read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ArchiveError("empty archive index")
        header = json.loads(lines[0])
        arch = cls(StrategyConfig(**header["strategy"]))
        for line in lines[1:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            node = ThoughtNode(
                iteration=rec["iteration"],
                reward_source=(directory / rec["reward_path"]).read_text(encoding="utf-8"),
                parent_id=rec["parent_id"],
                feedback=(directory / rec["feedback_path"]).read_text(encoding="utf-8")
                if rec["feedback_path"] else None,
                fitness=rec["fitness"],
                id=rec["id"],
                created_seq=rec["created_seq"],
            )
            arch.nodes[node.id] = node
            if node.parent_id is not None:
                arch.children[node.parent_id] = arch.child_count(node.parent_id) + 1
            arch._next_seq = max(arch._next_seq, node.created_seq + 1)
        return arch
