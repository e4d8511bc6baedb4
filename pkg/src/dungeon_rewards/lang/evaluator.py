"""Evaluation of parsed reward programs on (prev, curr) grid pairs.

Programs are compiled once into nested closures. A program whose node
count exceeds the budget is run through a counting interpreter instead, so
the budget is enforced exactly while the common case stays fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..level import NUM_TILE_IDS, LevelGrid
from .parser import Binary, If, Num, RewardProgram, Unary, Var


class RewardEvalError(RuntimeError):
    """Evaluation failure. ``step`` is filled in by episode runners."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.message = message
        self.step = step

    def __str__(self) -> str:
        if self.step is None:
            return self.message
        return f"{self.message} (at episode step {self.step})"


class BudgetExceeded(RewardEvalError):
    pass


@dataclass(frozen=True)
class EvalBudget:
    max_nodes: int = 100_000

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")


DEFAULT_BUDGET = EvalBudget()


class GridFeatures:
    """Per-grid tile counts and lazily computed tile positions.

    ``edited`` derives the features of a one-cell edit without recounting;
    positions and distances of tiles the edit does not touch are shared
    with the base grid.
    """

    __slots__ = ("cells", "counts", "height", "width", "_pos", "_dist", "_base", "_edit")

    def __init__(self, cells: np.ndarray, counts: list[int] | None = None):
        self.cells = cells
        self.height, self.width = cells.shape
        if counts is None:
            counts = np.bincount(cells.ravel(), minlength=NUM_TILE_IDS).tolist()
        self.counts = counts
        self._pos: dict[int, np.ndarray] = {}
        self._dist: dict[tuple[int, int], float] = {}
        self._base: GridFeatures | None = None
        self._edit: tuple[int, int, int, int] | None = None

    @classmethod
    def of(cls, grid) -> "GridFeatures":
        if isinstance(grid, GridFeatures):
            return grid
        if isinstance(grid, LevelGrid):
            return cls(grid.cells)
        return cls(np.asarray(grid, dtype=np.uint8))

    def edited(self, cells: np.ndarray, old: int, new: int, pos=None) -> "GridFeatures":
        """Features of ``cells``, which equal this grid except ``old -> new`` at ``pos``."""
        if old == new:
            f = GridFeatures(cells, self.counts)
            f._base = self
            return f
        counts = list(self.counts)
        counts[old] -= 1
        counts[new] += 1
        f = GridFeatures(cells, counts)
        if pos is not None:
            r, c = pos
            f._base = self
            f._edit = (int(r), int(c), old, new)
        return f

    def detach(self) -> "GridFeatures":
        """Pull the base grid's cached entries in and drop the link to it.

        Keeps chains of edits (one per episode step) from growing.
        """
        base = self._base
        if base is not None:
            for t in list(base._pos):
                self.positions(t)
            for a, b in list(base._dist):
                self.dist(a, b)
            self._base = None
            self._edit = None
        return self

    def positions(self, t: int) -> np.ndarray:
        pos = self._pos.get(t)
        if pos is None:
            base, edit = self._base, self._edit
            if base is not None and (edit is None or t not in (edit[2], edit[3])):
                pos = base.positions(t)
            elif base is not None:
                r, c, old, new = edit
                bp = base.positions(t)
                if t == old:
                    pos = bp[(bp[:, 0] != r) | (bp[:, 1] != c)]
                else:
                    pos = np.vstack([bp, np.array([[r, c]], dtype=np.float64)])
            else:
                pos = np.argwhere(self.cells == t).astype(np.float64)
            self._pos[t] = pos
        return pos

    def dist(self, a: int, b: int) -> float:
        key = (a, b)
        d = self._dist.get(key)
        if d is None:
            base, edit = self._base, self._edit
            if base is not None and (edit is None or not {a, b} & {edit[2], edit[3]}):
                d = base.dist(a, b)
            elif self.counts[a] == 0 or self.counts[b] == 0:
                d = float(self.height + self.width)
            else:
                pa, pb = self.positions(a), self.positions(b)
                diff = pa[:, None, :] - pb[None, :, :]
                d = float(np.sqrt((diff * diff).sum(axis=2).min()))
            self._dist[key] = d
        return d


# ----------------------------------------------------------- arithmetic


def _finite(x: float, op: str) -> float:
    if math.isfinite(x):
        return x
    raise RewardEvalError(f"non-finite result from {op!r}")


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise RewardEvalError("division by zero")
    return _finite(a / b, "/")


def _clamp(x: float, lo: float, hi: float) -> float:
    if lo > hi:
        raise RewardEvalError(f"clamp bounds reversed: lo={lo} > hi={hi}")
    return min(max(x, lo), hi)


_BINARY = {
    "+": lambda a, b: _finite(a + b, "+"),
    "-": lambda a, b: _finite(a - b, "-"),
    "*": lambda a, b: _finite(a * b, "*"),
    "/": _div,
    "==": lambda a, b: 1.0 if a == b else 0.0,
    "!=": lambda a, b: 1.0 if a != b else 0.0,
    "<": lambda a, b: 1.0 if a < b else 0.0,
    "<=": lambda a, b: 1.0 if a <= b else 0.0,
    ">": lambda a, b: 1.0 if a > b else 0.0,
    ">=": lambda a, b: 1.0 if a >= b else 0.0,
    "and": lambda a, b: 1.0 if (a != 0.0 and b != 0.0) else 0.0,
    "or": lambda a, b: 1.0 if (a != 0.0 or b != 0.0) else 0.0,
}

_PURE_CALLS = {
    "abs": abs,
    "min": min,
    "max": max,
    "clamp": _clamp,
}


# ---------------------------------------------------------- compilation


def _compile(e):
    # Each compiled node is fn(prev, curr, slots) -> float.
    if isinstance(e, Num):
        v = e.value
        return lambda p, c, s: v
    if isinstance(e, Var):
        i = e.slot
        return lambda p, c, s: s[i]
    if isinstance(e, Unary):
        f = _compile(e.operand)
        if e.op == "-":
            return lambda p, c, s: -f(p, c, s)
        return lambda p, c, s: 1.0 if f(p, c, s) == 0.0 else 0.0
    if isinstance(e, Binary):
        fl, fr, op = _compile(e.left), _compile(e.right), _BINARY[e.op]
        if e.op == "+":
            def add(p, c, s):
                x = fl(p, c, s) + fr(p, c, s)
                if x - x != 0.0:
                    raise RewardEvalError("non-finite result from '+'")
                return x
            return add
        if e.op == "*":
            def mul(p, c, s):
                x = fl(p, c, s) * fr(p, c, s)
                if x - x != 0.0:
                    raise RewardEvalError("non-finite result from '*'")
                return x
            return mul
        return lambda p, c, s: op(fl(p, c, s), fr(p, c, s))
    if isinstance(e, If):
        fc, ft, fe = _compile(e.cond), _compile(e.then), _compile(e.orelse)
        return lambda p, c, s: ft(p, c, s) if fc(p, c, s) != 0.0 else fe(p, c, s)
    # Call
    if e.name == "count":
        which, t = e.args[0], int(e.args[1])
        if which == "prev":
            return lambda p, c, s: float(p.counts[t])
        return lambda p, c, s: float(c.counts[t])
    if e.name == "dist":
        which, a, b = e.args[0], int(e.args[1]), int(e.args[2])
        if which == "prev":
            return lambda p, c, s: p.dist(a, b)
        return lambda p, c, s: c.dist(a, b)
    fn = _PURE_CALLS[e.name]
    fargs = [_compile(a) for a in e.args]
    if len(fargs) == 1:
        (f0,) = fargs
        return lambda p, c, s: fn(f0(p, c, s))
    if len(fargs) == 2:
        f0, f1 = fargs
        return lambda p, c, s: fn(f0(p, c, s), f1(p, c, s))
    f0, f1, f2 = fargs
    return lambda p, c, s: fn(f0(p, c, s), f1(p, c, s), f2(p, c, s))


class CompiledProgram:
    """A reward program ready for repeated evaluation on grid features."""

    def __init__(self, program: RewardProgram):
        self.program = program
        self._lets = [_compile(b.value) for b in program.lets]
        self._result = _compile(program.result)
        self._nslots = len(program.lets)

    def __call__(self, prev: GridFeatures, curr: GridFeatures) -> float:
        slots = [0.0] * self._nslots
        try:
            for i, f in enumerate(self._lets):
                slots[i] = f(prev, curr, slots)
            value = self._result(prev, curr, slots)
        except OverflowError:
            raise RewardEvalError("numeric overflow") from None
        if not math.isfinite(value):
            raise RewardEvalError("non-finite reward")
        return value


# ------------------------------------------------- counting interpreter


class _Counter:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n

    def tick(self):
        self.left -= 1
        if self.left < 0:
            raise BudgetExceeded("evaluation budget exceeded")


def _interp(e, p: GridFeatures, c: GridFeatures, slots: list, k: _Counter) -> float:
    k.tick()
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return slots[e.slot]
    if isinstance(e, Unary):
        v = _interp(e.operand, p, c, slots, k)
        if e.op == "-":
            return -v
        return 1.0 if v == 0.0 else 0.0
    if isinstance(e, Binary):
        a = _interp(e.left, p, c, slots, k)
        b = _interp(e.right, p, c, slots, k)
        return _BINARY[e.op](a, b)
    if isinstance(e, If):
        if _interp(e.cond, p, c, slots, k) != 0.0:
            return _interp(e.then, p, c, slots, k)
        return _interp(e.orelse, p, c, slots, k)
    if e.name == "count":
        g = p if e.args[0] == "prev" else c
        return float(g.counts[int(e.args[1])])
    if e.name == "dist":
        g = p if e.args[0] == "prev" else c
        return g.dist(int(e.args[1]), int(e.args[2]))
    return _PURE_CALLS[e.name](*(_interp(a, p, c, slots, k) for a in e.args))


def interpret(program: RewardProgram, prev, curr, budget: EvalBudget = DEFAULT_BUDGET) -> float:
    """Tree-walking evaluation that counts every node visited."""
    p, c = GridFeatures.of(prev), GridFeatures.of(curr)
    _check_shapes(p, c)
    k = _Counter(budget.max_nodes)
    slots: list[float] = []
    try:
        for b in program.lets:
            slots.append(_interp(b.value, p, c, slots, k))
        value = _interp(program.result, p, c, slots, k)
    except OverflowError:
        raise RewardEvalError("numeric overflow") from None
    if not math.isfinite(value):
        raise RewardEvalError("non-finite reward")
    return value


_CACHE_ATTR = "_compiled"


def compiled(program: RewardProgram) -> CompiledProgram:
    # RewardProgram is frozen; stash the compiled form on it once.
    cp = program.__dict__.get(_CACHE_ATTR)
    if cp is None:
        cp = CompiledProgram(program)
        object.__setattr__(program, _CACHE_ATTR, cp)
    return cp


def _check_shapes(p: GridFeatures, c: GridFeatures) -> None:
    if p.cells.shape != c.cells.shape:
        raise RewardEvalError(f"grid shapes differ: {p.cells.shape} vs {c.cells.shape}")


def evaluate(program: RewardProgram, prev, curr, budget: EvalBudget = DEFAULT_BUDGET) -> float:
    """Reward for the transition ``prev -> curr``.

    ``prev``/``curr`` may be :class:`LevelGrid`, arrays, or precomputed
    :class:`GridFeatures`. Raises :class:`RewardEvalError` on division by
    zero or a non-finite value and :class:`BudgetExceeded` when more than
    ``budget.max_nodes`` nodes would be evaluated.
    """
    if program.node_count > budget.max_nodes:
        return interpret(program, prev, curr, budget)
    p, c = GridFeatures.of(prev), GridFeatures.of(curr)
    _check_shapes(p, c)
    return compiled(program)(p, c)
