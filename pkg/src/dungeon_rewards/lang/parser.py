"""Lexer, recursive-descent parser and static checks for reward programs.

Grammar::

    program   := let_stmt* return_stmt
    let_stmt  := "let" IDENT "=" expr ";"
    return_stmt := "return" expr ";"
    expr      := or
    or        := and ("or" and)*
    and       := not ("and" not)*
    not       := "not" not | cmp
    cmp       := add (("==" | "!=" | "<" | "<=" | ">" | ">=") add)*
    add       := mul (("+" | "-") mul)*
    mul       := unary (("*" | "/") unary)*
    unary     := "-" unary | primary
    primary   := NUMBER | IDENT | "(" expr ")"
               | "if" "(" expr "," expr "," expr ")"
               | "count" "(" GRID "," TILE ")"
               | "dist" "(" GRID "," TILE "," TILE ")"
               | "abs" "(" expr ")" | "min" "(" expr "," expr ")"
               | "max" "(" expr "," expr ")"
               | "clamp" "(" expr "," expr "," expr ")"
    GRID      := "prev" | "curr"
    TILE      := EMPTY | WALL | PLAYER | BAT | SCORPION | SPIDER | KEY | DOOR

``#`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from ..level import Tile

GRIDS = ("prev", "curr")
TILE_NAMES = {t.name: t for t in Tile}
KEYWORDS = {"let", "return", "if", "and", "or", "not"}

# name -> argument kinds; "e" = expression, "g" = grid, "t" = tile
BUILTINS: dict[str, str] = {
    "count": "gt",
    "dist": "gtt",
    "abs": "e",
    "min": "ee",
    "max": "ee",
    "clamp": "eee",
}
RESERVED = KEYWORDS | set(GRIDS) | set(TILE_NAMES) | set(BUILTINS)


class RewardSyntaxError(ValueError):
    """Parse-time diagnostic. ``kind`` is one of lexical, syntax, unbound,
    arity, duplicate."""

    def __init__(self, kind: str, message: str, line: int, col: int):
        super().__init__(f"{kind} error at line {line}, column {col}: {message}")
        self.kind = kind
        self.message = message
        self.line = line
        self.col = col


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    slot: int
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    # grid/tile arguments are stored as plain str / Tile
    args: tuple
    span: tuple[int, int] = field(default=(0, 0), compare=False)


Expr = Union[Num, Var, Unary, Binary, If, Call]


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class RewardProgram:
    source: str
    lets: tuple[Let, ...]
    result: Expr
    node_count: int

    def dump(self) -> str:
        """Normalized s-expression form, one statement per line."""
        out = [f"(let {b.name} {_dump(b.value)})" for b in self.lets]
        out.append(f"(return {_dump(self.result)})")
        return "\n".join(out) + "\n"


def _dump(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"({e.op} {_dump(e.operand)})"
    if isinstance(e, Binary):
        return f"({e.op} {_dump(e.left)} {_dump(e.right)})"
    if isinstance(e, If):
        return f"(if {_dump(e.cond)} {_dump(e.then)} {_dump(e.orelse)})"
    parts = []
    for a in e.args:
        if isinstance(a, Tile):
            parts.append(a.name)
        elif isinstance(a, str):
            parts.append(a)
        else:
            parts.append(_dump(a))
    return f"({e.name} {' '.join(parts)})"


def count_nodes(e: Expr) -> int:
    if isinstance(e, (Num, Var)):
        return 1
    if isinstance(e, Unary):
        return 1 + count_nodes(e.operand)
    if isinstance(e, Binary):
        return 1 + count_nodes(e.left) + count_nodes(e.right)
    if isinstance(e, If):
        return 1 + count_nodes(e.cond) + count_nodes(e.then) + count_nodes(e.orelse)
    return 1 + sum(count_nodes(a) for a in e.args if not isinstance(a, (str, Tile)))


# ------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|<=|>=|[-+*/<>(),;=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, op, eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise RewardSyntaxError("lexical", f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("num", "ident", "op"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ------------------------------------------------------------------ parser


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0
        self.slots: dict[str, int] = {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, kind: str, message: str, tok: Token | None = None):
        tok = tok or self.tok
        return RewardSyntaxError(kind, message, tok.line, tok.col)

    def describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error("syntax", f"expected {text!r}, found {self.describe(self.tok)}")
        return self.advance()

    # statements

    def program(self) -> RewardProgram:
        lets: list[Let] = []
        while self.at("let"):
            lets.append(self.let_stmt())
        if not self.at("return"):
            if self.tok.kind == "eof":
                raise self.error("syntax", "missing return statement")
            raise self.error("syntax", f"expected 'let' or 'return', found {self.describe(self.tok)}")
        self.advance()
        result = self.expr()
        self.expect(";")
        if self.tok.kind != "eof":
            raise self.error("syntax", f"unexpected {self.describe(self.tok)} after return statement")
        nodes = sum(count_nodes(b.value) for b in lets) + count_nodes(result)
        return RewardProgram(self.source, tuple(lets), result, nodes)

    def let_stmt(self) -> Let:
        start = self.advance()
        name_tok = self.tok
        if name_tok.kind != "ident":
            raise self.error("syntax", f"expected a name after 'let', found {self.describe(name_tok)}")
        if name_tok.text in RESERVED:
            raise self.error("syntax", f"{name_tok.text!r} is reserved and cannot be bound")
        if name_tok.text in self.slots:
            raise self.error("duplicate", f"{name_tok.text!r} is already bound")
        self.advance()
        self.expect("=")
        value = self.expr()
        self.expect(";")
        # bound only after its own definition, so self-reference is unbound
        self.slots[name_tok.text] = len(self.slots)
        return Let(name_tok.text, value, (start.line, start.col))

    # expressions

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at("or"):
            t = self.advance()
            left = Binary("or", left, self.and_expr(), (t.line, t.col))
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.at("and"):
            t = self.advance()
            left = Binary("and", left, self.not_expr(), (t.line, t.col))
        return left

    def not_expr(self) -> Expr:
        if self.at("not"):
            t = self.advance()
            return Unary("not", self.not_expr(), (t.line, t.col))
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        while self.tok.kind == "op" and self.tok.text in ("==", "!=", "<", "<=", ">", ">="):
            t = self.advance()
            left = Binary(t.text, left, self.add_expr(), (t.line, t.col))
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            t = self.advance()
            left = Binary(t.text, left, self.mul_expr(), (t.line, t.col))
        return left

    def mul_expr(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            t = self.advance()
            left = Binary(t.text, left, self.unary(), (t.line, t.col))
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            t = self.advance()
            return Unary("-", self.unary(), (t.line, t.col))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        span = (tok.line, tok.col)
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise self.error("lexical", f"number {tok.text} is out of range", tok)
            return Num(value, span)
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind != "ident":
            raise self.error("syntax", f"expected an expression, found {self.describe(tok)}")
        name = tok.text
        if name == "if":
            self.advance()
            self.expect("(")
            parts = [self.expr()]
            while self.at(","):
                self.advance()
                parts.append(self.expr())
            if len(parts) != 3:
                raise RewardSyntaxError(
                    "arity", f"if() takes 3 arguments, got {len(parts)}", *span
                )
            self.expect(")")
            return If(*parts, span)
        if name in BUILTINS:
            return self.call(name)
        if name in GRIDS or name in TILE_NAMES:
            what = "grid" if name in GRIDS else "tile name"
            raise self.error(
                "syntax", f"{what} {name!r} is only allowed as an argument of count/dist"
            )
        if name in KEYWORDS:
            raise self.error("syntax", f"unexpected keyword {name!r}")
        self.advance()
        if self.at("("):
            raise self.error("syntax", f"unknown function {name!r}", tok)
        if name not in self.slots:
            raise self.error("unbound", f"unbound identifier {name!r}", tok)
        return Var(name, self.slots[name], span)

    def call(self, name: str) -> Call:
        start = self.advance()
        self.expect("(")
        kinds = BUILTINS[name]
        args: list = []
        if not self.at(")"):
            while True:
                pos = len(args)
                kind = kinds[pos] if pos < len(kinds) else "e"
                args.append(self.argument(name, kind, pos + 1))
                if self.at(","):
                    self.advance()
                    continue
                break
        if len(args) != len(kinds):
            raise RewardSyntaxError(
                "arity",
                f"{name}() takes {len(kinds)} argument{'s' if len(kinds) != 1 else ''}, got {len(args)}",
                start.line,
                start.col,
            )
        self.expect(")")
        return Call(name, tuple(args), (start.line, start.col))

    def argument(self, fname: str, kind: str, index: int):
        tok = self.tok
        if kind == "g":
            if tok.kind == "ident" and tok.text in GRIDS:
                self.advance()
                return tok.text
            raise self.error("syntax", f"argument {index} of {fname}() must be prev or curr")
        if kind == "t":
            if tok.kind == "ident" and tok.text in TILE_NAMES:
                self.advance()
                return TILE_NAMES[tok.text]
            raise self.error(
                "syntax",
                f"argument {index} of {fname}() must be a tile name ({', '.join(TILE_NAMES)})",
            )
        return self.expr()


def parse(source: str) -> RewardProgram:
    """Parse and statically check a reward program.

    Raises :class:`RewardSyntaxError` with line/column on any lexical,
    syntactic, binding or arity problem.
    """
    return _Parser(source).program()
