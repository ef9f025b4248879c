"""LTL formulas and their evaluation on ultimately periodic (lasso) words.

Used as a test oracle for automata supplied to the tool; there is no
translation from LTL to automata here.

Grammar (loosest binding first)::

    f ::= f '->' f | f '|' f | f '&' f | f 'U' f
        | '!' f | 'X' f | 'G' f | 'F' f | 'true' | 'false' | prop | '(' f ')'
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence


class LtlError(ValueError):
    pass


@dataclass(frozen=True)
class Ltl:
    op: str                      # 'true', 'false', 'ap', '!', '&', '|', 'X', 'U', 'G', 'F'
    args: tuple = ()
    name: str = ""

    def __str__(self):
        if self.op == "ap":
            return self.name
        if self.op in ("true", "false"):
            return self.op
        if len(self.args) == 1:
            return f"{self.op}({self.args[0]})"
        return f"({self.args[0]} {self.op} {self.args[1]})"

    def props(self) -> frozenset[str]:
        if self.op == "ap":
            return frozenset([self.name])
        return frozenset().union(*(a.props() for a in self.args)) if self.args else frozenset()

    def depth(self) -> int:
        inner = max((a.depth() for a in self.args), default=0)
        return inner + (1 if self.op in ("X", "U", "G", "F") else 0)


TRUE = Ltl("true")
FALSE = Ltl("false")


def ap(name: str) -> Ltl:
    return Ltl("ap", name=name)


def neg(f: Ltl) -> Ltl:
    return Ltl("!", (f,))


def conj(a: Ltl, b: Ltl) -> Ltl:
    return Ltl("&", (a, b))


def disj(a: Ltl, b: Ltl) -> Ltl:
    return Ltl("|", (a, b))


def implies(a: Ltl, b: Ltl) -> Ltl:
    return disj(neg(a), b)


def nxt(f: Ltl) -> Ltl:
    return Ltl("X", (f,))


def until(a: Ltl, b: Ltl) -> Ltl:
    return Ltl("U", (a, b))


def always(f: Ltl) -> Ltl:
    return Ltl("G", (f,))


def eventually(f: Ltl) -> Ltl:
    return Ltl("F", (f,))


_TOKEN = re.compile(r"\s*(->|[()!&|]|[A-Za-z_][A-Za-z0-9_]*)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LtlError(f"unexpected character {text[pos:].strip()[:1]!r} at column {pos + 1}")
        out.append((m.group(1), m.start(1)))
        pos = m.end()
    return out


def parse_ltl(text: str) -> Ltl:
    toks = _tokenize(text)
    i = 0

    def peek():
        return toks[i][0] if i < len(toks) else None

    def take(expected=None):
        nonlocal i
        if i >= len(toks):
            raise LtlError("unexpected end of formula")
        tok, col = toks[i]
        if expected is not None and tok != expected:
            raise LtlError(f"expected {expected!r} at column {col + 1}, found {tok!r}")
        i += 1
        return tok

    def binary(level):
        ops = ["->", "|", "&", "U"]
        if level == len(ops):
            return unary()
        left = binary(level + 1)
        if peek() == ops[level]:
            take()
            # '->' and 'U' associate to the right
            if ops[level] in ("->", "U"):
                right = binary(level)
            else:
                right = binary(level + 1)
                while peek() == ops[level]:
                    take()
                    left = Ltl(ops[level], (left, right))
                    right = binary(level + 1)
            if ops[level] == "->":
                return implies(left, right)
            return Ltl(ops[level], (left, right))
        return left

    def unary():
        tok = peek()
        if tok in ("!", "X", "G", "F"):
            take()
            return Ltl(tok, (unary(),))
        if tok == "(":
            take()
            f = binary(0)
            take(")")
            return f
        if tok is None:
            raise LtlError("unexpected end of formula")
        take()
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) or tok == "U":
            raise LtlError(f"unexpected token {tok!r} at column {toks[i - 1][1] + 1}")
        return ap(tok)

    f = binary(0)
    if i != len(toks):
        raise LtlError(f"trailing input at column {toks[i][1] + 1}")
    return f


@dataclass(frozen=True)
class LassoWord:
    """The word prefix · cycle^omega over label sets."""

    prefix: tuple[frozenset[str], ...]
    cycle: tuple[frozenset[str], ...]
    ap: frozenset[str] | None = None

    def __post_init__(self):
        if not self.cycle:
            raise LtlError("lasso cycle must be non-empty")

    @classmethod
    def of(cls, prefix: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]], ap=None):
        return cls(tuple(frozenset(x) for x in prefix), tuple(frozenset(x) for x in cycle),
                   None if ap is None else frozenset(ap))


def ltl_eval_lasso(f: Ltl, w: LassoWord) -> bool:
    """Truth of ``f`` at position 0 of ``w``.

    Each subformula is evaluated on the len(prefix)+len(cycle) positions
    of the lasso graph; U is the least fixpoint of b | (a & X(a U b)) over
    that graph, reached after at most as many sweeps as there are positions.
    """
    if w.ap is not None:
        missing = f.props() - w.ap
        if missing:
            raise LtlError(f"undeclared proposition(s): {sorted(missing)}")
    letters = w.prefix + w.cycle
    n = len(letters)
    succ = [i + 1 for i in range(n - 1)] + [len(w.prefix)]
    memo: dict[Ltl, list[bool]] = {}

    def ev(g: Ltl) -> list[bool]:
        if g in memo:
            return memo[g]
        op = g.op
        if op == "true":
            val = [True] * n
        elif op == "false":
            val = [False] * n
        elif op == "ap":
            val = [g.name in x for x in letters]
        elif op == "!":
            val = [not x for x in ev(g.args[0])]
        elif op == "&":
            a, b = ev(g.args[0]), ev(g.args[1])
            val = [x and y for x, y in zip(a, b)]
        elif op == "|":
            a, b = ev(g.args[0]), ev(g.args[1])
            val = [x or y for x, y in zip(a, b)]
        elif op == "X":
            a = ev(g.args[0])
            val = [a[succ[i]] for i in range(n)]
        elif op in ("U", "F"):
            a = ev(g.args[0]) if op == "U" else [True] * n
            b = ev(g.args[-1])
            val = list(b)
            for _ in range(n):
                new = [b[i] or (a[i] and val[succ[i]]) for i in range(n)]
                if new == val:
                    break
                val = new
        elif op == "G":
            val = [not x for x in ev(Ltl("F", (neg(g.args[0]),)))]
        else:
            raise LtlError(f"unknown operator {op!r}")
        memo[g] = val
        return val

    return ev(f)[0]


# the surveillance task used by the bundled example
CASE_STUDY_FORMULA = "G F base & G F job & G (base -> X (!base U job))"
