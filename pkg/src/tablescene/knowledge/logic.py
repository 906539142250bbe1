"""Quantifier-free first-order formulas over unary/binary predicates.

Syntax, from loosest to tightest binding::

    a -> b        implication (right associative)
    a v b         disjunction
    a ^ b         conjunction
    !a            negation

Atom arguments starting with a lowercase letter are variables; anything
else is a constant.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]

    def __str__(self):
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class Not:
    operand: "Formula"

    def __str__(self):
        return f"!{_wrap(self.operand, Not)}"


@dataclass(frozen=True)
class And:
    operands: tuple["Formula", ...]

    def __str__(self):
        return " ^ ".join(_wrap(f, And) for f in self.operands)


@dataclass(frozen=True)
class Or:
    operands: tuple["Formula", ...]

    def __str__(self):
        return " v ".join(_wrap(f, Or) for f in self.operands)


@dataclass(frozen=True)
class Implies:
    antecedent: "Formula"
    consequent: "Formula"

    def __str__(self):
        lhs = _wrap(self.antecedent, Or)
        return f"{lhs} -> {self.consequent}"


Formula = Union[Atom, Not, And, Or, Implies]

_RANK = {Implies: 0, Or: 1, And: 2, Not: 3, Atom: 4}


def _wrap(f, parent) -> str:
    if _RANK[type(f)] < _RANK[parent] or (parent is Not and isinstance(f, (And, Or, Implies))):
        return f"({f})"
    return str(f)


def is_variable(term: str) -> bool:
    return term[:1].islower()


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(->|[!^(),]|[A-Za-z0-9_]+)")


def tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ValueError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of formula")
        if expected is not None and tok != expected:
            raise ValueError(f"expected {expected!r}, found {tok!r}")
        self.i += 1
        return tok

    def implication(self):
        lhs = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(lhs, self.implication())
        return lhs

    def disjunction(self):
        parts = [self.conjunction()]
        while self.peek() == "v":
            self.take()
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self):
        parts = [self.unary()]
        while self.peek() == "^":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "(":
            self.take()
            f = self.implication()
            self.take(")")
            return f
        return self.atom()

    def atom(self):
        name = self.take()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or name == "v":
            raise ValueError(f"expected a predicate name, found {name!r}")
        self.take("(")
        args = [self.take()]
        while self.peek() == ",":
            self.take()
            args.append(self.take())
        self.take(")")
        for a in args:
            if a in ("(", ")", ",", "!", "^", "->"):
                raise ValueError(f"bad argument {a!r} in {name}")
        return Atom(name, tuple(args))


def parse_formula(text: str) -> Formula:
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("empty formula")
    p = _Parser(tokens)
    f = p.implication()
    if p.peek() is not None:
        raise ValueError(f"unexpected token {p.peek()!r}")
    return f


# ---------------------------------------------------------------------------
# structural queries
# ---------------------------------------------------------------------------

def atoms(f: Formula) -> list[Atom]:
    """Atoms in order of first appearance (duplicates removed)."""
    out: dict[Atom, None] = {}

    def walk(g):
        if isinstance(g, Atom):
            out.setdefault(g)
        elif isinstance(g, Not):
            walk(g.operand)
        elif isinstance(g, (And, Or)):
            for h in g.operands:
                walk(h)
        else:
            walk(g.antecedent)
            walk(g.consequent)

    walk(f)
    return list(out)


def variables(f: Formula) -> list[str]:
    seen: dict[str, None] = {}
    for a in atoms(f):
        for t in a.args:
            if is_variable(t):
                seen.setdefault(t)
    return list(seen)


def substitute(f: Formula, binding: dict[str, str]) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.predicate, tuple(binding.get(t, t) for t in f.args))
    if isinstance(f, Not):
        return Not(substitute(f.operand, binding))
    if isinstance(f, And):
        return And(tuple(substitute(g, binding) for g in f.operands))
    if isinstance(f, Or):
        return Or(tuple(substitute(g, binding) for g in f.operands))
    return Implies(substitute(f.antecedent, binding), substitute(f.consequent, binding))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(f: Formula, value: Callable[[Atom], "np.ndarray | bool"]):
    """Truth value of ``f``; ``value`` may return bools or boolean arrays."""
    if isinstance(f, Atom):
        return value(f)
    if isinstance(f, Not):
        return np.logical_not(evaluate(f.operand, value))
    if isinstance(f, And):
        out = evaluate(f.operands[0], value)
        for g in f.operands[1:]:
            out = np.logical_and(out, evaluate(g, value))
        return out
    if isinstance(f, Or):
        out = evaluate(f.operands[0], value)
        for g in f.operands[1:]:
            out = np.logical_or(out, evaluate(g, value))
        return out
    return np.logical_or(np.logical_not(evaluate(f.antecedent, value)),
                         evaluate(f.consequent, value))


def simplify(f: Formula, known: Callable[[Atom], "bool | None"]):
    """Partially evaluate ``f``; returns ``True``, ``False`` or a residual formula.

    ``known`` maps an atom to its fixed truth value, or ``None`` if free.
    """
    if isinstance(f, Atom):
        v = known(f)
        return f if v is None else bool(v)
    if isinstance(f, Not):
        g = simplify(f.operand, known)
        return (not g) if isinstance(g, bool) else Not(g)
    if isinstance(f, Implies):
        return simplify(Or((Not(f.antecedent), f.consequent)), known)
    is_and = isinstance(f, And)
    rest = []
    for g in f.operands:
        s = simplify(g, known)
        if isinstance(s, bool):
            if s != is_and:
                return s
            continue
        rest.append(s)
    if not rest:
        return is_and
    if len(rest) == 1:
        return rest[0]
    return And(tuple(rest)) if is_and else Or(tuple(rest))
