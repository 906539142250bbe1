"""Predicates, weighted rules and the table-top knowledge base.

Knowledge-base files hold one rule per line::

    <weight|HARD> <formula>

A weight is a real number or ``log(p1/p2)``.  Optional declaration lines
``evidence name/arity`` and ``query name/arity`` replace the default
vocabulary; ``#`` and ``//`` start comments.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ParseError, SchemaError
from .logic import Formula, atoms, is_variable, parse_formula, variables

HARD = math.inf


class PredicateKind(enum.Enum):
    EVIDENCE = "evidence"
    QUERY = "query"


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int
    kind: PredicateKind

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError("only unary and binary predicates are supported")


@dataclass(frozen=True)
class Rule:
    index: int
    weight: float
    formula: Formula
    text: str = ""

    @property
    def is_hard(self) -> bool:
        return self.weight == HARD

    @property
    def name(self) -> str:
        return f"r{self.index}"

    def __str__(self):
        w = "HARD" if self.is_hard else repr(self.weight)
        return f"{w} {self.formula}"


DEFAULT_PREDICATES = (
    Predicate("stable", 1, PredicateKind.EVIDENCE),
    Predicate("table", 1, PredicateKind.EVIDENCE),
    Predicate("contact", 2, PredicateKind.EVIDENCE),
    Predicate("intersect", 2, PredicateKind.EVIDENCE),
    Predicate("hover", 1, PredicateKind.EVIDENCE),
    Predicate("higher", 2, PredicateKind.EVIDENCE),
    Predicate("supportive", 1, PredicateKind.QUERY),
    Predicate("supported", 1, PredicateKind.QUERY),
    Predicate("hidden", 1, PredicateKind.QUERY),
    Predicate("false", 1, PredicateKind.QUERY),
)

DEFAULT_KB_TEXT = """\
# hard rules
HARD !higher(o1,o1)
HARD !intersect(o1,o1)
HARD !contact(o1,o1)
HARD contact(o1,o2) -> contact(o2,o1)
HARD intersect(o1,o2) -> intersect(o2,o1)
HARD higher(o1,o2) -> !higher(o2,o1)
HARD table(o1) -> !false(o1)
HARD table(o1) -> !hidden(o1)
HARD table(o1) -> stable(o1)
HARD stable(o1) ^ stable(o2) ^ contact(o1,o2) ^ higher(o1,o2) -> supportive(o2) ^ supported(o1)
# soft rules, weights in log-odds form
log(0.70/0.30) supported(o1) -> !hidden(o1)
log(0.90/0.10) !stable(o1) -> !supportive(o1)
log(0.90/0.10) hover(o1) -> false(o1) v hidden(o1)
log(0.90/0.10) intersect(o1,o2) -> false(o1) v false(o2)
log(0.70/0.30) supportive(o1) -> !false(o1)
log(0.90/0.10) stable(o1) -> !false(o1)
"""

_LOG_ODDS_RE = re.compile(r"^log\(\s*([0-9.eE+-]+)\s*/\s*([0-9.eE+-]+)\s*\)$")
_DECL_RE = re.compile(r"^(evidence|query)\s+([A-Za-z_][A-Za-z0-9_]*)\s*/\s*([12])$")


def parse_weight(token: str) -> float:
    if token.upper() == "HARD":
        return HARD
    m = _LOG_ODDS_RE.match(token)
    if m:
        p1, p2 = float(m.group(1)), float(m.group(2))
        if p1 <= 0 or p2 <= 0:
            raise ValueError(f"log-odds arguments must be positive in {token!r}")
        return math.log(p1 / p2)
    w = float(token)
    if not math.isfinite(w):
        raise ValueError("soft weights must be finite; use HARD")
    return w


@dataclass
class KnowledgeBase:
    predicates: dict[str, Predicate] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)

    @classmethod
    def with_predicates(cls, predicates=DEFAULT_PREDICATES) -> "KnowledgeBase":
        return cls({p.name: p for p in predicates}, [])

    def add_rule(self, weight: float, formula, text: str = "") -> Rule:
        if isinstance(formula, str):
            text = text or formula
            formula = parse_formula(formula)
        self._check(formula)
        rule = Rule(len(self.rules) + 1, weight, formula, text)
        self.rules.append(rule)
        return rule

    def _check(self, formula):
        for a in atoms(formula):
            p = self.predicates.get(a.predicate)
            if p is None:
                raise SchemaError(f"undeclared predicate {a.predicate!r}")
            if p.arity != len(a.args):
                raise SchemaError(f"{a.predicate} expects {p.arity} argument(s), got {len(a.args)}")

    def rule(self, name_or_index) -> Rule:
        idx = int(str(name_or_index).lstrip("r"))
        return self.rules[idx - 1]

    def subset(self, *names) -> "KnowledgeBase":
        """A KB holding only the named rules, renumbered from 1."""
        kb = KnowledgeBase(dict(self.predicates), [])
        for n in names:
            r = self.rule(n)
            kb.add_rule(r.weight, r.formula, r.text)
        return kb

    def pruned(self) -> "KnowledgeBase":
        """The same rules over only the predicates they mention."""
        used = {a.predicate for r in self.rules for a in atoms(r.formula)}
        return KnowledgeBase({k: p for k, p in self.predicates.items() if k in used}, list(self.rules))

    @property
    def evidence_predicates(self) -> list[Predicate]:
        return [p for p in self.predicates.values() if p.kind is PredicateKind.EVIDENCE]

    @property
    def query_predicates(self) -> list[Predicate]:
        return [p for p in self.predicates.values() if p.kind is PredicateKind.QUERY]

    def to_text(self) -> str:
        lines = [f"{p.kind.value} {p.name}/{p.arity}" for p in self.predicates.values()]
        lines += [str(r) for r in self.rules]
        return "\n".join(lines) + "\n"


def parse_knowledge_base(text: str, source=None) -> KnowledgeBase:
    decls = []
    rule_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].split("#", 1)[0].strip()
        if not line:
            continue
        m = _DECL_RE.match(line)
        if m:
            kind = PredicateKind(m.group(1))
            decls.append(Predicate(m.group(2), int(m.group(3)), kind))
            continue
        rule_lines.append((lineno, line))

    kb = KnowledgeBase.with_predicates(decls or DEFAULT_PREDICATES)
    for lineno, line in rule_lines:
        parts = line.split(None, 1)
        if len(parts) < 2:
            raise ParseError("expected '<weight|HARD> <formula>'", line=lineno, source=source)
        try:
            weight = parse_weight(parts[0])
            formula = parse_formula(parts[1])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, source=source) from None
        for a in atoms(formula):
            if any(not is_variable(t) for t in a.args):
                raise ParseError(f"constants are not allowed in rules: {a}", line=lineno, source=source)
        try:
            kb.add_rule(weight, formula, parts[1])
        except SchemaError as exc:
            raise ParseError(str(exc), line=lineno, source=source) from None
    return kb


def load_knowledge_base(path) -> KnowledgeBase:
    path = Path(path)
    return parse_knowledge_base(path.read_text(), source=str(path))


def default_knowledge_base() -> KnowledgeBase:
    return parse_knowledge_base(DEFAULT_KB_TEXT, source="<default>")


def rule_variables(rule: Rule) -> list[str]:
    return variables(rule.formula)
