"""Grounding a knowledge base over scene constants.

Every rule is instantiated once per tuple of constants (repeated
constants included).  Evidence atoms are substituted immediately, so
each ground instance is either fixed by evidence or reduces to a small
residual formula over free query atoms, stored as a truth table.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaError
from ..evidence import EvidenceSet, atom_name
from .kb import KnowledgeBase, PredicateKind, Rule
from .logic import Atom, atoms, evaluate, simplify, substitute, variables

MAX_FACTOR_ATOMS = 20


def truth_table(formula, n_atoms: int, index_of) -> np.ndarray:
    """Truth of ``formula`` for every assignment of its ``n_atoms`` atoms.

    Entry ``k`` corresponds to atom ``j`` taking bit ``j`` of ``k``.
    """
    k = np.arange(1 << n_atoms)
    bits = ((k[:, None] >> np.arange(n_atoms)) & 1).astype(bool)
    return np.asarray(evaluate(formula, lambda a: bits[:, index_of[a]]), dtype=bool).reshape(-1)


@dataclass
class GroundInstance:
    rule: Rule
    binding: tuple[str, ...]
    fixed: bool | None
    atoms: tuple[int, ...] = ()
    table: np.ndarray | None = None
    residual: object = None

    @property
    def weight(self) -> float:
        return self.rule.weight

    @property
    def is_hard(self) -> bool:
        return self.rule.is_hard

    def label(self) -> str:
        return f"{self.rule.name}({','.join(self.binding)})"


@dataclass
class GroundNetwork:
    kb: KnowledgeBase
    constants: tuple[str, ...]
    evidence: EvidenceSet
    query_atoms: list[tuple[str, tuple[str, ...]]]
    fixed_query: dict[tuple[str, tuple[str, ...]], bool]
    instances: list[GroundInstance] = field(default_factory=list)
    soft_offset: float = 0.0

    def __post_init__(self):
        self.atom_index = {a: i for i, a in enumerate(self.query_atoms)}

    @property
    def n_atoms(self) -> int:
        return len(self.query_atoms)

    @property
    def atom_names(self) -> list[str]:
        return [atom_name(p, a) for p, a in self.query_atoms]

    @property
    def residual_instances(self) -> list[GroundInstance]:
        return [g for g in self.instances if g.fixed is None]

    @property
    def hard_violations(self) -> list[GroundInstance]:
        return [g for g in self.instances if g.is_hard and g.fixed is False]

    @property
    def feasible_by_evidence(self) -> bool:
        return not self.hard_violations

    def instances_of(self, rule_name: str) -> list[GroundInstance]:
        return [g for g in self.instances if g.rule.name == rule_name]

    def world(self, assignment=None) -> np.ndarray:
        """A world as a boolean vector; ``assignment`` maps atom names to values."""
        w = np.zeros(self.n_atoms, dtype=bool)
        for name, value in (assignment or {}).items():
            w[self.atom_names.index(name)] = bool(value)
        return w


def ground(kb: KnowledgeBase, constants, evidence: EvidenceSet) -> GroundNetwork:
    constants = tuple(dict.fromkeys(constants))
    cset = set(constants)
    for (pred, args), _ in evidence.atoms.items():
        p = kb.predicates.get(pred)
        if p is None:
            raise SchemaError(f"unknown predicate {pred!r} in evidence")
        if len(args) != p.arity:
            raise SchemaError(f"{pred} expects {p.arity} argument(s) in evidence")
        for c in args:
            if c not in cset:
                raise SchemaError(f"unknown constant {c!r} in evidence")

    fixed_query = {}
    query_atoms = []
    for p in kb.query_predicates:
        for args in itertools.product(constants, repeat=p.arity):
            v = evidence.get(p.name, args)
            if v is None:
                query_atoms.append((p.name, args))
            else:
                fixed_query[(p.name, args)] = v

    evidence_kind = {p.name for p in kb.evidence_predicates}
    free = {a: i for i, a in enumerate(query_atoms)}

    def known(a: Atom):
        key = (a.predicate, a.args)
        if a.predicate in evidence_kind:
            return evidence.get(a.predicate, a.args, False)
        if key in fixed_query:
            return fixed_query[key]
        return None

    gn = GroundNetwork(kb, constants, evidence, query_atoms, fixed_query)
    offset = 0.0
    for rule in kb.rules:
        vars_ = variables(rule.formula)
        for binding in itertools.product(constants, repeat=len(vars_)):
            g = substitute(rule.formula, dict(zip(vars_, binding)))
            s = simplify(g, known)
            if isinstance(s, bool):
                gn.instances.append(GroundInstance(rule, binding, s))
                if s and not rule.is_hard:
                    offset += rule.weight
                continue
            local = atoms(s)
            if len(local) > MAX_FACTOR_ATOMS:
                raise SchemaError(f"ground formula of {rule.name} has too many free atoms")
            index_of = {a: j for j, a in enumerate(local)}
            table = truth_table(s, len(local), index_of)
            ids = tuple(free[(a.predicate, a.args)] for a in local)
            gn.instances.append(GroundInstance(rule, binding, None, ids, table, s))
    gn.soft_offset = offset
    return gn


def world_log_weight(gn: GroundNetwork, world) -> float:
    """Sum of soft weights times true groundings; ``-inf`` if a hard instance fails."""
    w = np.asarray(world, dtype=bool)
    if w.shape != (gn.n_atoms,):
        raise ValueError(f"world must have {gn.n_atoms} entries")
    if gn.hard_violations:
        return -math.inf
    total = gn.soft_offset
    for g in gn.residual_instances:
        idx = 0
        for j, a in enumerate(g.atoms):
            idx |= int(w[a]) << j
        sat = bool(g.table[idx])
        if g.is_hard:
            if not sat:
                return -math.inf
        elif sat:
            total += g.weight
    return total
