"""Abstract scene graph: support arrows, contact edges and query annotations."""
from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field

from .errors import SchemaError
from .evidence import TABLE, EvidenceSet, atom_name
from .knowledge.inference import Decision, QueryResult


def node_sort_key(name: str):
    """Table first, then objects by numeric id."""
    if name == TABLE:
        return (0, 0, "")
    m = re.fullmatch(r"O(-?\d+)", name)
    if m:
        return (1, int(m.group(1)), "")
    return (2, 0, name)


@dataclass
class Node:
    id: str
    hidden: Decision = Decision.UNDECIDED
    false: Decision = Decision.UNDECIDED
    p_hidden: float | None = None
    p_false: float | None = None


@dataclass
class SceneGraph:
    nodes: dict[str, Node] = field(default_factory=dict)
    support: list[tuple[str, str]] = field(default_factory=list)  # supporter -> supported
    contact: list[tuple[str, str]] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, SceneGraph):
            return NotImplemented
        return emit_json(self) == emit_json(other)

    def supporters_of(self, name: str) -> list[str]:
        return [a for a, b in self.support if b == name]

    def has_cycle(self) -> bool:
        succ: dict[str, list[str]] = {}
        for a, b in self.support:
            succ.setdefault(a, []).append(b)
        state: dict[str, int] = {}

        def visit(n) -> bool:
            state[n] = 1
            for m in succ.get(n, ()):
                s = state.get(m, 0)
                if s == 1 or (s == 0 and visit(m)):
                    return True
            state[n] = 2
            return False

        return any(state.get(n, 0) == 0 and visit(n) for n in list(succ))


def _pair_key(pair):
    return (node_sort_key(pair[0]), node_sort_key(pair[1]))


def build_graph(scene, evidence: EvidenceSet, decisions=None, marginals: QueryResult | None = None) -> SceneGraph:
    names = scene.constants()
    if set(names) != set(evidence.constants):
        raise SchemaError(f"evidence constants {sorted(evidence.constants)} do not match scene {sorted(names)}")
    decisions = decisions or {}
    probs = marginals.marginals if marginals is not None else {}

    g = SceneGraph()
    for n in sorted(names, key=node_sort_key):
        g.nodes[n] = Node(
            n,
            decisions.get(atom_name("hidden", (n,)), Decision.UNDECIDED),
            decisions.get(atom_name("false", (n,)), Decision.UNDECIDED),
            probs.get(atom_name("hidden", (n,))),
            probs.get(atom_name("false", (n,))),
        )

    def supports(a, b):
        return (evidence.holds("stable", a) and evidence.holds("stable", b)
                and evidence.holds("contact", a, b) and evidence.holds("higher", b, a))

    ordered = sorted(names, key=node_sort_key)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if not (evidence.holds("contact", a, b) or evidence.holds("contact", b, a)):
                continue
            ab, ba = supports(a, b), supports(b, a)
            if ab and not ba:
                g.support.append((a, b))
            elif ba and not ab:
                g.support.append((b, a))
            else:
                g.contact.append((a, b))
    g.support.sort(key=_pair_key)
    g.contact.sort(key=_pair_key)
    if g.has_cycle():
        warnings.warn("support relation contains a cycle", RuntimeWarning, stacklevel=2)
    return g


def _round(p):
    return None if p is None else float(p)


def emit_json(g: SceneGraph) -> str:
    nodes = [
        {"id": n.id, "hidden": n.hidden.value, "false": n.false.value,
         "p_hidden": _round(n.p_hidden), "p_false": _round(n.p_false)}
        for n in sorted(g.nodes.values(), key=lambda n: node_sort_key(n.id))
    ]
    doc = {
        "nodes": nodes,
        "support": [list(e) for e in sorted(g.support, key=_pair_key)],
        "contact": [list(e) for e in sorted(g.contact, key=_pair_key)],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_json(text: str) -> SceneGraph:
    try:
        doc = json.loads(text)
        g = SceneGraph()
        for d in doc["nodes"]:
            g.nodes[d["id"]] = Node(d["id"], Decision(d["hidden"]), Decision(d["false"]),
                                    d.get("p_hidden"), d.get("p_false"))
        g.support = [tuple(e) for e in doc["support"]]
        g.contact = [tuple(e) for e in doc["contact"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scene graph: {exc}") from None
    return g


def emit_dot(g: SceneGraph) -> str:
    lines = ["digraph scene {"]
    for n in sorted(g.nodes.values(), key=lambda n: node_sort_key(n.id)):
        attrs = []
        if n.false is Decision.TRUE:
            attrs.append("color=red")
        elif n.hidden is Decision.TRUE:
            attrs.append("color=cyan")
        if n.id == TABLE:
            attrs.append("shape=box")
        lines.append(f"  {n.id}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    for a, b in sorted(g.support, key=_pair_key):
        lines.append(f"  {a} -> {b};")
    for a, b in sorted(g.contact, key=_pair_key):
        lines.append(f"  {a} -> {b} [dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"
