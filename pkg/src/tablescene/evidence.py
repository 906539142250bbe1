"""Ground-atom evidence sets and their MLN-style text serialization.

The text format holds one ground atom per line, optionally negated with
``!``::

    stable(O3)
    !hover(O1)
    contact(O1,table)

Blank lines and lines starting with ``#`` or ``//`` are ignored.
"""
from __future__ import annotations

import re
from typing import Iterable, Iterator

from .errors import ParseError

TABLE = "table"

_ATOM_RE = re.compile(r"^(!?)\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\)$")


def object_constant(object_id) -> str:
    """Logic constant naming a scene object (``3`` -> ``"O3"``)."""
    return f"O{object_id}"


def atom_name(predicate: str, args: Iterable[str]) -> str:
    return f"{predicate}({','.join(args)})"


def parse_atom(text: str):
    """Parse ``[!]pred(a,b)`` into ``(predicate, args, truth)``."""
    m = _ATOM_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not a ground atom: {text!r}")
    neg, pred, body = m.groups()
    args = tuple(a.strip() for a in body.split(",")) if body.strip() else ()
    if any(not a for a in args):
        raise ValueError(f"empty argument in {text!r}")
    return pred, args, not neg


class EvidenceSet:
    """Explicit truth values for ground atoms over a fixed constant set.

    Atoms of evidence predicates that are not listed are false (closed
    world); whether an unlisted query atom is free is decided by the
    grounding step, not here.
    """

    def __init__(self, constants: Iterable[str], atoms=None):
        self.constants = tuple(dict.fromkeys(constants))
        self.atoms: dict[tuple[str, tuple[str, ...]], bool] = {}
        for (pred, args), value in (atoms or {}).items():
            self.set(pred, args, value)

    def set(self, predicate: str, args, value: bool = True) -> None:
        self.atoms[(predicate, tuple(args))] = bool(value)

    def get(self, predicate: str, args, default=None):
        return self.atoms.get((predicate, tuple(args)), default)

    def holds(self, predicate: str, *args: str) -> bool:
        return self.atoms.get((predicate, tuple(args)), False)

    def true_atoms(self) -> Iterator[tuple[str, tuple[str, ...]]]:
        return (key for key, value in self.atoms.items() if value)

    def predicates(self) -> set[str]:
        return {pred for pred, _ in self.atoms}

    def copy(self) -> "EvidenceSet":
        return EvidenceSet(self.constants, dict(self.atoms))

    def key(self):
        """Hashable identity used to memoize per-evidence computations."""
        return (self.constants, frozenset(self.atoms.items()))

    def __eq__(self, other):
        if not isinstance(other, EvidenceSet):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return f"EvidenceSet({len(self.constants)} constants, {len(self.atoms)} atoms)"

    def to_text(self) -> str:
        lines = []
        for (pred, args), value in sorted(self.atoms.items()):
            lines.append(("" if value else "!") + atom_name(pred, args))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, constants: Iterable[str] = (), source=None) -> "EvidenceSet":
        """Parse the ground-atom format.

        The constant set is ``constants`` extended by every constant that
        appears in an atom, in order of first appearance.
        """
        consts = list(constants)
        atoms = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("//"):
                continue
            try:
                pred, args, value = parse_atom(line)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, source=source) from None
            if (pred, args) in atoms and atoms[(pred, args)] != value:
                raise ParseError(f"contradictory atom {line!r}", line=lineno, source=source)
            atoms[(pred, args)] = value
            consts.extend(args)
        return cls(consts, atoms)
