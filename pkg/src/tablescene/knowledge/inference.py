"""Exact and Gibbs inference over a ground network.

Exact mode conditions on atoms that hard instances force, splits the
remaining factor graph into connected components and enumerates each
component.  The partition function is never needed across scenes; the
unnormalized prior is ``log sum_x exp(sum_i w_i n_i(x))`` over feasible
query worlds.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp

from ..errors import CapacityError, InfeasibleModelError
from ..evidence import atom_name
from .grounding import GroundNetwork

EXACT_ATOM_CAP = 22
DEFAULT_SWEEPS = 100_000
DEFAULT_BURN_IN = 1_000
DEFAULT_HARD_CAP_WEIGHT = 100.0


class Decision(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNDECIDED = "undecided"


@dataclass
class QueryResult:
    marginals: dict[str, float]
    method: str
    feasible_worlds: int | None = None
    samples: int | None = None

    def __getitem__(self, name: str) -> float:
        return self.marginals[name]

    def to_json(self) -> str:
        return json.dumps(self.marginals, indent=2) + "\n"

    def max_abs_diff(self, other: "QueryResult") -> float:
        return max((abs(v - other.marginals[k]) for k, v in self.marginals.items()), default=0.0)


# ---------------------------------------------------------------------------
# factor compilation for exact enumeration
# ---------------------------------------------------------------------------

@dataclass
class _Factor:
    atoms: tuple[int, ...]
    table: np.ndarray
    weight: float
    hard: bool


def _condition(f: _Factor, forced: dict[int, bool]) -> _Factor:
    keep = [j for j, a in enumerate(f.atoms) if a not in forced]
    if len(keep) == len(f.atoms):
        return f
    base = 0
    for j, a in enumerate(f.atoms):
        if a in forced and forced[a]:
            base |= 1 << j
    k = np.arange(1 << len(keep))
    idx = np.full(k.shape, base)
    for jj, j in enumerate(keep):
        idx |= ((k >> jj) & 1) << j
    return _Factor(tuple(f.atoms[j] for j in keep), f.table[idx], f.weight, f.hard)


@dataclass
class CompiledNetwork:
    n_atoms: int
    feasible: bool
    forced: dict[int, bool] = field(default_factory=dict)
    constant: float = 0.0
    components: list[tuple[list[int], list[_Factor]]] = field(default_factory=list)
    unconstrained: list[int] = field(default_factory=list)
    violated: list[str] = field(default_factory=list)


def compile_network(gn: GroundNetwork) -> CompiledNetwork:
    if gn.hard_violations:
        return CompiledNetwork(gn.n_atoms, False, violated=[g.label() for g in gn.hard_violations])
    factors = [_Factor(g.atoms, g.table, g.weight, g.is_hard) for g in gn.residual_instances]
    labels = [g.label() for g in gn.residual_instances]
    forced: dict[int, bool] = {}

    # propagate values implied by hard factors to a fixpoint
    changed = True
    while changed:
        changed = False
        for n, f in enumerate(factors):
            if not f.hard:
                continue
            c = _condition(f, forced)
            sat = np.nonzero(c.table)[0]
            if sat.size == 0:
                return CompiledNetwork(gn.n_atoms, False, violated=[labels[n]])
            for j, a in enumerate(c.atoms):
                bits = (sat >> j) & 1
                if bits.min() == bits.max():
                    forced[a] = bool(bits[0])
                    changed = True

    constant = gn.soft_offset
    live = []
    for f in factors:
        c = _condition(f, forced)
        if c.atoms:
            live.append(c)
        elif not c.table[0]:
            if c.hard:  # pragma: no cover - propagation catches this first
                return CompiledNetwork(gn.n_atoms, False, violated=["hard factor"])
        elif not c.hard:
            constant += c.weight

    parent = list(range(gn.n_atoms))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in live:
        r = find(f.atoms[0])
        for a in f.atoms[1:]:
            parent[find(a)] = r
    groups: dict[int, list[int]] = {}
    touched = {a for f in live for a in f.atoms}
    for a in sorted(touched):
        groups.setdefault(find(a), []).append(a)
    comp_factors: dict[int, list[_Factor]] = {r: [] for r in groups}
    for f in live:
        comp_factors[find(f.atoms[0])].append(f)
    components = [(groups[r], comp_factors[r]) for r in sorted(groups, key=lambda r: groups[r][0])]
    unconstrained = [a for a in range(gn.n_atoms) if a not in touched and a not in forced]
    return CompiledNetwork(gn.n_atoms, True, forced, constant, components, unconstrained)


def _enumerate(atoms_: list[int], factors: list[_Factor]):
    """Scores and feasibility mask for all worlds of one component."""
    m = len(atoms_)
    local = {a: j for j, a in enumerate(atoms_)}
    k = np.arange(1 << m)
    bits = ((k[:, None] >> np.arange(m)) & 1).astype(bool)
    score = np.zeros(k.shape)
    ok = np.ones(k.shape, dtype=bool)
    for f in factors:
        idx = np.zeros(k.shape, dtype=np.int64)
        for j, a in enumerate(f.atoms):
            idx |= bits[:, local[a]].astype(np.int64) << j
        sat = f.table[idx]
        if f.hard:
            ok &= sat
        else:
            score += f.weight * sat
    return bits, score, ok


def unnormalized_prior(gn: GroundNetwork, mode: str = "marginal") -> float:
    """Log of the unnormalized prior; ``-inf`` marks an infeasible network.

    ``mode="marginal"`` sums over query worlds, ``mode="map"`` takes the
    best world.
    """
    if mode not in ("marginal", "map"):
        raise ValueError(f"unknown prior mode {mode!r}")
    cn = compile_network(gn)
    if not cn.feasible:
        return -math.inf
    total = cn.constant
    if mode == "marginal":
        total += len(cn.unconstrained) * math.log(2.0)
    for atoms_, factors in cn.components:
        _, score, ok = _enumerate(atoms_, factors)
        if not ok.any():
            return -math.inf
        total += float(logsumexp(score[ok])) if mode == "marginal" else float(score[ok].max())
    return total


def _all_marginals(gn: GroundNetwork, free: dict[int, float]) -> dict[str, float]:
    """Marginals for every query grounding, evidence-fixed ones as 0/1."""
    rank = {p.name: i for i, p in enumerate(gn.kb.query_predicates)}
    pos = {c: i for i, c in enumerate(gn.constants)}
    keys = sorted(list(gn.atom_index) + list(gn.fixed_query),
                  key=lambda k: (rank[k[0]], [pos[c] for c in k[1]]))
    out = {}
    for key in keys:
        if key in gn.atom_index:
            out[atom_name(*key)] = free[gn.atom_index[key]]
        else:
            out[atom_name(*key)] = 1.0 if gn.fixed_query[key] else 0.0
    return out


def query_marginals_exact(gn: GroundNetwork, cap: int = EXACT_ATOM_CAP) -> QueryResult:
    if gn.n_atoms > cap:
        raise CapacityError(
            f"{gn.n_atoms} ground query atoms exceed the exact-inference cap of {cap}; use Gibbs mode")
    cn = compile_network(gn)
    if not cn.feasible:
        raise InfeasibleModelError("no world satisfies the hard rules", cn.violated)
    p = {a: 0.5 for a in cn.unconstrained}
    p.update({a: float(v) for a, v in cn.forced.items()})
    count = 2 ** len(cn.unconstrained)
    for atoms_, factors in cn.components:
        bits, score, ok = _enumerate(atoms_, factors)
        if not ok.any():
            raise InfeasibleModelError("no world satisfies the hard rules")
        s = score[ok]
        w = np.exp(s - logsumexp(s))
        marg = w @ bits[ok]
        for j, a in enumerate(atoms_):
            p[a] = float(min(1.0, max(0.0, marg[j])))
        count *= int(ok.sum())
    return QueryResult(_all_marginals(gn, p), "exact", feasible_worlds=count)


# ---------------------------------------------------------------------------
# Gibbs sampling
# ---------------------------------------------------------------------------

@njit(cache=True)
def _gibbs_kernel(state, f_atoms, f_k, f_off, tables, f_w, adj_ptr, adj_idx, uniforms, counts, record):
    n = state.shape[0]
    for s in range(uniforms.shape[0]):
        for i in range(n):
            delta = 0.0
            for p in range(adj_ptr[i], adj_ptr[i + 1]):
                f = adj_idx[p]
                idx0 = 0
                bit_i = 0
                for j in range(f_k[f]):
                    a = f_atoms[f, j]
                    if a == i:
                        bit_i = 1 << j
                    elif state[a]:
                        idx0 |= 1 << j
                t1 = tables[f_off[f] + (idx0 | bit_i)]
                t0 = tables[f_off[f] + idx0]
                if t1 and not t0:
                    delta += f_w[f]
                elif t0 and not t1:
                    delta -= f_w[f]
            p1 = 1.0 / (1.0 + np.exp(-delta))
            state[i] = uniforms[s, i] < p1
        if record:
            for i in range(n):
                counts[i] += state[i]


def _gibbs_arrays(gn: GroundNetwork, hard_cap_weight: float):
    facs = gn.residual_instances
    kmax = max((len(g.atoms) for g in facs), default=1)
    F = len(facs)
    f_atoms = np.full((max(F, 1), kmax), -1, dtype=np.int64)
    f_k = np.zeros(max(F, 1), dtype=np.int64)
    f_off = np.zeros(max(F, 1), dtype=np.int64)
    f_w = np.zeros(max(F, 1))
    tables = []
    off = 0
    adj: list[list[int]] = [[] for _ in range(gn.n_atoms)]
    for n, g in enumerate(facs):
        f_atoms[n, :len(g.atoms)] = g.atoms
        f_k[n] = len(g.atoms)
        f_off[n] = off
        f_w[n] = hard_cap_weight if g.is_hard else g.weight
        tables.append(g.table)
        off += g.table.size
        for a in g.atoms:
            adj[a].append(n)
    table_arr = np.concatenate(tables) if tables else np.zeros(1, dtype=bool)
    adj_ptr = np.zeros(gn.n_atoms + 1, dtype=np.int64)
    adj_ptr[1:] = np.cumsum([len(x) for x in adj])
    adj_idx = np.array([n for x in adj for n in x] or [0], dtype=np.int64)
    return f_atoms, f_k, f_off, table_arr, f_w, adj_ptr, adj_idx


def query_marginals_gibbs(gn: GroundNetwork, sweeps: int = DEFAULT_SWEEPS, burn_in: int = DEFAULT_BURN_IN,
                          hard_cap_weight: float = DEFAULT_HARD_CAP_WEIGHT, seed=0,
                          chunk: int = 10_000) -> QueryResult:
    """Single-site Gibbs on the network with hard weights softened."""
    if not sweeps > burn_in >= 0:
        raise ValueError("sweeps must exceed burn_in")
    rng = np.random.default_rng(seed)
    n = gn.n_atoms
    arrays = _gibbs_arrays(gn, hard_cap_weight)
    state = rng.random(n) < 0.5
    counts = np.zeros(n, dtype=np.int64)
    done = 0
    while done < sweeps:
        if done < burn_in:
            m = min(chunk, burn_in - done)
            record = False
        else:
            m = min(chunk, sweeps - done)
            record = True
        u = rng.random((m, n))
        _gibbs_kernel(state, *arrays, u, counts, record)
        done += m
    kept = sweeps - burn_in
    p = {a: float(counts[a]) / kept for a in range(n)}
    return QueryResult(_all_marginals(gn, p), "gibbs", samples=kept)


def infer(gn: GroundNetwork, mode: str = "auto", cap: int = EXACT_ATOM_CAP, sweeps: int = DEFAULT_SWEEPS,
          burn_in: int = DEFAULT_BURN_IN, hard_cap_weight: float = DEFAULT_HARD_CAP_WEIGHT,
          seed=0) -> QueryResult:
    if mode == "auto":
        mode = "exact" if gn.n_atoms <= cap else "gibbs"
    if mode == "exact":
        return query_marginals_exact(gn, cap)
    if mode == "gibbs":
        return query_marginals_gibbs(gn, sweeps, burn_in, hard_cap_weight, seed)
    raise ValueError(f"unknown inference mode {mode!r}")


def classify_queries(qr: QueryResult, lo: float = 0.4, hi: float = 0.6) -> dict[str, Decision]:
    if not lo < hi:
        raise ValueError("lo must be below hi")
    out = {}
    for name, v in qr.marginals.items():
        if v > hi:
            out[name] = Decision.TRUE
        elif v < lo:
            out[name] = Decision.FALSE
        else:
            out[name] = Decision.UNDECIDED
    return out
