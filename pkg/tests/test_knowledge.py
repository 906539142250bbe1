import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tablescene.errors import CapacityError, InfeasibleModelError, ParseError, SchemaError
from tablescene.evidence import EvidenceSet
from tablescene.harness import oracle_prior, oracle_query_marginals, reference_tabletop_evidence
from tablescene.knowledge import (Decision, KnowledgeBase, QueryResult, classify_queries, default_knowledge_base,
                                  ground, infer, parse_formula, parse_knowledge_base, query_marginals_exact,
                                  query_marginals_gibbs, unnormalized_prior, world_log_weight)
from tablescene.knowledge.logic import And, Implies, Not, Or, evaluate, simplify, substitute, variables

LOG9 = math.log(9.0)


def micro(kb, *rules):
    return kb.subset(*rules)


def one_object(stable=True, hover=False, extra=()):
    ev = EvidenceSet(["A"])
    ev.set("stable", ("A",), stable)
    ev.set("hover", ("A",), hover)
    for atom, value in extra:
        ev.set(*atom, value)
    return ev


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------

def test_parse_precedence():
    f = parse_formula("a(x) ^ b(x) v c(x) -> d(x)")
    assert isinstance(f, Implies)
    assert isinstance(f.antecedent, Or)
    assert isinstance(f.antecedent.operands[0], And)


def test_implication_right_associative():
    f = parse_formula("a(x) -> b(x) -> c(x)")
    assert isinstance(f.consequent, Implies)


def test_negation_binds_tightest():
    f = parse_formula("!a(x) ^ b(x)")
    assert isinstance(f, And) and isinstance(f.operands[0], Not)


def test_formula_str_round_trip(kb):
    for r in kb.rules:
        assert parse_formula(str(r.formula)) == r.formula


def test_parse_errors():
    for bad in ("a(x) ^", "a(x", "-> b(x)", "a(x) b(x)", ""):
        with pytest.raises(ValueError):
            parse_formula(bad)


def test_evaluate_and_substitute():
    f = parse_formula("p(o1) -> q(o1,o2)")
    g = substitute(f, {"o1": "A", "o2": "B"})
    assert str(g) == "p(A) -> q(A,B)"
    truth = {"p": True, "q": False}
    assert not evaluate(g, lambda a: truth[a.predicate])


def test_simplify_to_residual():
    f = parse_formula("hover(A) -> false(A) v hidden(A)")
    s = simplify(f, lambda a: True if a.predicate == "hover" else None)
    assert not isinstance(s, bool)
    assert simplify(f, lambda a: False if a.predicate == "hover" else None) is True


# ---------------------------------------------------------------------------
# knowledge base
# ---------------------------------------------------------------------------

def test_default_kb_weights(kb):
    assert len(kb.rules) == 16
    assert all(kb.rule(i).is_hard for i in range(1, 11))
    assert kb.rule("r11").weight == pytest.approx(0.8473, abs=1e-4)
    assert kb.rule("r16").weight == pytest.approx(2.1972, abs=1e-4)
    for i, (p1, p2) in {11: (0.7, 0.3), 12: (0.9, 0.1), 13: (0.9, 0.1), 14: (0.9, 0.1),
                        15: (0.7, 0.3), 16: (0.9, 0.1)}.items():
        assert kb.rule(i).weight == pytest.approx(math.log(p1 / p2), abs=1e-15)


def test_default_vocabulary(kb):
    assert [p.name for p in kb.evidence_predicates] == ["stable", "table", "contact", "intersect", "hover", "higher"]
    assert [p.name for p in kb.query_predicates] == ["supportive", "supported", "hidden", "false"]


def test_r10_body(kb):
    assert kb.rule(10).formula == parse_formula(
        "stable(o1) ^ stable(o2) ^ contact(o1,o2) ^ higher(o1,o2) -> supportive(o2) ^ supported(o1)")


def test_kb_text_round_trip(kb):
    again = parse_knowledge_base(kb.to_text())
    assert [(r.weight, r.formula) for r in again.rules] == [(r.weight, r.formula) for r in kb.rules]


def test_kb_parse_error_has_line_number():
    with pytest.raises(ParseError) as exc:
        parse_knowledge_base("HARD !higher(o1,o1)\n\nHARD stable(o1) ^\n", source="kb.txt")
    assert exc.value.line == 3
    assert "kb.txt:3" in str(exc.value)


@pytest.mark.parametrize("text", ["HARD stable(A)", "HARD nosuch(o1)", "HARD stable(o1,o2)", "0.5x stable(o1)"])
def test_kb_rejects_bad_rules(text):
    with pytest.raises(ParseError):
        parse_knowledge_base(text)


# ---------------------------------------------------------------------------
# grounding
# ---------------------------------------------------------------------------

def test_r4_grounding_count(kb):
    ev = EvidenceSet(["A", "B", "C"])
    gn = ground(kb.subset("r4"), ev.constants, ev)
    assert len(gn.instances) == 9


def test_three_constants_twelve_query_atoms(kb):
    ev = EvidenceSet(["A", "B", "C"])
    assert ground(kb, ev.constants, ev).n_atoms == 12


def test_evidence_fixed_instance(kb):
    ev = EvidenceSet(["A"])
    ev.set("intersect", ("A", "A"), False)
    gn = ground(kb.subset("r2"), ev.constants, ev)
    assert [g.fixed for g in gn.instances] == [True]


def test_unknown_predicate_or_constant(kb):
    ev = EvidenceSet(["A"])
    ev.set("levitating", ("A",), True)
    with pytest.raises(SchemaError):
        ground(kb, ["A"], ev)
    ev = EvidenceSet(["A", "Z"])
    ev.set("stable", ("Z",), True)
    with pytest.raises(SchemaError):
        ground(kb, ["A"], ev)


def test_world_log_weight_r16(kb):
    gn = ground(micro(kb, "r16"), ["A"], one_object())
    assert world_log_weight(gn, gn.world({"false(A)": False})) == pytest.approx(LOG9, abs=1e-15)
    assert world_log_weight(gn, gn.world({"false(A)": True})) == 0.0


def test_world_log_weight_no_soft_rules(kb):
    gn = ground(micro(kb, "r1", "r2", "r3"), ["A"], one_object())
    assert world_log_weight(gn, gn.world()) == 0.0


def _naive_world_weight(kb, constants, evidence, world_names):
    """Recount true groundings per rule by direct evaluation."""
    total = 0.0
    for rule in kb.rules:
        vs = variables(rule.formula)
        for binding in itertools.product(constants, repeat=len(vs)):
            g = substitute(rule.formula, dict(zip(vs, binding)))

            def value(a):
                name = f"{a.predicate}({','.join(a.args)})"
                if name in world_names:
                    return world_names[name]
                return evidence.get(a.predicate, a.args, False)

            sat = bool(evaluate(g, value))
            if rule.is_hard and not sat:
                return -math.inf
            if not rule.is_hard and sat:
                total += rule.weight
    return total


def test_world_log_weight_matches_naive_recount(kb):
    ev = EvidenceSet(["table", "A", "B"])
    for c in ev.constants:
        ev.set("stable", (c,), True)
    ev.set("table", ("table",), True)
    for x, y in (("table", "A"), ("A", "B")):
        ev.set("contact", (x, y), True)
        ev.set("contact", (y, x), True)
    for x, y in (("A", "table"), ("B", "table"), ("B", "A")):
        ev.set("higher", (x, y), True)
    gn = ground(kb, ev.constants, ev)
    rng = np.random.default_rng(3)
    names = gn.atom_names
    for _ in range(200):
        w = rng.random(gn.n_atoms) < 0.5
        expected = _naive_world_weight(kb, ev.constants, ev, dict(zip(names, w)))
        got = world_log_weight(gn, w)
        if expected == -math.inf:
            assert got == -math.inf
        else:
            assert got == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# prior and exact marginals
# ---------------------------------------------------------------------------

def test_prior_r16_is_log10(kb):
    ev = EvidenceSet(["A"], {("stable", ("A",)): True})
    gn = ground(micro(kb, "r16").pruned(), ["A"], ev)
    assert gn.n_atoms == 1
    assert unnormalized_prior(gn) == pytest.approx(math.log(10.0), abs=1e-12)
    assert unnormalized_prior(gn, "map") == pytest.approx(LOG9, abs=1e-12)


def test_prior_counts_unconstrained_atoms(kb):
    # the other three query atoms of the full vocabulary each double the world count
    gn = ground(micro(kb, "r16"), ["A"], one_object())
    assert unnormalized_prior(gn) == pytest.approx(math.log(80.0), abs=1e-12)


def test_prior_no_soft_rules_counts_worlds(kb):
    # four free query atoms, none constrained
    gn = ground(micro(kb, "r1"), ["A"], one_object())
    assert unnormalized_prior(gn) == pytest.approx(math.log(16.0), abs=1e-12)


def test_prior_infeasible(kb):
    ev = one_object()
    ev.set("higher", ("A", "A"), True)
    gn = ground(kb, ["A"], ev)
    assert unnormalized_prior(gn) == -math.inf
    with pytest.raises(InfeasibleModelError) as exc:
        query_marginals_exact(gn)
    assert "r1(A)" in exc.value.violated


def test_r16_marginal(kb):
    qr = query_marginals_exact(ground(micro(kb, "r16"), ["A"], one_object()))
    assert qr["false(A)"] == pytest.approx(0.1, abs=1e-12)
    assert qr["hidden(A)"] == 0.5


def test_r13_hovering_marginals(kb):
    qr = query_marginals_exact(ground(micro(kb, "r13"), ["A"], one_object(hover=True)))
    assert qr["false(A)"] == pytest.approx(18 / 28, abs=1e-12)
    assert qr["hidden(A)"] == pytest.approx(18 / 28, abs=1e-12)


def test_r11_with_supported_fixed(kb):
    ev = one_object(extra=[(("supported", ("A",)), True)])
    qr = query_marginals_exact(ground(micro(kb, "r11"), ["A"], ev))
    assert qr["hidden(A)"] == pytest.approx(0.3, abs=1e-12)
    assert qr["supported(A)"] == 1.0


@pytest.mark.parametrize("p", [0.7, 0.9])
def test_single_soft_implication_gives_p(p):
    kb = KnowledgeBase.with_predicates()
    kb.add_rule(math.log(p / (1 - p)), "stable(o1) -> supportive(o1)")
    qr = query_marginals_exact(ground(kb, ["A"], one_object()))
    assert qr["supportive(A)"] == pytest.approx(p, abs=1e-12)


def test_zero_weight_rule_changes_nothing(kb):
    ev = reference_tabletop_evidence()
    consts = ev.constants[:4]
    sub = EvidenceSet(consts, {k: v for k, v in ev.atoms.items() if set(k[1]) <= set(consts)})
    base = query_marginals_exact(ground(kb, consts, sub))
    kb2 = kb.subset(*range(1, 17))
    kb2.add_rule(0.0, "hover(o1) -> supportive(o1)")
    again = query_marginals_exact(ground(kb2, consts, sub))
    assert base.max_abs_diff(again) < 1e-12


def test_relabeling_invariance(kb):
    ev = reference_tabletop_evidence()
    keep = ["table", "O1", "O6", "O5"]
    sub = EvidenceSet(keep, {k: v for k, v in ev.atoms.items() if set(k[1]) <= set(keep)})
    rename = {"table": "table", "O1": "X", "O6": "Y", "O5": "Z"}
    ren = EvidenceSet([rename[c] for c in reversed(keep)],
                      {(p, tuple(rename[a] for a in args)): v for (p, args), v in sub.atoms.items()})
    a = query_marginals_exact(ground(kb, sub.constants, sub))
    b = query_marginals_exact(ground(kb, ren.constants, ren))
    for name, v in a.marginals.items():
        pred, arg = name[:-1].split("(")
        assert b.marginals[f"{pred}({rename[arg]})"] == pytest.approx(v, abs=1e-12)


def test_capacity_error(kb):
    ev = reference_tabletop_evidence()
    gn = ground(kb, ev.constants, ev)
    assert gn.n_atoms == 28
    with pytest.raises(CapacityError):
        query_marginals_exact(gn)
    assert infer(gn, "auto", sweeps=5000, burn_in=500).method == "gibbs"


def test_exact_matches_oracle_on_three_objects(kb):
    ev = reference_tabletop_evidence()
    keep = ["table", "O3", "O4", "O5"]
    sub = EvidenceSet(keep, {k: v for k, v in ev.atoms.items() if set(k[1]) <= set(keep)})
    a = query_marginals_exact(ground(kb, keep, sub))
    b = oracle_query_marginals(kb, keep, sub)
    assert list(a.marginals) == list(b.marginals)
    assert a.max_abs_diff(b) <= 1e-12
    assert unnormalized_prior(ground(kb, keep, sub)) == pytest.approx(oracle_prior(kb, keep, sub), abs=1e-9)


# ---------------------------------------------------------------------------
# Gibbs
# ---------------------------------------------------------------------------

def test_gibbs_r16(kb):
    qr = query_marginals_gibbs(ground(micro(kb, "r16"), ["A"], one_object()), seed=1)
    assert qr["false(A)"] == pytest.approx(0.1, abs=0.01)
    assert qr.samples == 100_000 - 1_000


def test_gibbs_zero_rule_network():
    kb = KnowledgeBase.with_predicates()
    qr = query_marginals_gibbs(ground(kb, ["A", "B"], EvidenceSet(["A", "B"])), seed=2)
    for v in qr.marginals.values():
        assert v == pytest.approx(0.5, abs=0.01)


def test_gibbs_deterministic(kb):
    gn = ground(kb, ["table", "A"], one_object(extra=[(("table", ("table",)), True)]))
    a = query_marginals_gibbs(gn, sweeps=3000, burn_in=100, seed=5)
    b = query_marginals_gibbs(gn, sweeps=3000, burn_in=100, seed=5)
    assert a.marginals == b.marginals


def test_gibbs_requires_sweeps_above_burn_in(kb):
    gn = ground(micro(kb, "r16"), ["A"], one_object())
    with pytest.raises(ValueError):
        query_marginals_gibbs(gn, sweeps=10, burn_in=10)


# ---------------------------------------------------------------------------
# decisions
# ---------------------------------------------------------------------------

def test_classify_queries():
    qr = QueryResult({"false(O6)": 0.912, "false(O0)": 0.046, "false(O2)": 0.518}, "exact")
    d = classify_queries(qr)
    assert d == {"false(O6)": Decision.TRUE, "false(O0)": Decision.FALSE, "false(O2)": Decision.UNDECIDED}
    with pytest.raises(ValueError):
        classify_queries(qr, 0.6, 0.4)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_marginals_in_unit_interval_and_match_oracle(seed):
    kb = default_knowledge_base()
    rng = np.random.default_rng(seed)
    consts = ["table", "A", "B"]
    ev = EvidenceSet(consts)
    ev.set("table", ("table",), True)
    ev.set("stable", ("table",), True)
    for c in consts[1:]:
        ev.set("stable", (c,), bool(rng.random() < 0.5))
        ev.set("hover", (c,), bool(rng.random() < 0.3))
    if rng.random() < 0.5:
        ev.set("intersect", ("A", "B"), True)
        ev.set("intersect", ("B", "A"), True)
    gn = ground(kb, consts, ev)
    try:
        qr = query_marginals_exact(gn)
    except InfeasibleModelError:
        assert oracle_prior(kb, consts, ev) == -math.inf
        return
    assert all(0.0 <= v <= 1.0 for v in qr.marginals.values())
    assert qr.max_abs_diff(oracle_query_marginals(kb, consts, ev)) <= 1e-12
