"""Markov-logic knowledge base, grounding and inference."""
from .kb import (DEFAULT_KB_TEXT, DEFAULT_PREDICATES, HARD, KnowledgeBase, Predicate, PredicateKind, Rule,
                 default_knowledge_base, load_knowledge_base, parse_knowledge_base)
from .grounding import GroundInstance, GroundNetwork, ground, world_log_weight
from .inference import (EXACT_ATOM_CAP, Decision, QueryResult, classify_queries, compile_network, infer,
                        query_marginals_exact, query_marginals_gibbs, unnormalized_prior)
from .logic import parse_formula

__all__ = [
    "DEFAULT_KB_TEXT", "DEFAULT_PREDICATES", "HARD", "KnowledgeBase", "Predicate", "PredicateKind", "Rule",
    "default_knowledge_base", "load_knowledge_base", "parse_knowledge_base", "GroundInstance",
    "GroundNetwork", "ground", "world_log_weight", "EXACT_ATOM_CAP", "Decision", "QueryResult",
    "classify_queries", "compile_network", "infer", "query_marginals_exact", "query_marginals_gibbs",
    "unnormalized_prior", "parse_formula",
]
