"""End-to-end scene analysis: refine poses, infer queries, build the graph."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import RunConfig
from .errors import InfeasibleModelError
from .evidence import EvidenceSet
from .geometry import extract_evidence
from .knowledge import classify_queries, compile_network, ground, infer
from .knowledge.inference import QueryResult
from .sampler import ChainResult, run_chain
from .scene import SceneModel
from .scenegraph import SceneGraph, build_graph


@dataclass
class Analysis:
    chain: ChainResult | None
    scene: SceneModel
    evidence: EvidenceSet
    marginals: QueryResult
    decisions: dict
    graph: SceneGraph


def check_feasible(scene: SceneModel, kb, cfg: RunConfig) -> None:
    ev = extract_evidence(scene, cfg.geometry)
    cn = compile_network(ground(kb, ev.constants, ev))
    if not cn.feasible:
        raise InfeasibleModelError("evidence of the initial scene violates hard rules", cn.violated)


def infer_scene(scene: SceneModel, kb, cfg: RunConfig = RunConfig(), seed=None):
    ev = extract_evidence(scene, cfg.geometry)
    gn = ground(kb, ev.constants, ev)
    qr = infer(gn, cfg.inference_mode, cfg.cap, cfg.sweeps, cfg.burn_in, cfg.hard_cap_weight,
               cfg.seed if seed is None else seed)
    return ev, qr


def analyze_scene(initial: SceneModel, measurements, kb, cams, cfg: RunConfig = RunConfig()) -> Analysis:
    """Run the chain, then infer and threshold the queries on its MAP scene."""
    check_feasible(initial, kb, cfg)
    chain = None
    scene = initial
    if measurements and cfg.iterations > 0:
        chain = run_chain(initial, measurements, kb, cams, cfg.iterations, cfg.seed, cfg.proposals,
                          cfg.geometry, cfg.noise, cfg.prior_mode)
        scene = chain.map_scene
        if not math.isfinite(chain.map_log_posterior):
            raise InfeasibleModelError("no feasible scene was visited", [])
    ev, qr = infer_scene(scene, kb, cfg)
    decisions = classify_queries(qr, cfg.lo, cfg.hi)
    graph = build_graph(scene, ev, decisions, qr)
    return Analysis(chain, scene, ev, qr, decisions, graph)
