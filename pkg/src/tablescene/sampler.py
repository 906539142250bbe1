"""Knowledge-supervised data-driven Metropolis-Hastings over scene poses.

Each iteration perturbs one measured object (round-robin), weights the
candidates by that object's keypoint likelihood, proposes the best one
and accepts the resulting scene by the Metropolis-Hastings rule with the
likelihood-share proposal probabilities.  The prior of every candidate
scene comes from grounding the knowledge base on its fresh evidence.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import NothingToSampleError
from .geometry import GeometryParams, Pose6D, extract_evidence, quat_from_axis_angle, quat_multiply
from .knowledge import ground, unnormalized_prior
from .knowledge.kb import KnowledgeBase
from .scene import SceneModel
from .sensing import NoiseParams, object_log_likelihood, scene_log_likelihood


@dataclass(frozen=True)
class ProposalParams:
    n: int = 10
    sigma_trans: float = 0.01
    sigma_rot: float = 0.05

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one proposal per iteration")
        if not (self.sigma_trans > 0 and self.sigma_rot > 0):
            raise ValueError("proposal sigmas must be positive")


@dataclass
class ChainState:
    scene: SceneModel
    log_likelihood: float
    log_prior: float
    t: int = 0

    @property
    def log_posterior(self) -> float:
        return self.log_likelihood + self.log_prior


@dataclass
class Proposal:
    pose: Pose6D
    log_q_forward: float
    log_q_backward: float
    candidates: list[Pose6D]
    log_weights: np.ndarray  # [current, candidate 1..n]


@dataclass
class TraceRecord:
    t: int
    object: int
    p_accept: float
    accepted: bool
    log_likelihood: float
    log_prior: float
    log_posterior: float
    best_log_posterior: float

    def to_dict(self) -> dict:
        return {
            "t": self.t, "object": self.object, "p_accept": self.p_accept, "accepted": self.accepted,
            "log_likelihood": self.log_likelihood, "log_prior": self.log_prior,
            "log_posterior": self.log_posterior, "best_log_posterior": self.best_log_posterior,
        }


@dataclass
class ChainTrace:
    records: list[TraceRecord] = field(default_factory=list)
    best_scene: SceneModel | None = None
    best_log_posterior: float = -math.inf

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), allow_nan=True) + "\n" for r in self.records)


@dataclass
class ChainResult:
    map_scene: SceneModel
    map_log_posterior: float
    trace: ChainTrace
    final_state: ChainState


class PriorCache:
    """Memoizes the log prior per distinct evidence set."""

    def __init__(self, kb: KnowledgeBase, geo: GeometryParams = GeometryParams(), mode: str = "marginal"):
        self.kb = kb
        self.geo = geo
        self.mode = mode
        self._cache: dict = {}

    def __call__(self, scene: SceneModel) -> float:
        ev = extract_evidence(scene, self.geo)
        key = ev.key()
        if key not in self._cache:
            self._cache[key] = unnormalized_prior(ground(self.kb, ev.constants, ev), self.mode)
        return self._cache[key]


def log_prior(scene: SceneModel, kb: KnowledgeBase, geo: GeometryParams = GeometryParams(),
              mode: str = "marginal") -> float:
    ev = extract_evidence(scene, geo)
    return unnormalized_prior(ground(kb, ev.constants, ev), mode)


def log_posterior(scene, measurements, kb, geo_params=GeometryParams(), cams=None,
                  noise: NoiseParams = NoiseParams(), prior_mode: str = "marginal") -> float:
    """Log-likelihood plus log unnormalized prior (partition function omitted)."""
    lp = log_prior(scene, kb, geo_params, prior_mode)
    if lp == -math.inf:
        return -math.inf
    return scene_log_likelihood(measurements, scene, cams or {}, noise) + lp


def perturb_pose(pose: Pose6D, sigma_trans: float, sigma_rot: float, rng) -> Pose6D:
    """Gaussian translation noise and an axis-angle rotation about a uniform axis."""
    dt = rng.normal(0.0, sigma_trans, 3)
    axis = rng.normal(size=3)
    angle = rng.normal(0.0, sigma_rot)
    dq = quat_from_axis_angle(axis, angle)
    return Pose6D(pose.translation + dt, quat_multiply(dq, pose.rotation))


def proposal_log_probs(log_w_current: float, log_w_candidates) -> tuple[int, float, float]:
    """Pick the best candidate; return (index, log Q forward, log Q backward).

    Both probabilities share one denominator: the summed weight of all
    candidates plus the current estimate.
    """
    lw = np.asarray(log_w_candidates, dtype=float)
    denom = float(logsumexp(np.concatenate([[log_w_current], lw])))
    best = int(np.argmax(lw))
    return best, float(lw[best] - denom), float(log_w_current - denom)


def propose(state: ChainState, object_id: int, params: ProposalParams, measurements, cams,
            noise: NoiseParams, rng) -> Proposal:
    m = measurements[object_id]
    current = state.scene.pose(object_id)
    cands = [perturb_pose(current, params.sigma_trans, params.sigma_rot, rng) for _ in range(params.n)]
    lw0 = object_log_likelihood(m, current, cams, noise)
    lw = np.array([object_log_likelihood(m, c, cams, noise) for c in cands])
    best, lqf, lqb = proposal_log_probs(lw0, lw)
    return Proposal(cands[best], lqf, lqb, cands, np.concatenate([[lw0], lw]))


def acceptance_probability(log_post_new: float, log_post_old: float, log_q_forward: float,
                           log_q_backward: float) -> float:
    if log_post_new == -math.inf:
        return 0.0
    if log_post_old == -math.inf:
        return 1.0
    log_ratio = log_post_new - log_post_old + log_q_backward - log_q_forward
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


def mh_accept(log_post_new, log_post_old, log_q_forward, log_q_backward, rng) -> bool:
    p_a = acceptance_probability(log_post_new, log_post_old, log_q_forward, log_q_backward)
    return bool(rng.random() < p_a)


def _as_dict(measurements):
    if isinstance(measurements, dict):
        return dict(measurements)
    return {m.object_id: m for m in measurements}


def run_chain(initial: SceneModel, measurements, kb: KnowledgeBase, cams, iterations: int = 15, seed=0,
              params: ProposalParams = ProposalParams(), geo: GeometryParams = GeometryParams(),
              noise: NoiseParams = NoiseParams(), prior_mode: str = "marginal") -> ChainResult:
    """Run the chain and return the best scene visited with its trace."""
    meas = _as_dict(measurements)
    order = [i for i in initial.ids if i in meas]
    if not order:
        raise NothingToSampleError("no scene object has a measurement")
    rng = np.random.default_rng(seed)
    prior = PriorCache(kb, geo, prior_mode)

    state = ChainState(initial, scene_log_likelihood(meas, initial, cams, noise), prior(initial), 0)
    trace = ChainTrace(best_scene=initial, best_log_posterior=state.log_posterior)
    for t in range(iterations):
        oid = order[t % len(order)]
        prop = propose(state, oid, params, meas, cams, noise, rng)
        cand_scene = state.scene.with_pose(oid, prop.pose)
        cand_lp = prior(cand_scene)
        cand_ll = scene_log_likelihood(meas, cand_scene, cams, noise)
        cand_post = cand_ll + cand_lp if cand_lp > -math.inf else -math.inf
        p_a = acceptance_probability(cand_post, state.log_posterior, prop.log_q_forward, prop.log_q_backward)
        accepted = bool(rng.random() < p_a)
        if accepted:
            state = ChainState(cand_scene, cand_ll, cand_lp, t + 1)
        else:
            state = ChainState(state.scene, state.log_likelihood, state.log_prior, t + 1)
        if state.log_posterior > trace.best_log_posterior:
            trace.best_log_posterior = state.log_posterior
            trace.best_scene = state.scene
        trace.records.append(TraceRecord(t, oid, p_a, accepted, state.log_likelihood, state.log_prior,
                                         state.log_posterior, trace.best_log_posterior))
    return ChainResult(trace.best_scene, trace.best_log_posterior, trace, state)
