"""Initial pose hypotheses from 3D-3D keypoint correspondences.

Hypotheses come from random triples, are grouped by leader clustering
and refined with RANSAC.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTripleError, InsufficientDataError, RefinementFailedError, SchemaError
from .geometry import Pose6D, quat_angle

MIN_TRIANGLE_AREA = 1e-9

DEFAULT_ITERATIONS = 50
DEFAULT_POS_EPS = 0.02
DEFAULT_ROT_EPS = 10.0
DEFAULT_INLIER_EPS = 0.01
DEFAULT_RANSAC_ROUNDS = 100


@dataclass(frozen=True)
class Correspondence3D:
    model_point: np.ndarray
    scene_point: np.ndarray
    matched_object: int

    def __post_init__(self):
        m = np.asarray(self.model_point, dtype=float).reshape(3)
        s = np.asarray(self.scene_point, dtype=float).reshape(3)
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise SchemaError("correspondence coordinates must be finite")
        object.__setattr__(self, "model_point", m)
        object.__setattr__(self, "scene_point", s)


@dataclass
class PoseHypothesis:
    pose: Pose6D
    inlier_count: int = 0
    source_triple: tuple[int, ...] = ()


@dataclass
class Cluster:
    representative: PoseHypothesis
    members: list[PoseHypothesis] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)


def _arrays(corrs):
    model = np.array([c.model_point for c in corrs], dtype=float).reshape(-1, 3)
    scene = np.array([c.scene_point for c in corrs], dtype=float).reshape(-1, 3)
    return model, scene


def fit_rigid(model, scene) -> Pose6D:
    """Least-squares rotation and translation taking ``model`` onto ``scene``."""
    model = np.asarray(model, dtype=float)
    scene = np.asarray(scene, dtype=float)
    cm, cs = model.mean(axis=0), scene.mean(axis=0)
    H = (model - cm).T @ (scene - cs)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    if d == 0:
        d = 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return Pose6D.from_matrix(R, cs - R @ cm)


def triangle_area(p) -> float:
    p = np.asarray(p, dtype=float)
    return 0.5 * float(np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])))


def _spans_plane(points) -> bool:
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        return False
    c = p - p.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    # second singular value measures extent off the best-fit line
    return bool(s[0] * s[1] > 2.0 * MIN_TRIANGLE_AREA)


def pose_from_triple(c1: Correspondence3D, c2: Correspondence3D, c3: Correspondence3D) -> Pose6D:
    model, scene = _arrays([c1, c2, c3])
    if triangle_area(model) <= MIN_TRIANGLE_AREA:
        raise DegenerateTripleError("model points of the triple are collinear or repeated")
    return fit_rigid(model, scene)


def count_inliers(pose: Pose6D, model, scene, inlier_eps: float) -> np.ndarray:
    err = np.linalg.norm(pose.apply(model) - scene, axis=1)
    return err < inlier_eps


def _group(corrs) -> dict[int, list[Correspondence3D]]:
    if isinstance(corrs, dict):
        return {k: list(v) for k, v in corrs.items()}
    out: dict[int, list[Correspondence3D]] = {}
    for c in corrs:
        out.setdefault(c.matched_object, []).append(c)
    return out


def generate_hypotheses(corrs, iterations: int = DEFAULT_ITERATIONS, seed=0,
                        inlier_eps: float = DEFAULT_INLIER_EPS) -> dict[int, list[PoseHypothesis]]:
    """Up to ``iterations`` triple-based hypotheses per object."""
    groups = _group(corrs)
    ids = sorted(groups)
    streams = np.random.SeedSequence(seed).spawn(len(ids))
    out = {}
    for oid, ss in zip(ids, streams):
        cs = groups[oid]
        if len(cs) < 3:
            raise InsufficientDataError(f"object {oid} has {len(cs)} correspondences, need 3")
        rng = np.random.default_rng(ss)
        model, scene = _arrays(cs)
        hyps = []
        for _ in range(iterations):
            tri = tuple(int(i) for i in rng.choice(len(cs), size=3, replace=False))
            if triangle_area(model[list(tri)]) <= MIN_TRIANGLE_AREA:
                continue
            pose = fit_rigid(model[list(tri)], scene[list(tri)])
            n_in = int(count_inliers(pose, model, scene, inlier_eps).sum())
            hyps.append(PoseHypothesis(pose, n_in, tri))
        out[oid] = hyps
    return out


def _average(members: list[PoseHypothesis]) -> PoseHypothesis:
    w = np.array([max(h.inlier_count, 1) for h in members], dtype=float)
    t = (w[:, None] * np.array([h.pose.translation for h in members])).sum(axis=0) / w.sum()
    q0 = members[0].pose.rotation
    qs = np.array([h.pose.rotation if np.dot(h.pose.rotation, q0) >= 0 else -h.pose.rotation
                   for h in members])
    q = (w[:, None] * qs).sum(axis=0)
    return PoseHypothesis(Pose6D(t, q), int(max(h.inlier_count for h in members)),
                          members[0].source_triple)


def pose_distance(a: Pose6D, b: Pose6D) -> tuple[float, float]:
    """(translation distance in m, geodesic rotation distance in degrees)."""
    return (float(np.linalg.norm(a.translation - b.translation)),
            math.degrees(quat_angle(a.rotation, b.rotation)))


def cluster_hypotheses(H, pos_eps: float = DEFAULT_POS_EPS, rot_eps: float = DEFAULT_ROT_EPS) -> list[Cluster]:
    """Greedy leader clustering; clusters sorted by decreasing size."""
    clusters: list[Cluster] = []
    for h in H:
        for c in clusters:
            dt, dr = pose_distance(h.pose, c.representative.pose)
            if dt <= pos_eps and dr <= rot_eps:
                c.members.append(h)
                c.representative = _average(c.members)
                break
        else:
            clusters.append(Cluster(PoseHypothesis(h.pose, h.inlier_count, h.source_triple), [h]))
    # stable sort keeps discovery order among equal sizes
    return sorted(clusters, key=lambda c: -c.size)


def ransac_refine(hyp: PoseHypothesis, corrs, inlier_eps: float = DEFAULT_INLIER_EPS,
                  rounds: int = DEFAULT_RANSAC_ROUNDS, seed=0) -> PoseHypothesis:
    cs = list(corrs)
    if len(cs) < 3:
        raise InsufficientDataError("RANSAC needs at least 3 correspondences")
    model, scene = _arrays(cs)
    rng = np.random.default_rng(seed)

    best_pose = hyp.pose
    best_mask = count_inliers(hyp.pose, model, scene, inlier_eps)
    for _ in range(rounds):
        tri = rng.choice(len(cs), size=3, replace=False)
        if triangle_area(model[tri]) <= MIN_TRIANGLE_AREA:
            continue
        pose = fit_rigid(model[tri], scene[tri])
        mask = count_inliers(pose, model, scene, inlier_eps)
        if mask.sum() > best_mask.sum():
            best_pose, best_mask = pose, mask

    if best_mask.sum() < 3 or not _spans_plane(model[best_mask]):
        raise RefinementFailedError("best inlier set is too small or degenerate to refit")
    refit = fit_rigid(model[best_mask], scene[best_mask])
    refit_mask = count_inliers(refit, model, scene, inlier_eps)
    if refit_mask.sum() >= best_mask.sum():
        best_pose, best_mask = refit, refit_mask
    return PoseHypothesis(best_pose, int(best_mask.sum()), hyp.source_triple)


def estimate_poses(corrs, iterations: int = DEFAULT_ITERATIONS, pos_eps: float = DEFAULT_POS_EPS,
                   rot_eps: float = DEFAULT_ROT_EPS, inlier_eps: float = DEFAULT_INLIER_EPS,
                   rounds: int = DEFAULT_RANSAC_ROUNDS, seed=0) -> dict[int, PoseHypothesis]:
    """Best refined hypothesis per object: largest cluster, then RANSAC."""
    groups = _group(corrs)
    hyps = generate_hypotheses(groups, iterations, seed, inlier_eps)
    out = {}
    for k, oid in enumerate(sorted(groups)):
        clusters = cluster_hypotheses(hyps[oid], pos_eps, rot_eps)
        if not clusters:
            raise RefinementFailedError(f"no usable hypothesis for object {oid}")
        lead = max(clusters[:3], key=lambda c: (c.size, c.representative.inlier_count))
        out[oid] = ransac_refine(lead.representative, groups[oid], inlier_eps, rounds,
                                 seed=np.random.SeedSequence([seed, k]).generate_state(1)[0])
    return out
