"""Synthetic table-top scenarios and brute-force reference oracles.

The generator builds a true scene per scenario kind, samples keypoints on
the box surfaces, projects them through a two-camera rig and perturbs the
true poses into an initial estimate.  The oracles are deliberately naive
second implementations used only to cross-check the main code.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, InfeasibleModelError, PlacementError, SchemaError, UsageError
from .estimation import Correspondence3D
from .evidence import TABLE, EvidenceSet, atom_name, object_constant
from .geometry import (CORNER_SIGNS, GeometryParams, Obb, PairRelation, Pose6D, classify_pair, extract_evidence,
                       quat_from_axis_angle, quat_multiply, sat_separation)
from .knowledge.inference import EXACT_ATOM_CAP, QueryResult
from .knowledge.logic import And, Atom, Implies, Not, Or
from .sampler import perturb_pose
from .scene import SceneModel, SceneObject, default_table
from .scenegraph import SceneGraph, build_graph, emit_json
from .sensing import (BEHIND_CAMERA_SQ_RESIDUAL, CameraModel, Measurement, NoiseParams, View,
                      project_points, residuals)

KINDS = ("FlatLayout", "Stack", "Lean", "HiddenSupport", "FalseEstimate", "Mixed")
FALSE_VARIANTS = ("intersect", "hover")
MAX_PLACEMENT_ATTEMPTS = 1000
# clearance between objects that must not touch, in multiples of contact_eps
CLEARANCE_FACTOR = 3.0


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "FlatLayout"
    objects: int = 3
    extent_min: float = 0.02
    extent_max: float = 0.05
    keypoints: int = 30
    noise_px: float = 1.0
    init_sigma_trans: float = 0.001
    init_sigma_rot: float = 0.003
    variant: str = "intersect"
    region: float = 0.25
    corr_noise: float = 0.001
    outlier_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown scenario kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.objects < 1:
            raise UsageError("object count must be at least 1")
        if self.kind == "Mixed" and self.objects < 3:
            raise UsageError("a Mixed scenario needs at least 3 objects")
        if self.keypoints < 3:
            raise UsageError("need at least 3 keypoints per object")
        if not 0 < self.extent_min <= self.extent_max:
            raise UsageError("extent range must satisfy 0 < min <= max")
        if self.noise_px < 0 or self.init_sigma_trans < 0 or self.init_sigma_rot < 0 or self.corr_noise < 0:
            raise UsageError("noise levels must be non-negative")
        if not 0 <= self.outlier_fraction < 1:
            raise UsageError("outlier fraction must lie in [0, 1)")
        if self.variant not in FALSE_VARIANTS:
            raise UsageError(f"unknown false-estimate variant {self.variant!r}")
        if self.kind == "FalseEstimate" and self.variant == "intersect" and self.objects < 2:
            raise UsageError("the intersecting false-estimate variant needs at least 2 objects")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GroundTruth:
    scene: SceneModel
    graph: SceneGraph
    false_estimates: list[int] = field(default_factory=list)
    hidden_support: list[int] = field(default_factory=list)
    omitted: dict[int, int] = field(default_factory=dict)  # supported id -> omitted supporter id

    def flags(self, object_id: int) -> dict:
        return {"is_false_estimate": object_id in self.false_estimates,
                "has_hidden_support": object_id in self.hidden_support}


@dataclass
class Scenario:
    spec: ScenarioSpec
    truth: GroundTruth
    initial: SceneModel
    measurements: dict[int, Measurement]
    cameras: dict[str, CameraModel]
    keypoints: dict[int, np.ndarray]
    correspondences: list[Correspondence3D]

    @property
    def reported_truth(self) -> SceneModel:
        """True poses restricted to the objects present in the emitted scene."""
        scene = self.truth.scene
        for oid in self.truth.omitted.values():
            scene = scene.without(oid)
        return scene

    def to_dict(self) -> dict:
        t = self.truth
        return {
            "spec": self.spec.to_dict(),
            "truth": {
                "scene": t.scene.to_dict(),
                "graph": json.loads(emit_json(t.graph)),
                "flags": {str(o.id): t.flags(o.id) for o in t.scene.objects},
                "omitted": {str(k): v for k, v in sorted(t.omitted.items())},
            },
            "initial": self.initial.to_dict(),
            "measurements": [self.measurements[k].to_dict() for k in sorted(self.measurements)],
            "cameras": [self.cameras[k].to_dict(k) for k in sorted(self.cameras)],
            "correspondences": [
                {"object": c.matched_object, "model": c.model_point.tolist(), "scene": c.scene_point.tolist()}
                for c in self.correspondences
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def load_bundle(doc: dict):
    """Initial scene, measurements, cameras and correspondences of a scenario file."""
    try:
        initial = SceneModel.from_dict(doc["initial"])
        meas = {}
        for d in doc.get("measurements", []):
            m = Measurement.from_dict(d)
            meas[m.object_id] = m
        cams = {str(d["cam_id"]): CameraModel.from_dict(d) for d in doc.get("cameras", [])}
        corrs = [Correspondence3D(c["model"], c["scene"], int(c["object"]))
                 for c in doc.get("correspondences", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scenario: {exc}") from None
    return initial, meas, cams, corrs


# ---------------------------------------------------------------------------
# cameras and keypoints
# ---------------------------------------------------------------------------

def look_at(position, target, up=(0.0, 0.0, 1.0)) -> Pose6D:
    """Camera-to-table pose with z forward, x right and y down in the image."""
    p = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - p
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=float))
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return Pose6D.from_matrix(np.column_stack([x, y, z]), p)


def default_cameras(baseline: float = 0.10) -> dict[str, CameraModel]:
    target = (0.0, 0.0, 0.05)
    cams = {}
    for name, sx in (("left", -0.5), ("right", 0.5)):
        pose = look_at((sx * baseline, -0.7, 0.6), target)
        cams[name] = CameraModel(500.0, 500.0, 320.0, 240.0, pose)
    return cams


def sample_surface_points(half_extents, n: int, rng) -> np.ndarray:
    """Uniform points on the surface of an axis-aligned box centered at 0."""
    h = np.asarray(half_extents, dtype=float)
    areas = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]])
    areas = np.repeat(areas, 2)
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * h
    axis = face // 2
    sign = np.where(face % 2 == 0, -1.0, 1.0)
    pts[np.arange(n), axis] = sign * h[axis]
    return pts


def make_measurement(object_id: int, model_points, pose: Pose6D, cams, noise_px: float, rng) -> Measurement:
    views = {}
    for cam_id in sorted(cams):
        uv, _ = project_points(cams[cam_id], pose.apply(model_points))
        if noise_px > 0:
            uv = uv + rng.normal(0.0, noise_px, uv.shape)
        views[cam_id] = View(model_points, uv)
    return Measurement(object_id, views)


def make_correspondences(object_id: int, model_points, pose: Pose6D, noise: float, outlier_fraction: float,
                         rng, outlier_spread: float = 0.2) -> list[Correspondence3D]:
    scene_pts = pose.apply(model_points)
    if noise > 0:
        scene_pts = scene_pts + rng.normal(0.0, noise, scene_pts.shape)
    n_out = int(round(outlier_fraction * len(model_points)))
    if n_out:
        idx = rng.choice(len(model_points), size=n_out, replace=False)
        scene_pts[idx] = pose.translation + rng.uniform(-outlier_spread, outlier_spread, (n_out, 3))
    return [Correspondence3D(m, s, object_id) for m, s in zip(model_points, scene_pts)]


def offset_pose(pose: Pose6D, translation: float, rotation_deg: float, rng) -> Pose6D:
    """Move ``pose`` by exactly ``translation`` m and ``rotation_deg`` degrees in random directions."""
    d = rng.normal(size=3)
    d *= translation / np.linalg.norm(d)
    axis = rng.normal(size=3)
    q = quat_from_axis_angle(axis, math.radians(rotation_deg))
    return Pose6D(pose.translation + d, quat_multiply(q, pose.rotation))


# ---------------------------------------------------------------------------
# scene construction
# ---------------------------------------------------------------------------

def _yaw(angle: float):
    return quat_from_axis_angle((0.0, 0.0, 1.0), angle)


class _Builder:
    def __init__(self, spec: ScenarioSpec, rng, geo: GeometryParams):
        self.spec = spec
        self.rng = rng
        self.geo = geo
        self.clearance = CLEARANCE_FACTOR * geo.contact_eps
        self.boxes: dict[int, Obb] = {}

    def extents(self, lo=None, hi=None):
        lo = self.spec.extent_min if lo is None else lo
        hi = self.spec.extent_max if hi is None else hi
        return self.rng.uniform(lo, hi, 3)

    def clear_of(self, obb: Obb, ignore=()) -> bool:
        return all(sat_separation(obb, b) > self.clearance for k, b in self.boxes.items() if k not in ignore)

    def _attempt(self, make, what):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            obb = make()
            if obb is not None:
                return obb
        raise PlacementError(f"could not place {what} after {MAX_PLACEMENT_ATTEMPTS} attempts")

    def on_table(self, oid: int, h=None):
        r = self.spec.region

        def make():
            he = self.extents() if h is None else h
            c = (self.rng.uniform(-r, r), self.rng.uniform(-r, r), he[2])
            obb = Obb(Pose6D(c, _yaw(self.rng.uniform(-math.pi, math.pi))), he)
            return obb if self.clear_of(obb) else None

        self.boxes[oid] = self._attempt(make, f"object {oid} on the table")
        return self.boxes[oid]

    def on_top(self, oid: int, base_id: int):
        base = self.boxes[base_id]
        top_z = base.center[2] + base.half_extents[2]

        def make():
            he = self.extents()
            he[:2] = np.minimum(he[:2], base.half_extents[:2])
            shift = self.rng.uniform(-0.3, 0.3, 2) * base.half_extents[:2]
            c = base.pose.apply(np.array([shift[0], shift[1], 0.0]))
            c[2] = top_z + he[2]
            obb = Obb(Pose6D(c, _yaw(self.rng.uniform(-math.pi, math.pi))), he)
            return obb if self.clear_of(obb, ignore=(base_id,)) else None

        self.boxes[oid] = self._attempt(make, f"object {oid} on object {base_id}")
        return self.boxes[oid]

    def tilted(self, he):
        angle = self.rng.uniform(math.radians(20), math.radians(40)) * self.rng.choice([-1.0, 1.0])
        axis = np.array([math.cos(a := self.rng.uniform(0, math.pi)), math.sin(a), 0.0])
        q = quat_multiply(quat_from_axis_angle(axis, angle), _yaw(self.rng.uniform(-math.pi, math.pi)))
        return Pose6D((0.0, 0.0, 0.0), q)

    def leaning(self, oid: int, base_id: int):
        """An unstable box resting on the table and touching ``base_id``."""
        base = self.boxes[base_id]

        def make():
            he = self.extents()
            he[2] = min(he[2], base.half_extents[2])
            rot = self.tilted(he)
            low = np.min(Obb(rot, he).pose.apply(_corners(he))[:, 2])
            phi = self.rng.uniform(-math.pi, math.pi)
            d = np.array([math.cos(phi), math.sin(phi), 0.0])

            def at(s):
                c = base.center.copy()
                c[2] = -low
                return Obb(Pose6D(c + s * d, rot.rotation), he)

            lo, hi = 0.0, 1.0
            if sat_separation(at(hi), base) <= 0:
                return None
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if sat_separation(at(mid), base) > 0:
                    hi = mid
                else:
                    lo = mid
            obb = at(hi)
            if classify_pair(obb, base, self.geo) is not PairRelation.CONTACT:
                return None
            return obb if self.clear_of(obb, ignore=(base_id,)) else None

        self.boxes[oid] = self._attempt(make, f"leaning object {oid}")
        return self.boxes[oid]

    def hovering(self, oid: int, min_height: float = 0.05):
        r = self.spec.region

        def make():
            he = self.extents()
            rot = self.tilted(he)
            low = np.min(Obb(rot, he).pose.apply(_corners(he))[:, 2])
            z = -low + self.rng.uniform(min_height, 2 * min_height)
            c = (self.rng.uniform(-r, r), self.rng.uniform(-r, r), z)
            obb = Obb(Pose6D(c, rot.rotation), he)
            return obb if self.clear_of(obb) else None

        self.boxes[oid] = self._attempt(make, f"hovering object {oid}")
        return self.boxes[oid]

    def intersecting(self, oid: int, target_id: int):
        target = self.boxes[target_id]
        table = default_table()

        def make():
            he = self.extents()
            rot = self.tilted(he)
            top = target.center + np.array([0.0, 0.0, target.half_extents[2]])
            offset = self.rng.uniform(-0.5, 0.5, 3) * np.array([*target.half_extents[:2], 0.0])
            lift = self.rng.uniform(0.2, 0.6) * np.max(he)
            obb = Obb(Pose6D(top + offset + np.array([0.0, 0.0, lift]), rot.rotation), he)
            if sat_separation(obb, target) > -self.clearance:
                return None
            if sat_separation(obb, table) <= self.clearance:
                return None
            return obb if self.clear_of(obb, ignore=(target_id,)) else None

        self.boxes[oid] = self._attempt(make, f"intersecting object {oid}")
        return self.boxes[oid]


def _corners(he):
    return CORNER_SIGNS * np.asarray(he, dtype=float)


def _build_truth(spec: ScenarioSpec, rng, geo: GeometryParams):
    b = _Builder(spec, rng, geo)
    n = spec.objects
    false_ids, hidden_ids, omitted = [], [], {}
    if spec.kind == "FlatLayout":
        for i in range(1, n + 1):
            b.on_table(i)
    elif spec.kind == "Stack":
        b.on_table(1)
        for i in range(2, n + 1):
            b.on_top(i, i - 1)
    elif spec.kind == "Lean":
        b.on_table(1, h=np.array([spec.extent_max] * 2 + [1.5 * spec.extent_max]))
        if n >= 2:
            b.leaning(2, 1)
        for i in range(3, n + 1):
            b.on_table(i)
    elif spec.kind == "HiddenSupport":
        supporter = n + 1
        b.on_table(supporter)
        b.on_top(1, supporter)
        for i in range(2, n + 1):
            b.on_table(i)
        hidden_ids.append(1)
        omitted[1] = supporter
    elif spec.kind == "FalseEstimate":
        for i in range(1, n):
            b.on_table(i)
        if spec.variant == "intersect":
            target = int(rng.integers(1, n))
            b.intersecting(n, target)
        else:
            b.hovering(n)
        false_ids.append(n)
    elif spec.kind == "Mixed":
        b.on_table(1)
        b.on_top(2, 1)
        supporter = n + 1
        b.on_table(supporter)
        b.on_top(3, supporter)
        hidden_ids.append(3)
        omitted[3] = supporter
        for i in range(4, n + 1):
            b.on_table(i)
    objects = tuple(SceneObject(i, obb) for i, obb in sorted(b.boxes.items()))
    return SceneModel(objects=objects), false_ids, hidden_ids, omitted


def generate_scenario(spec: ScenarioSpec, geo: GeometryParams = GeometryParams(), cams=None) -> Scenario:
    root = np.random.SeedSequence(spec.seed)
    s_place, s_kp, s_obs, s_init, s_corr = (np.random.default_rng(s) for s in root.spawn(5))
    truth_scene, false_ids, hidden_ids, omitted = _build_truth(spec, s_place, geo)
    ev = extract_evidence(truth_scene, geo)
    graph = build_graph(truth_scene, ev)
    truth = GroundTruth(truth_scene, graph, false_ids, hidden_ids, omitted)

    cams = cams or default_cameras()
    reported = truth_scene
    for oid in omitted.values():
        reported = reported.without(oid)
    keypoints, meas, corrs = {}, {}, []
    initial = reported
    for o in reported.objects:
        kp = sample_surface_points(o.obb.half_extents, spec.keypoints, s_kp)
        keypoints[o.id] = kp
        meas[o.id] = make_measurement(o.id, kp, o.obb.pose, cams, spec.noise_px, s_obs)
        corrs.extend(make_correspondences(o.id, kp, o.obb.pose, spec.corr_noise, spec.outlier_fraction, s_corr))
        initial = initial.with_pose(o.id, perturb_pose(o.obb.pose, spec.init_sigma_trans,
                                                       spec.init_sigma_rot, s_init))
    return Scenario(spec, truth, initial, meas, cams, keypoints, corrs)


# ---------------------------------------------------------------------------
# reference evidence
# ---------------------------------------------------------------------------

def _touching(base: Obb, he, rotation, direction, z: float) -> Obb:
    """Slide a box along ``direction`` toward ``base`` until the two just touch."""
    d = np.asarray(direction, dtype=float)

    def at(s):
        c = np.array([base.center[0], base.center[1], z]) + s * d
        return Obb(Pose6D(c, rotation), he)

    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if sat_separation(at(mid), base) > 0:
            hi = mid
        else:
            lo = mid
    return at(hi)


def reference_tabletop_scene() -> SceneModel:
    """Six-object reference layout matching :func:`reference_tabletop_evidence`.

    O1-O3 and O5 are upright; O4 leans on O3; O6 is tilted and sunk
    into the top of O1; O5 floats above the table.
    """
    tilt4 = quat_multiply(quat_from_axis_angle((0.0, 1.0, 0.0), math.radians(-25.0)), _yaw(0.0))
    he4 = np.array([0.015, 0.025, 0.06])
    low4 = -np.min(Pose6D((0, 0, 0), tilt4).apply(_corners(he4))[:, 2])
    o1 = Obb(Pose6D((-0.20, 0.0, 0.04)), (0.05, 0.05, 0.04))
    o2 = Obb(Pose6D((0.10, 0.0, 0.03)), (0.04, 0.04, 0.03))
    o3 = Obb(Pose6D((0.17, 0.0, 0.035)), (0.03, 0.03, 0.035))
    o4 = _touching(o3, he4, tilt4, (1.0, 0.0, 0.0), low4)
    o5 = Obb(Pose6D((0.05, 0.20, 0.10), _yaw(0.3)), (0.03, 0.03, 0.02))
    tilt6 = quat_multiply(quat_from_axis_angle((1.0, 1.0, 0.0), math.radians(30.0)), _yaw(0.2))
    o6 = Obb(Pose6D((-0.19, 0.01, 0.085), tilt6), (0.025, 0.025, 0.025))
    boxes = [o1, o2, o3, o4, o5, o6]
    return SceneModel(objects=tuple(SceneObject(i + 1, b) for i, b in enumerate(boxes)))


def reference_tabletop_evidence() -> EvidenceSet:
    """Hand transcription of a six-object reference table-top scene.

    Objects 1, 2, 3 and 5 are stable, 4 and 6 are not; 2-3 and 3-4 touch;
    6 penetrates 1; 5 floats with nothing under it.
    """
    objs = [object_constant(i) for i in range(1, 7)]
    consts = [TABLE] + objs
    ev = EvidenceSet(consts)
    stable = {TABLE, "O1", "O2", "O3", "O5"}
    contacts = {("O2", "O3"), ("O3", "O4"), (TABLE, "O1"), (TABLE, "O2"), (TABLE, "O3"), (TABLE, "O4")}
    intersects = {("O1", "O6")}
    height = {TABLE: 0.0, "O1": 0.04, "O2": 0.03, "O3": 0.035, "O4": 0.061, "O5": 0.1, "O6": 0.085}
    for x in consts:
        ev.set("stable", (x,), x in stable)
        ev.set("table", (x,), x == TABLE)
        ev.set("hover", (x,), x == "O5")
        for y in consts:
            ev.set("contact", (x, y), (x, y) in contacts or (y, x) in contacts)
            ev.set("intersect", (x, y), (x, y) in intersects or (y, x) in intersects)
            ev.set("higher", (x, y), height[x] > height[y])
    return ev


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def _oracle_eval(f, value):
    if isinstance(f, Atom):
        return value(f)
    if isinstance(f, Not):
        return ~_oracle_eval(f.operand, value)
    if isinstance(f, And):
        out = _oracle_eval(f.operands[0], value)
        for g in f.operands[1:]:
            out = out & _oracle_eval(g, value)
        return out
    if isinstance(f, Or):
        out = _oracle_eval(f.operands[0], value)
        for g in f.operands[1:]:
            out = out | _oracle_eval(g, value)
        return out
    if isinstance(f, Implies):
        return ~_oracle_eval(f.antecedent, value) | _oracle_eval(f.consequent, value)
    raise TypeError(f"unknown formula node {f!r}")


def _oracle_vars(f, out):
    if isinstance(f, Atom):
        for a in f.args:
            if a[:1].islower() and a not in out:
                out.append(a)
    elif isinstance(f, Not):
        _oracle_vars(f.operand, out)
    elif isinstance(f, (And, Or)):
        for g in f.operands:
            _oracle_vars(g, out)
    elif isinstance(f, Implies):
        _oracle_vars(f.antecedent, out)
        _oracle_vars(f.consequent, out)
    return out


def _oracle_worlds(kb, constants, evidence: EvidenceSet, cap: int):
    constants = list(dict.fromkeys(constants))
    query = [p for p in kb.predicates.values() if p.kind.value == "query"]
    free = []
    for p in query:
        for args in itertools.product(constants, repeat=p.arity):
            if evidence.get(p.name, args) is None:
                free.append((p.name, args))
    if len(free) > cap:
        raise CapacityError(f"{len(free)} ground query atoms exceed the oracle cap of {cap}")
    n = len(free)
    worlds = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)
    col = {a: worlds[:, j] for j, a in enumerate(free)}
    ones = np.ones(len(worlds), dtype=bool)
    query_names = {p.name for p in query}

    logw = np.zeros(len(worlds))
    feasible = np.ones(len(worlds), dtype=bool)
    for rule in kb.rules:
        vs = _oracle_vars(rule.formula, [])
        for binding in itertools.product(constants, repeat=len(vs)):
            env = dict(zip(vs, binding))

            def value(atom, env=env):
                args = tuple(env.get(a, a) for a in atom.args)
                if atom.predicate in query_names and (atom.predicate, args) in col:
                    return col[(atom.predicate, args)]
                return ones if evidence.get(atom.predicate, args, False) else ~ones

            sat = np.broadcast_to(_oracle_eval(rule.formula, value), ones.shape)
            if rule.weight == math.inf:
                feasible &= sat
            else:
                logw += rule.weight * sat
    return free, worlds, logw, feasible


def oracle_query_marginals(kb, constants, evidence: EvidenceSet, cap: int = EXACT_ATOM_CAP) -> QueryResult:
    """Marginals by enumerating every world of every free query atom."""
    free, worlds, logw, feasible = _oracle_worlds(kb, constants, evidence, cap)
    if not feasible.any():
        raise InfeasibleModelError("no world satisfies the hard rules")
    lw = logw[feasible]
    p = np.exp(lw - logsumexp(lw)) @ worlds[feasible]
    consts = list(dict.fromkeys(constants))
    out = {}
    for pred in (p_ for p_ in kb.predicates.values() if p_.kind.value == "query"):
        for args in itertools.product(consts, repeat=pred.arity):
            key = (pred.name, args)
            if key in free:
                out[atom_name(*key)] = float(p[free.index(key)])
            else:
                out[atom_name(*key)] = 1.0 if evidence.get(*key) else 0.0
    return QueryResult(out, "oracle", feasible_worlds=int(feasible.sum()))


def oracle_prior(kb, constants, evidence: EvidenceSet, cap: int = EXACT_ATOM_CAP) -> float:
    """Log unnormalized prior by full enumeration."""
    _, _, logw, feasible = _oracle_worlds(kb, constants, evidence, cap)
    if not feasible.any():
        return -math.inf
    return float(logsumexp(logw[feasible]))


def _point_box_distance(points, obb: Obb) -> np.ndarray:
    local = (np.asarray(points) - obb.center) @ obb.axes
    excess = np.maximum(np.abs(local) - obb.half_extents, 0.0)
    return np.linalg.norm(excess, axis=1)


def box_samples(obb: Obb, density: float) -> np.ndarray:
    """Points on the edges, faces and interior of a box at spacing ``1/sqrt(density)``."""
    step = 1.0 / math.sqrt(density)
    h = obb.half_extents
    axes = [np.linspace(-hh, hh, max(2, int(math.ceil(2 * hh / step)) + 1)) for hh in h]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return obb.pose.apply(grid)


def oracle_classify_pair(a: Obb, b: Obb, params: GeometryParams = GeometryParams()) -> PairRelation:
    """Relation from dense point samples: penetration, then sampled distance."""
    pa = box_samples(a, params.sample_density)
    pb = box_samples(b, params.sample_density)
    if b.contains_points(pa).any() or a.contains_points(pb).any():
        return PairRelation.INTERSECT
    d = min(_point_box_distance(pa, b).min(), _point_box_distance(pb, a).min())
    return PairRelation.CONTACT if d <= params.contact_eps else PairRelation.NONE


def product_form_likelihood(m: Measurement, pose: Pose6D, cams, noise: NoiseParams = NoiseParams(),
                            dps: int = 50) -> float:
    """Keypoint likelihood as an explicit product of densities at extended precision."""
    with mpmath.workdps(dps):
        total = mpmath.mpf(1)
        for cam_id, v in m.views.items():
            cam = cams[cam_id]
            pc = cam.to_camera(pose.apply(v.model_points))
            for (X, Y, Z), (u, w) in zip(pc, v.observed):
                if Z <= 0:
                    total *= mpmath.exp(mpmath.mpf(-1e9))
                    continue
                pu = cam.fx * mpmath.mpf(X) / mpmath.mpf(Z) + cam.cx
                pv = cam.fy * mpmath.mpf(Y) / mpmath.mpf(Z) + cam.cy
                total *= mpmath.npdf(u, pu, noise.sigma_x) * mpmath.npdf(w, pv, noise.sigma_y)
        return float(mpmath.log(total))


def reprojection_rms(scene: SceneModel, measurements, cams, per_axis: bool = False):
    """RMS pixel reprojection error over all correspondences.

    The default is the root mean squared residual length; ``per_axis``
    returns the (x, y) component RMS instead.
    """
    ms = measurements.values() if isinstance(measurements, dict) else measurements
    sq = []
    for m in ms:
        r, valid = residuals(m, scene.pose(m.object_id), cams)
        r2 = r ** 2
        r2[~valid] = BEHIND_CAMERA_SQ_RESIDUAL / 2.0
        sq.append(r2)
    if not sq:
        return (0.0, 0.0) if per_axis else 0.0
    sq = np.concatenate(sq)
    if per_axis:
        return tuple(float(v) for v in np.sqrt(sq.mean(axis=0)))
    return float(math.sqrt(sq.sum(axis=1).mean()))
