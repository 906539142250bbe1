"""Rigid poses, oriented bounding boxes and evidence generation.

All poses live in the table frame once :func:`to_table_frame` has been
applied: the origin sits on the tabletop and ``z`` points up.
Quaternions are stored scalar-first, ``(w, x, y, z)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidSceneError
from .evidence import TABLE, EvidenceSet

if TYPE_CHECKING:
    from .scene import SceneModel

UP_AXIS = np.array([0.0, 0.0, 1.0])

# sign pattern of obb_corners, x varies fastest
CORNER_SIGNS = np.array(
    [[sx, sy, sz] for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)], dtype=float
)


# ---------------------------------------------------------------------------
# quaternion helpers
# ---------------------------------------------------------------------------

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError("quaternion has zero norm")
    q = q / n
    # canonical hemisphere keeps serialization stable
    if q[0] < 0 or (q[0] == 0 and next((c for c in q[1:] if c != 0), 0) < 0):
        q = -q
    return q


def quat_multiply(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Rotation matrix to unit quaternion (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return quat_normalize(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-15:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def quat_angle(a, b):
    """Geodesic angle in radians between two rotations."""
    d = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    return 2.0 * math.acos(min(1.0, d))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose6D:
    """Rigid transform ``p -> R p + t``; the quaternion is renormalized."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("pose translation must be finite")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", quat_normalize(np.array(self.rotation, dtype=float).reshape(4)))
        object.__setattr__(self, "_matrix", quat_to_matrix(self.rotation))

    @classmethod
    def identity(cls) -> "Pose6D":
        return cls()

    @classmethod
    def from_matrix(cls, R, t) -> "Pose6D":
        return cls(np.asarray(t, dtype=float), matrix_to_quat(R))

    @classmethod
    def from_axis_angle(cls, axis, angle, translation=(0.0, 0.0, 0.0)) -> "Pose6D":
        return cls(np.asarray(translation, dtype=float), quat_from_axis_angle(axis, angle))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def apply(self, points) -> np.ndarray:
        """Transform a point (3,) or an array of points (N, 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self._matrix.T + self.translation

    def compose(self, other: "Pose6D") -> "Pose6D":
        """``self ∘ other``: apply ``other`` first."""
        q = quat_multiply(self.rotation, other.rotation)
        t = self._matrix @ other.translation + self.translation
        return Pose6D(t, q)

    def inverse(self) -> "Pose6D":
        qi = quat_conjugate(self.rotation)
        return Pose6D(-(self._matrix.T @ self.translation), qi)

    def with_translation(self, t) -> "Pose6D":
        return Pose6D(np.asarray(t, dtype=float), self.rotation)

    def distance(self, other: "Pose6D") -> tuple[float, float]:
        """(translation distance in m, rotation distance in rad)."""
        return (float(np.linalg.norm(self.translation - other.translation)),
                quat_angle(self.rotation, other.rotation))

    def allclose(self, other: "Pose6D", atol=1e-9) -> bool:
        dt, dr = self.distance(other)
        return dt <= atol and dr <= max(atol, 1e-7)

    def to_dict(self) -> dict:
        return {"center": [float(v) for v in self.translation],
                "quat": [float(v) for v in self.rotation]}

    @classmethod
    def from_dict(cls, d) -> "Pose6D":
        return cls(d.get("center", [0.0, 0.0, 0.0]), d.get("quat", [1.0, 0.0, 0.0, 0.0]))

    def __repr__(self):
        t = np.array2string(self.translation, precision=4)
        q = np.array2string(self.rotation, precision=4)
        return f"Pose6D(t={t}, q={q})"


@dataclass(frozen=True, eq=False)
class Obb:
    pose: Pose6D
    half_extents: np.ndarray

    def __post_init__(self):
        h = np.array(self.half_extents, dtype=float).reshape(3)
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise InvalidSceneError(f"OBB half extents must be positive, got {h.tolist()}")
        object.__setattr__(self, "half_extents", h)

    @property
    def center(self) -> np.ndarray:
        return self.pose.translation

    @property
    def axes(self) -> np.ndarray:
        """Local axes as matrix columns."""
        return self.pose.matrix

    def with_pose(self, pose: Pose6D) -> "Obb":
        return Obb(pose, self.half_extents)

    def contains_points(self, points, strict=True) -> np.ndarray:
        local = (np.asarray(points, dtype=float) - self.center) @ self.axes
        if strict:
            return np.all(np.abs(local) < self.half_extents, axis=-1)
        return np.all(np.abs(local) <= self.half_extents, axis=-1)

    def to_dict(self) -> dict:
        d = self.pose.to_dict()
        d["half_extents"] = [float(v) for v in self.half_extents]
        return d

    @classmethod
    def from_dict(cls, d) -> "Obb":
        return cls(Pose6D.from_dict(d), d["half_extents"])


@dataclass(frozen=True)
class TableFrame:
    """Transform from the sensor frame into the table frame."""

    sensor_to_table: Pose6D = field(default_factory=Pose6D.identity)

    @property
    def up_axis(self) -> np.ndarray:
        return UP_AXIS


@dataclass(frozen=True)
class GeometryParams:
    contact_eps: float = 0.005
    stable_angle_tol: float = 2.0
    sample_density: float = 2.0e4

    def __post_init__(self):
        if not self.contact_eps > 0:
            raise ValueError("contact_eps must be positive")
        if not 0 < self.stable_angle_tol < 45:
            raise ValueError("stable_angle_tol must lie in (0, 45) degrees")
        if not self.sample_density > 0:
            raise ValueError("sample_density must be positive")


class PairRelation(enum.Enum):
    NONE = "none"
    CONTACT = "contact"
    INTERSECT = "intersect"


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def to_table_frame(pose: Pose6D, frame: TableFrame) -> Pose6D:
    return frame.sensor_to_table.compose(pose)


def obb_corners(obb: Obb) -> np.ndarray:
    """The 8 corners, ordered ``---, +--, -+-, ++-, --+, +-+, -++, +++``."""
    return obb.pose.apply(CORNER_SIGNS * obb.half_extents)


def is_stable(obb: Obb, params: GeometryParams = GeometryParams()) -> bool:
    """True if some box edge is within the angular tolerance of vertical."""
    cos_to_up = np.abs(obb.axes[2, :])
    return bool(np.max(cos_to_up) >= math.cos(math.radians(params.stable_angle_tol)))


def sat_axes(a: Obb, b: Obb) -> np.ndarray:
    """The 15 candidate separating axes (degenerate cross products dropped)."""
    A, B = a.axes, b.axes
    axes = [A[:, i] for i in range(3)] + [B[:, j] for j in range(3)]
    for i in range(3):
        for j in range(3):
            c = np.cross(A[:, i], B[:, j])
            n = math.sqrt(float(c @ c))
            if n > 1e-9:
                axes.append(c / n)
    return np.array(axes)


def sat_separation(a: Obb, b: Obb) -> float:
    """Largest gap between the boxes' projections over the SAT axes.

    Positive means separated by at least that much along some axis;
    negative is the smallest penetration depth over all axes.
    """
    L = sat_axes(a, b)
    d = b.center - a.center
    ra = np.abs(L @ a.axes) @ a.half_extents
    rb = np.abs(L @ b.axes) @ b.half_extents
    gaps = np.abs(L @ d) - (ra + rb)
    return float(np.max(gaps))


def contains(outer: Obb, inner: Obb) -> bool:
    """All corners of ``inner`` strictly inside ``outer``."""
    return bool(np.all(outer.contains_points(obb_corners(inner), strict=True)))


def classify_pair(a: Obb, b: Obb, params: GeometryParams = GeometryParams()) -> PairRelation:
    if contains(a, b) or contains(b, a):
        return PairRelation.INTERSECT
    s = sat_separation(a, b)
    if s > params.contact_eps:
        return PairRelation.NONE
    if s >= -params.contact_eps:
        return PairRelation.CONTACT
    return PairRelation.INTERSECT


def is_higher(a: Obb, b: Obb) -> bool:
    return bool(a.center[2] > b.center[2])


EVIDENCE_PREDICATES = ("stable", "table", "contact", "intersect", "hover", "higher")


def extract_evidence(scene: "SceneModel", params: GeometryParams = GeometryParams()) -> EvidenceSet:
    """Closed-world evidence atoms for every constant of ``scene``.

    Every grounding of the six evidence predicates is listed explicitly,
    true or false, so the text form is self-describing.
    """
    boxes = scene.boxes()
    for name, obb in boxes.items():
        h = np.asarray(obb.half_extents)
        if h.shape != (3,) or np.any(~np.isfinite(h)) or np.any(h <= 0):
            raise InvalidSceneError(f"degenerate OBB for {name}")
    names = list(boxes)
    ev = EvidenceSet(names)

    relation = {}
    for x, y in itertools.combinations(names, 2):
        r = classify_pair(boxes[x], boxes[y], params)
        relation[(x, y)] = relation[(y, x)] = r

    for x in names:
        ev.set("stable", (x,), is_stable(boxes[x], params))
        ev.set("table", (x,), x == TABLE)
        touching = any(relation[(x, y)] is not PairRelation.NONE for y in names if y != x)
        ev.set("hover", (x,), not touching)
    for x in names:
        for y in names:
            r = relation.get((x, y), PairRelation.NONE)
            ev.set("contact", (x, y), r is PairRelation.CONTACT)
            ev.set("intersect", (x, y), r is PairRelation.INTERSECT)
            ev.set("higher", (x, y), is_higher(boxes[x], boxes[y]))
    return ev
