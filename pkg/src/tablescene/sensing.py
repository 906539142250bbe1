"""Pinhole projection of model keypoints and the Gaussian keypoint likelihood."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, SchemaError
from .geometry import Pose6D

# log-likelihood charged per correspondence that lands behind a camera
BEHIND_CAMERA_LOG_LIKELIHOOD = -1e9
# equivalent squared pixel residual at sigma = 1 (-r^2 / 2 = floor)
BEHIND_CAMERA_SQ_RESIDUAL = 2e9
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    pose: Pose6D = field(default_factory=Pose6D.identity)  # camera -> table

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        object.__setattr__(self, "_table_to_cam", self.pose.inverse())

    def to_camera(self, points) -> np.ndarray:
        return self._table_to_cam.apply(points)

    def to_dict(self, cam_id=None) -> dict:
        d = {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy, "pose": self.pose.to_dict()}
        if cam_id is not None:
            d = {"cam_id": cam_id, **d}
        return d

    @classmethod
    def from_dict(cls, d) -> "CameraModel":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   Pose6D.from_dict(d.get("pose", {})))


@dataclass(frozen=True)
class NoiseParams:
    sigma_x: float = 1.0
    sigma_y: float = 1.0

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ValueError("pixel noise must be positive")


@dataclass
class View:
    """Correspondences seen by one camera: object-frame points and pixels."""

    model_points: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.model_points = np.asarray(self.model_points, dtype=float).reshape(-1, 3)
        self.observed = np.asarray(self.observed, dtype=float).reshape(-1, 2)
        if len(self.model_points) != len(self.observed):
            raise SchemaError("model and observed point counts differ")


@dataclass
class Measurement:
    object_id: int
    views: dict[str, View] = field(default_factory=dict)

    @property
    def n_correspondences(self) -> int:
        return sum(len(v.observed) for v in self.views.values())

    def to_dict(self) -> dict:
        return {
            "object": self.object_id,
            "cameras": [
                {"cam_id": cam_id,
                 "points": [{"model": [float(x) for x in m], "obs": [float(x) for x in o]}
                            for m, o in zip(v.model_points, v.observed)]}
                for cam_id, v in self.views.items()
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "Measurement":
        try:
            views = {}
            for cam in d["cameras"]:
                pts = cam["points"]
                views[str(cam["cam_id"])] = View([p["model"] for p in pts], [p["obs"] for p in pts])
            return cls(int(d["object"]), views)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed measurement: {exc}") from None


def project_points(cam: CameraModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates (N, 2) and a mask of points in front of the camera."""
    pc = cam.to_camera(np.asarray(points, dtype=float).reshape(-1, 3))
    z = pc[:, 2]
    valid = z > 0
    zs = np.where(valid, z, 1.0)
    uv = np.column_stack([cam.fx * pc[:, 0] / zs + cam.cx, cam.fy * pc[:, 1] / zs + cam.cy])
    return uv, valid


def project(cam: CameraModel, point) -> np.ndarray:
    uv, valid = project_points(cam, point)
    if not valid[0]:
        raise BehindCameraError(f"point {np.asarray(point).tolist()} is behind the camera")
    return uv[0]


def _check_cameras(m: Measurement, cams):
    for cam_id in m.views:
        if cam_id not in cams:
            raise SchemaError(f"measurement of object {m.object_id} references unknown camera {cam_id!r}")


def residuals(m: Measurement, pose: Pose6D, cams) -> tuple[np.ndarray, np.ndarray]:
    """Stacked pixel residuals ``observed - projected`` and the validity mask."""
    _check_cameras(m, cams)
    res, ok = [], []
    for cam_id, v in m.views.items():
        uv, valid = project_points(cams[cam_id], pose.apply(v.model_points))
        res.append(v.observed - uv)
        ok.append(valid)
    if not res:
        return np.zeros((0, 2)), np.zeros(0, dtype=bool)
    return np.concatenate(res), np.concatenate(ok)


def object_log_likelihood(m: Measurement, pose: Pose6D, cams, noise: NoiseParams = NoiseParams()) -> float:
    r, valid = residuals(m, pose, cams)
    sx, sy = noise.sigma_x, noise.sigma_y
    norm = -(math.log(sx) + math.log(sy) + 2.0 * _LOG_SQRT_2PI)
    terms = norm - 0.5 * (r[:, 0] / sx) ** 2 - 0.5 * (r[:, 1] / sy) ** 2
    terms = np.where(valid, terms, BEHIND_CAMERA_LOG_LIKELIHOOD)
    return float(np.sum(terms))


def scene_log_likelihood(measurements, scene, cams, noise: NoiseParams = NoiseParams()) -> float:
    ids = set(scene.ids)
    total = 0.0
    for m in _iter_measurements(measurements):
        if m.object_id not in ids:
            raise SchemaError(f"measurement references unknown object {m.object_id}")
        total += object_log_likelihood(m, scene.pose(m.object_id), cams, noise)
    return total


def _iter_measurements(measurements):
    if isinstance(measurements, dict):
        return list(measurements.values())
    return list(measurements)
