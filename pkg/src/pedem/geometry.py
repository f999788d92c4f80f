"""Pinhole camera model and ray geometry.

Frames: world is right-handed with z up and the ground at z = 0; the camera
frame has x right, y down, z forward; pixels have u right, v down with the
origin at the top-left corner.  Yaw is a compass heading: 0 looks along +y and
positive values turn clockwise (towards +x) when seen from above.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError, ConfigError, DegenerateGeometryError, InvalidInputError

PARALLEL_TOL = 1e-9
_EYE3 = np.eye(3)


def yaw_rotation(yaw: float) -> np.ndarray:
    """Camera-to-world rotation of a level camera with compass heading ``yaw``."""
    s, c = math.sin(yaw), math.cos(yaw)
    # columns: camera x (right), camera y (down), camera z (forward) in world
    return np.array([[c, 0.0, s], [-s, 0.0, c], [0.0, -1.0, 0.0]])


def heading_of(rotation: np.ndarray) -> float:
    """Compass heading of the optical axis of a camera-to-world rotation."""
    fwd = rotation[:, 2]
    return math.atan2(fwd[0], fwd[1])


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera.

    ``intrinsic`` maps a homogeneous pixel ``[u, v, 1]`` to an unnormalized
    camera-frame direction, i.e. it is the inverse of the usual calibration
    matrix.  ``rotation`` is camera-to-world and ``translation`` the camera
    centre in world coordinates.
    """

    intrinsic: np.ndarray
    width: float
    height: float
    aperture: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        K = np.asarray(self.intrinsic, dtype=float).reshape(3, 3)
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (self.width > 0 and self.height > 0):
            raise InvalidInputError("image width and height must be positive")
        if not 0.0 < self.aperture < math.pi:
            raise InvalidInputError(f"aperture must lie in (0, pi), got {self.aperture}")
        if np.linalg.norm(R.T @ R - np.eye(3)) >= 1e-9 or np.linalg.det(R) <= 0:
            raise InvalidInputError("rotation must be orthonormal with determinant +1")
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(t))):
            raise InvalidInputError("camera parameters must be finite")
        object.__setattr__(self, "intrinsic", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "_projection", np.linalg.inv(K))

    @classmethod
    def from_aperture(cls, width=1600, height=900, aperture_deg=64.5, **kw):
        """Square pixels, principal point at the image centre."""
        alpha = math.radians(aperture_deg)
        f = (width / 2.0) / math.tan(alpha / 2.0)
        calib = np.array([[f, 0.0, width / 2.0], [0.0, f, height / 2.0], [0.0, 0.0, 1.0]])
        return cls(np.linalg.inv(calib), width, height, alpha, **kw)

    @classmethod
    def from_calibration(cls, calib, width, height, **kw):
        """Build from a conventional (camera -> pixel) calibration matrix."""
        calib = np.asarray(calib, dtype=float).reshape(3, 3)
        return cls(np.linalg.inv(calib), width, height, _aperture(calib, width), **kw)

    @classmethod
    def from_intrinsic(cls, intrinsic, width, height, **kw):
        intrinsic = np.asarray(intrinsic, dtype=float).reshape(3, 3)
        return cls(intrinsic, width, height, _aperture(np.linalg.inv(intrinsic), width), **kw)

    @property
    def projection(self) -> np.ndarray:
        """Camera-frame point -> homogeneous pixel (inverse of ``intrinsic``)."""
        return self._projection

    @property
    def focal(self) -> float:
        return float(self._projection[0, 0])

    @property
    def principal_point(self) -> np.ndarray:
        return self._projection[:2, 2].copy()

    def posed(self, origin, rotation) -> "CameraModel":
        """Same intrinsics placed at a new world pose.  Only the pose is re-validated."""
        R = np.asarray(rotation, dtype=float).reshape(3, 3)
        t = np.asarray(origin, dtype=float).reshape(3)
        if np.abs(R.T @ R - _EYE3).max() >= 1e-9 or np.linalg.det(R) <= 0:
            raise InvalidInputError("rotation must be orthonormal with determinant +1")
        if not np.all(np.isfinite(t)):
            raise InvalidInputError("camera parameters must be finite")
        cam = object.__new__(CameraModel)
        for k, v in (("intrinsic", self.intrinsic), ("width", self.width), ("height", self.height),
                     ("aperture", self.aperture), ("rotation", R), ("translation", t),
                     ("_projection", self._projection)):
            object.__setattr__(cam, k, v)
        return cam

    def to_dict(self) -> dict:
        return {"intrinsic": self.intrinsic.ravel().tolist(),
                "width": self.width, "height": self.height}


def _aperture(calib, width):
    fx, cx = calib[0, 0], calib[0, 2]
    return math.atan(cx / fx) + math.atan((width - cx) / fx)


class Ray(NamedTuple):
    origin: np.ndarray
    direction: np.ndarray


class Triangulation(NamedTuple):
    point: np.ndarray
    l_prev: float
    l_curr: float
    gap: float


def pixels_to_directions(camera: CameraModel, pixels) -> np.ndarray:
    """Unit world directions for an (N, 2) array of pixels."""
    px = np.asarray(pixels, dtype=float)
    if px.ndim != 2 or px.shape[1] != 2:
        raise InvalidInputError(f"expected (N, 2) pixels, got shape {px.shape}")
    if not np.all(np.isfinite(px)):
        raise InvalidInputError("pixel coordinates must be finite")
    K = camera.intrinsic
    cam = px @ K[:, :2].T + K[:, 2]
    cam /= np.linalg.norm(cam, axis=1, keepdims=True)
    return cam @ camera.rotation.T


def pixel_to_ray(camera: CameraModel, pixel) -> Ray:
    d = pixels_to_directions(camera, np.reshape(pixel, (1, 2)))[0]
    return Ray(camera.translation.copy(), d)


def project_points(camera: CameraModel, points):
    """Project (N, 3) world points; returns (pixels, depth).

    Pixels of points with non-positive depth are NaN; callers decide whether
    that is an error.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cam = (pts - camera.translation) @ camera.rotation
    depth = cam[:, 2]
    hom = cam @ camera.projection.T
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = hom[:, :2] / hom[:, 2:3]
    uv[depth <= 0] = np.nan
    return uv, depth


def project_to_pixel(camera: CameraModel, point) -> np.ndarray:
    cam = camera.rotation.T @ (np.asarray(point, dtype=float) - camera.translation)
    if not cam[2] > 0:
        raise BehindCameraError(f"point has camera depth {cam[2]:.3g} m")
    hom = camera.projection @ cam
    return hom[:2] / hom[2]


def _cross(a, b):
    # row-wise cross product; np.cross carries a lot of per-call overhead
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def triangulate_batch(o_prev, d_prev, o_curr, d_curr):
    """Closest-point triangulation for N ray pairs sharing two origins.

    Solves ``o_curr + l_curr d_curr + l_s (d_prev x d_curr) = o_prev + l_prev d_prev``
    in closed form.  Returns ``(points, l_prev, l_curr, gap, valid)``; invalid
    rows (parallel rays or a negative ray parameter) carry NaN points.
    """
    d_prev = np.asarray(d_prev, dtype=float)
    d_curr = np.asarray(d_curr, dtype=float)
    o_prev = np.asarray(o_prev, dtype=float)
    o_curr = np.asarray(o_curr, dtype=float)
    n = _cross(d_prev, d_curr)
    nn = np.einsum("ij,ij->i", n, n)
    ok = np.sqrt(nn) >= PARALLEL_TOL
    nn_safe = np.where(ok, nn, 1.0)
    b = np.broadcast_to(o_prev - o_curr, d_prev.shape)
    l_s = np.einsum("ij,ij->i", b, n) / nn_safe
    l_curr = np.einsum("ij,ij->i", _cross(d_prev, b), n) / nn_safe
    l_prev = np.einsum("ij,ij->i", _cross(d_curr, b), n) / nn_safe
    valid = ok & (l_curr >= 0) & (l_prev >= 0)
    pts = 0.5 * (o_curr + l_curr[:, None] * d_curr + o_prev + l_prev[:, None] * d_prev)
    pts[~valid] = np.nan
    gap = np.abs(l_s) * np.sqrt(nn)
    return pts, l_prev, l_curr, gap, valid


def triangulate(ray_prev: Ray, ray_curr: Ray) -> Triangulation:
    """Midpoint of the closest approach of two rays."""
    n = np.cross(ray_prev.direction, ray_curr.direction)
    if np.linalg.norm(n) < PARALLEL_TOL:
        raise DegenerateGeometryError("rays are parallel")
    pts, l_prev, l_curr, gap, _ = triangulate_batch(
        ray_prev.origin, ray_prev.direction[None], ray_curr.origin, ray_curr.direction[None])
    if l_prev[0] < 0 or l_curr[0] < 0:
        raise BehindCameraError("rays meet behind a camera")
    return Triangulation(pts[0], float(l_prev[0]), float(l_curr[0]), float(gap[0]))


def camera_from_dict(cfg: dict) -> CameraModel:
    """Camera from ``{"width", "height", "aperture_deg"}`` or ``{"intrinsic"|"K", ...}``.

    ``intrinsic`` is the pixel -> direction matrix used internally, ``K`` the
    conventional calibration matrix.  A top-level ``"camera"`` key is unwrapped
    so scene config files double as camera files.
    """
    if "camera" in cfg and isinstance(cfg["camera"], dict):
        cfg = cfg["camera"]
    try:
        width, height = float(cfg["width"]), float(cfg["height"])
    except KeyError as exc:
        raise ConfigError("missing", field=exc.args[0]) from None
    try:
        if "intrinsic" in cfg:
            return CameraModel.from_intrinsic(cfg["intrinsic"], width, height)
        if "K" in cfg:
            return CameraModel.from_calibration(cfg["K"], width, height)
        return CameraModel.from_aperture(width, height, float(cfg.get("aperture_deg", 64.5)))
    except (InvalidInputError, ValueError, np.linalg.LinAlgError) as exc:
        raise ConfigError(str(exc), field="camera") from None


def load_camera(path) -> CameraModel:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read camera file: {exc}", field="camera") from None
    return camera_from_dict(cfg)
