"""Synthetic ground-truth scenes: ego trajectory, articulated pedestrians, projected skeletons.

Pedestrians are stick figures whose keypoints span exactly ``height`` metres
(ankles on the ground, eyes at the top), so the refinement's nominal-height
assumption holds exactly when ``height`` equals it.  Ground-truth positions are
3D box centres: the ground point under the body axis raised by ``height / 2``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .geometry import CameraModel, camera_from_dict, project_points
from .io import FrameRecord, GTRecord
from .skeleton import NUM_KEYPOINTS, Skeleton2D, bbox_from_skeleton
from .tracker import EgoPose

MAX_EGO_SPEED = 50.0 / 3.6
OCCLUDER_RADIUS = 0.3
WALK_FREQ = 2.0

# (lateral, forward, up) offsets in metres for a 1.7 m figure; lateral points to the figure's right
_TEMPLATE = np.array([
    [0.0, 0.10, 1.65],      # nose
    [-0.035, 0.08, 1.7],    # left eye
    [0.035, 0.08, 1.7],     # right eye
    [-0.08, -0.01, 1.675],  # left ear
    [0.08, -0.01, 1.675],   # right ear
    [-0.20, 0.0, 1.41],     # left shoulder
    [0.20, 0.0, 1.41],      # right shoulder
    [-0.23, -0.03, 1.09],   # left elbow
    [0.23, -0.03, 1.09],    # right elbow
    [-0.25, 0.03, 0.83],    # left wrist
    [0.25, 0.03, 0.83],     # right wrist
    [-0.11, 0.0, 0.90],     # left hip
    [0.11, 0.0, 0.90],      # right hip
    [-0.10, 0.04, 0.485],   # left knee
    [0.10, 0.04, 0.485],    # right knee
    [-0.07, -0.04, 0.0],    # left ankle
    [0.07, -0.04, 0.0],     # right ankle
])
_TEMPLATE_HEIGHT = 1.7
# forward swing amplitude (m, at full walking speed), sign alternates left/right
_SWING = np.zeros(NUM_KEYPOINTS)
_SWING[[7, 8]] = [-0.10, 0.10]
_SWING[[9, 10]] = [-0.20, 0.20]
_SWING[[13, 14]] = [0.12, -0.12]
_SWING[[15, 16]] = [0.25, -0.25]


class Visibility(enum.Enum):
    VISIBLE = "visible"
    OCCLUDED = "occluded"
    OUT_OF_VIEW = "out_of_view"


def _polyline(waypoints):
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    seg = np.diff(pts, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    return pts, seg, lengths


def _sample_path(pts, seg, lengths, s):
    """Point and compass heading at arc length ``s`` (clamped to the path end)."""
    if len(seg) == 0:
        return pts[0].copy(), None
    for i, L in enumerate(lengths):
        if s <= L or i == len(seg) - 1:
            frac = min(s / L, 1.0) if L > 0 else 1.0
            heading = math.atan2(seg[i][0], seg[i][1]) if L > 0 else None
            return pts[i] + frac * seg[i], heading
        s -= L
    raise AssertionError("unreachable")


@dataclass
class EgoPath:
    waypoints: list
    speed: float = 5.0
    camera_height: float = 1.5
    yaw: float = 0.0  # heading while the path has no direction (single waypoint), rad
    yaw_rate: float = 0.0  # rad/s, applied only to a single-waypoint path
    start: float = 0.0  # s, time at which the ego starts moving

    def pose(self, t: float) -> EgoPose:
        pts, seg, lengths = _polyline(self.waypoints)
        xy, heading = _sample_path(pts, seg, lengths, self.speed * max(t - self.start, 0.0))
        if heading is None:
            heading = self.yaw + self.yaw_rate * t
        return EgoPose(t, [xy[0], xy[1], self.camera_height], heading)


@dataclass
class PedestrianSpec:
    id: int
    waypoints: list
    speed: float = 0.0
    height: float = 1.7
    heading: Optional[float] = None  # facing direction when standing, rad; None faces the ego start
    phase: float = 0.0

    def state(self, t: float, ego_start=None):
        """Ground position, facing heading and walk amplitude at time ``t``."""
        pts, seg, lengths = _polyline(self.waypoints)
        s = self.speed * t
        xy, heading = _sample_path(pts, seg, lengths, s)
        moving = self.speed > 0 and len(seg) > 0 and s < lengths.sum()
        if not moving:
            if self.heading is not None:
                heading = self.heading
            elif ego_start is not None:
                d = np.asarray(ego_start[:2]) - xy
                heading = math.atan2(d[0], d[1])
            elif heading is None:
                heading = 0.0
        amp = min(self.speed / 1.4, 1.0) if moving else 0.0
        return xy, heading, amp

    def keypoints(self, t: float, ego_start=None) -> np.ndarray:
        """(17, 3) world keypoints."""
        xy, heading, amp = self.state(t, ego_start)
        scale = self.height / _TEMPLATE_HEIGHT
        s, c = math.sin(heading), math.cos(heading)
        fwd = np.array([s, c, 0.0])
        right = np.array([c, -s, 0.0])
        up = np.array([0.0, 0.0, 1.0])
        local = _TEMPLATE.copy()
        local[:, 1] += amp * _SWING * math.sin(2 * math.pi * WALK_FREQ * t + self.phase)
        local *= scale
        base = np.array([xy[0], xy[1], 0.0])
        return base + local[:, :1] * right + local[:, 1:2] * fwd + local[:, 2:3] * up

    def center(self, t: float) -> np.ndarray:
        xy, _, _ = self.state(t)
        return np.array([xy[0], xy[1], self.height / 2.0])


@dataclass
class NoiseConfig:
    pixel_sigma: float = 2.0
    prob_base: float = 0.95
    prob_falloff: float = 200.0  # m per unit probability
    prob_sigma: float = 0.02


@dataclass
class SceneConfig:
    ego: EgoPath
    pedestrians: list
    camera: CameraModel = field(default_factory=CameraModel.from_aperture)
    duration: float = 10.0
    frame_rate: float = 10.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ConfigError("must be > 0", field="frame_rate")
        if not self.duration >= 0:
            raise ConfigError("must be >= 0", field="duration")
        if not 0 <= self.ego.speed <= MAX_EGO_SPEED + 1e-9:
            raise ConfigError(f"must lie in [0, {MAX_EGO_SPEED:.2f}] m/s", field="ego.speed")
        if len(self.ego.waypoints) == 0:
            raise ConfigError("needs at least one waypoint", field="ego.waypoints")
        ids = set()
        for i, p in enumerate(self.pedestrians):
            if p.speed < 0:
                raise ConfigError("must be >= 0", field=f"pedestrians[{i}].speed")
            if not p.height > 0:
                raise ConfigError("must be > 0", field=f"pedestrians[{i}].height")
            if len(p.waypoints) == 0:
                raise ConfigError("needs at least one waypoint", field=f"pedestrians[{i}].waypoints")
            if p.id in ids:
                raise ConfigError(f"duplicate id {p.id}", field=f"pedestrians[{i}].id")
            ids.add(p.id)
        if self.noise.pixel_sigma < 0:
            raise ConfigError("must be >= 0", field="noise.pixel_sigma")
        if self.noise.prob_sigma < 0:
            raise ConfigError("must be >= 0", field="noise.prob_sigma")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        try:
            e = d["ego"]
            ego = EgoPath(e["waypoints"], float(e.get("speed", 5.0)), float(e.get("camera_height", 1.5)),
                          math.radians(float(e.get("yaw_deg", 0.0))),
                          math.radians(float(e.get("yaw_rate_deg", 0.0))), float(e.get("start", 0.0)))
            peds = []
            for p in d.get("pedestrians", []):
                heading = p.get("heading_deg")
                peds.append(PedestrianSpec(int(p["id"]), p["waypoints"], float(p.get("speed", 0.0)),
                                           float(p.get("height", 1.7)),
                                           None if heading is None else math.radians(heading),
                                           float(p.get("phase", 0.0))))
            noise = NoiseConfig(**d.get("noise", {}))
            camera = camera_from_dict(d.get("camera", {"width": 1600, "height": 900, "aperture_deg": 64.5}))
        except KeyError as exc:
            raise ConfigError("missing", field=str(exc.args[0])) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="scene") from None
        return cls(ego, peds, camera, float(d.get("duration", 10.0)), float(d.get("frame_rate", 10.0)),
                   noise, int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        e = self.ego
        return {
            "duration": self.duration, "frame_rate": self.frame_rate, "seed": self.seed,
            "camera": self.camera.to_dict(),
            "ego": {"waypoints": np.asarray(e.waypoints, dtype=float).tolist(), "speed": e.speed,
                    "camera_height": e.camera_height, "yaw_deg": math.degrees(e.yaw),
                    "yaw_rate_deg": math.degrees(e.yaw_rate), "start": e.start},
            "pedestrians": [
                {"id": p.id, "waypoints": np.asarray(p.waypoints, dtype=float).tolist(), "speed": p.speed,
                 "height": p.height, "phase": p.phase,
                 "heading_deg": None if p.heading is None else math.degrees(p.heading)}
                for p in self.pedestrians],
            "noise": vars(self.noise).copy(),
        }


def load_scene_config(path) -> SceneConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scene config: {exc}", field="config") from None
    return SceneConfig.from_dict(d)


def _ray_hits_cylinder(start, end, axis_xy, height, radius=OCCLUDER_RADIUS) -> bool:
    """Whether the segment start->end (excluding ``end``) passes through a vertical cylinder."""
    d = end - start
    rel = start[:2] - axis_xy
    a = d[0] ** 2 + d[1] ** 2
    b = 2.0 * (d[0] * rel[0] + d[1] * rel[1])
    c = rel @ rel - radius ** 2
    if a == 0.0:
        if c > 0:
            return False
        s_lo, s_hi = 0.0, 1.0
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            return False
        sq = math.sqrt(disc)
        s_lo, s_hi = (-b - sq) / (2 * a), (-b + sq) / (2 * a)
    s_lo, s_hi = max(s_lo, 0.0), min(s_hi, 1.0)
    if s_lo >= s_hi or s_lo >= 1.0:
        return False
    z_lo, z_hi = sorted((start[2] + s_lo * d[2], start[2] + s_hi * d[2]))
    return z_hi >= 0.0 and z_lo <= height


def visibility(keypoints, center, others, camera: CameraModel):
    """Classify one pedestrian; ``others`` is a list of (ground_xy, height) of the rest.

    Returns ``(Visibility, pixels)`` where pixels are the projected keypoints
    (None when out of view).
    """
    uv, depth = project_points(camera, keypoints)
    if np.any(depth <= 0):
        return Visibility.OUT_OF_VIEW, None
    inside = ((uv[:, 0] >= 0) & (uv[:, 0] <= camera.width)
              & (uv[:, 1] >= 0) & (uv[:, 1] <= camera.height))
    if not inside.any():
        return Visibility.OUT_OF_VIEW, None
    origin = camera.translation
    for xy, h in others:
        if _ray_hits_cylinder(origin, center, np.asarray(xy, dtype=float), h):
            return Visibility.OCCLUDED, uv
    return Visibility.VISIBLE, uv


def generate(cfg: SceneConfig, seed: Optional[int] = None) -> list:
    """Simulate the scene; returns a list of :class:`FrameRecord` with ground truth attached."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    nz = cfg.noise
    ego_start = cfg.ego.pose(0.0).origin
    frames = []
    for k in range(cfg.n_frames):
        t = k / cfg.frame_rate
        ego = cfg.ego.pose(t)
        cam = ego.camera(cfg.camera)
        states = [(p, p.keypoints(t, ego_start), p.center(t)) for p in cfg.pedestrians]
        dets, det_ids, gts = [], [], []
        for i, (p, kp3, center) in enumerate(states):
            others = [(c[:2], q.height) for j, (q, _, c) in enumerate(states) if j != i]
            vis, uv = visibility(kp3, center, others, cam)
            if vis is Visibility.OUT_OF_VIEW:
                continue
            gts.append(GTRecord(p.id, center, bbox_from_skeleton(Skeleton2D(uv, np.ones(NUM_KEYPOINTS))),
                                vis is Visibility.OCCLUDED))
            if vis is Visibility.OCCLUDED:
                continue
            noisy = uv + rng.normal(0.0, nz.pixel_sigma, uv.shape) if nz.pixel_sigma > 0 else uv
            dist = float(np.linalg.norm(center - ego.origin))
            base = nz.prob_base - dist / nz.prob_falloff
            jitter = rng.normal(0.0, nz.prob_sigma, NUM_KEYPOINTS) if nz.prob_sigma > 0 else np.zeros(NUM_KEYPOINTS)
            probs = np.clip(base + jitter, 0.0, 1.0)
            dets.append(Skeleton2D(noisy, probs))
            det_ids.append(p.id)
        frames.append(FrameRecord(t, ego, dets, gts, det_ids))
    return frames


# -- ready-made scenes -----------------------------------------------------------

def _sidewalk_pedestrians(rng, n, route_len, lateral=(3.5, 9.0), speed=(0.8, 1.6), heights=(1.6, 1.8),
                          y_range=None, crossing_fraction=0.0, start_id=0):
    peds = []
    y_lo, y_hi = y_range if y_range is not None else (12.0, route_len)
    for i in range(n):
        side = rng.choice([-1.0, 1.0])
        x = side * rng.uniform(*lateral)
        y = rng.uniform(y_lo, y_hi)
        v = rng.uniform(*speed)
        if rng.uniform() < crossing_fraction:
            # crossing the road from one side to the other
            wps = [[x, y], [-x, y + rng.uniform(-2, 2)]]
        else:
            direction = rng.choice([-1.0, 1.0])
            wps = [[x, y], [x + rng.normal(0, 0.3), y + direction * 40.0]]
        peds.append(PedestrianSpec(start_id + i, wps, v, float(rng.uniform(*heights)),
                                   phase=float(rng.uniform(0, 2 * math.pi))))
    return peds


def preset_scene(kind: str = "urban", n_pedestrians: int = 20, seed: int = 0, pixel_sigma: float = 2.0,
                 duration: float = 10.0, **noise) -> SceneConfig:
    """Scene presets.

    ``urban``: straight drive at 8 m/s, pedestrians on both sidewalks.
    ``turn``: gentle left-hand curve at 7 m/s.
    ``crossing``: straight drive at 6 m/s with a share of crossing pedestrians.
    ``standing``: approach at 5 m/s for 2 s, then wait at a light while people cross.
    ``static``: 5 m/s drive past standing pedestrians at 10-50 m.
    """
    rng = np.random.default_rng(seed)
    nz = NoiseConfig(pixel_sigma=pixel_sigma, **noise)
    if kind == "urban":
        ego = EgoPath([[0, 0], [0, 200]], 8.0)
        peds = _sidewalk_pedestrians(rng, n_pedestrians, 100.0)
    elif kind == "turn":
        # arc of radius 60 m turning left (heading decreases)
        ang = np.linspace(0.0, math.radians(50), 40)
        wps = np.stack([-60.0 + 60.0 * np.cos(ang), 60.0 * np.sin(ang)], axis=1)
        ego = EgoPath(wps.tolist(), 7.0)
        peds = []
        for i in range(n_pedestrians):
            a = rng.uniform(math.radians(8), math.radians(55))
            r = 60.0 + rng.choice([-1.0, 1.0]) * rng.uniform(4.0, 9.0)
            p0 = np.array([-60.0 + r * math.cos(a), r * math.sin(a)])
            tangent = np.array([-math.sin(a), math.cos(a)]) * rng.choice([-1.0, 1.0])
            peds.append(PedestrianSpec(i, [p0.tolist(), (p0 + 30 * tangent).tolist()],
                                       float(rng.uniform(0.8, 1.6)), float(rng.uniform(1.6, 1.8)),
                                       phase=float(rng.uniform(0, 2 * math.pi))))
    elif kind == "crossing":
        ego = EgoPath([[0, 0], [0, 200]], 6.0)
        peds = _sidewalk_pedestrians(rng, n_pedestrians, 90.0, crossing_fraction=0.3)
    elif kind == "standing":
        ego = EgoPath([[0, 0], [0, 10]], 5.0)
        peds = []
        for i in range(n_pedestrians):
            y = rng.uniform(18.0, 40.0)
            x0 = rng.choice([-1.0, 1.0]) * rng.uniform(2.0, 8.0)
            peds.append(PedestrianSpec(i, [[x0, y], [-x0 * 3, y]], float(rng.uniform(0.5, 1.2)),
                                       float(rng.uniform(1.6, 1.8)),
                                       phase=float(rng.uniform(0, 2 * math.pi))))
    elif kind == "static":
        ego = EgoPath([[0, 0], [0, 200]], 5.0)
        peds = []
        for i in range(n_pedestrians):
            x = rng.choice([-1.0, 1.0]) * rng.uniform(3.0, 8.0)
            y = rng.uniform(10.0, 50.0)
            peds.append(PedestrianSpec(i, [[x, y]], 0.0, 1.7))
    else:
        raise ConfigError(f"unknown preset {kind!r}", field="preset")
    return SceneConfig(ego, peds, CameraModel.from_aperture(), duration, 10.0, nz, seed)
