"""World position of tracked pedestrians.

Two consecutive observations of a track are triangulated keypoint by keypoint,
the confident 3D keypoints are averaged into an initial position, the distance
is then rescaled until a person of nominal height reprojects to the observed
skeleton height, and the result is smoothed by a constant-velocity Kalman
filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import BehindCameraError, ConfigError, NoParallaxError
from .geometry import CameraModel, pixels_to_directions, triangulate_batch
from .skeleton import LEFT_HIP, NUM_KEYPOINTS, RIGHT_HIP, BBox, Skeleton2D, Skeleton3D, select_confident

SCHEDULES = ("damped", "paper-gain")


@dataclass
class RefineConfig:
    steps: int = 15
    scale_const: float = 5.0
    schedule: str = "damped"
    person_height: float = 1.7
    refinement_enabled: bool = True
    single_point_init: bool = False
    drop_fraction: float = 0.3
    # camera displacement below which two frames carry no usable parallax
    min_baseline: float = 0.01
    accel_sigma: float = 2.0
    meas_sigma: float = 1.0
    init_pos_var: float = 4.0
    init_vel_var: float = 25.0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("must be >= 0", field="steps")
        if not self.person_height > 0:
            raise ConfigError("must be > 0", field="person_height")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"must be one of {SCHEDULES}", field="schedule")
        if not 0.0 <= self.drop_fraction < 1.0:
            raise ConfigError("must lie in [0, 1)", field="drop_fraction")

    def gain(self, r: int) -> float:
        """Scaling factor used in refinement step ``r`` (1-based)."""
        if self.schedule == "paper-gain":
            return r + self.scale_const
        return 1.0 / (r + self.scale_const)

    def make_filter(self) -> "KalmanCV":
        return KalmanCV(self.accel_sigma, self.meas_sigma, self.init_pos_var, self.init_vel_var)


class KalmanCV:
    """Constant-velocity Kalman filter over 3D position, state ``[x, y, z, vx, vy, vz]``."""

    _H = np.hstack([np.eye(3), np.zeros((3, 3))])

    def __init__(self, accel_sigma=2.0, meas_sigma=1.0, init_pos_var=4.0, init_vel_var=25.0):
        self.accel_sigma = accel_sigma
        self.meas_sigma = meas_sigma
        self.init_pos_var = init_pos_var
        self.init_vel_var = init_vel_var
        self.x: Optional[np.ndarray] = None
        self.P: Optional[np.ndarray] = None
        self.innovation: Optional[np.ndarray] = None
        self.innovation_cov: Optional[np.ndarray] = None
        self.skipped = False

    @property
    def initialized(self) -> bool:
        return self.x is not None

    @property
    def position(self) -> np.ndarray:
        return self.x[:3].copy()

    def _transition(self, dt):
        F = np.eye(6)
        F[:3, 3:] = dt * np.eye(3)
        q = self.accel_sigma ** 2
        Q = np.zeros((6, 6))
        Q[:3, :3] = q * dt ** 4 / 4 * np.eye(3)
        Q[:3, 3:] = Q[3:, :3] = q * dt ** 3 / 2 * np.eye(3)
        Q[3:, 3:] = q * dt ** 2 * np.eye(3)
        return F, Q

    def predicted_position(self, dt: float) -> np.ndarray:
        return self.x[:3] + dt * self.x[3:]

    def predict(self, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        F, Q = self._transition(dt)
        self.x = F @ self.x
        P = F @ self.P @ F.T + Q
        self.P = 0.5 * (P + P.T)

    def update(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        H = self._H
        R = self.meas_sigma ** 2 * np.eye(3)
        y = z - self.x[:3]
        S = self.P[:3, :3] + R
        K = np.linalg.solve(S, self.P[:3, :]).T
        self.x = self.x + K @ y
        IKH = np.eye(6) - K @ H
        P = IKH @ self.P @ IKH.T + K @ R @ K.T
        self.P = 0.5 * (P + P.T)
        self.innovation, self.innovation_cov = y, S
        return self.position

    def step(self, z, dt: Optional[float]) -> np.ndarray:
        """Predict over ``dt`` and fuse ``z``; the first finite measurement initialises the state.

        A non-finite measurement only predicts and sets :attr:`skipped`.
        """
        z = np.asarray(z, dtype=float).reshape(3)
        finite = bool(np.all(np.isfinite(z)))
        self.skipped = not finite
        if not self.initialized:
            if not finite:
                raise ValueError("cannot initialise the filter from a non-finite measurement")
            self.x = np.concatenate([z, np.zeros(3)])
            self.P = np.diag([self.init_pos_var] * 3 + [self.init_vel_var] * 3)
            self.innovation = None
            return self.position
        if dt is not None:
            self.predict(dt)
        if finite:
            return self.update(z)
        return self.position


def kalman_update(kf: KalmanCV, measurement, dt: Optional[float]) -> np.ndarray:
    return kf.step(measurement, dt)


@dataclass
class PedestrianEstimate:
    track_id: int
    timestamp: float
    position_initial: np.ndarray
    position_refined: np.ndarray
    position_filtered: np.ndarray
    skeleton3d: Skeleton3D
    mean_direction: np.ndarray
    bbox: Optional[BBox] = None
    refine_only: bool = False


class InitialEstimate(NamedTuple):
    position: np.ndarray
    skeleton3d: Skeleton3D
    mean_direction: np.ndarray


def mean_direction(directions, keep) -> np.ndarray:
    d = directions[keep].mean(axis=0)
    return d / np.linalg.norm(d)


def _triangulated_skeleton(o_prev, d_prev, o_curr, d_curr):
    pts, _, _, _, valid = triangulate_batch(o_prev, d_prev, o_curr, d_curr)
    return Skeleton3D(pts, valid)


def initial_position(skel_prev: Skeleton2D, skel_curr: Skeleton2D, cam_prev: CameraModel,
                     cam_curr: CameraModel, cfg: RefineConfig,
                     d_prev=None, d_curr=None) -> InitialEstimate:
    """Triangulate two observations of one pedestrian.

    ``cam_prev``/``cam_curr`` are the camera posed at the two ego poses.  Ray
    directions may be passed in when already known.
    """
    o_prev, o_curr = cam_prev.translation, cam_curr.translation
    if d_prev is None:
        d_prev = pixels_to_directions(cam_prev, skel_prev.keypoints)
    if d_curr is None:
        d_curr = pixels_to_directions(cam_curr, skel_curr.keypoints)
    keep = select_confident(skel_curr, cfg.drop_fraction)
    direction = mean_direction(d_curr, keep)
    if np.linalg.norm(o_curr - o_prev) < cfg.min_baseline:
        raise NoParallaxError("camera did not move between the two frames")
    skel3d = _triangulated_skeleton(o_prev, d_prev, o_curr, d_curr)

    if cfg.single_point_init:
        mid_prev = skel_prev.keypoints[[LEFT_HIP, RIGHT_HIP]].mean(axis=0, keepdims=True)
        mid_curr = skel_curr.keypoints[[LEFT_HIP, RIGHT_HIP]].mean(axis=0, keepdims=True)
        pts, _, _, _, valid = triangulate_batch(
            o_prev, pixels_to_directions(cam_prev, mid_prev),
            o_curr, pixels_to_directions(cam_curr, mid_curr))
        if not valid[0]:
            raise NoParallaxError("midpoint rays cannot be triangulated")
        return InitialEstimate(pts[0], skel3d, direction)

    use = keep[skel3d.valid[keep]]
    if len(use) == 0:
        raise NoParallaxError("no confident keypoint could be triangulated")
    return InitialEstimate(skel3d.keypoints[use].mean(axis=0), skel3d, direction)


def height_px(camera: CameraModel, ground_point, person_height: float) -> float:
    """Pixel height of a standing person whose feet are at ``ground_point``."""
    R, P = camera.rotation, camera.projection
    bottom = R.T @ (np.array([ground_point[0], ground_point[1], 0.0]) - camera.translation)
    top = bottom + person_height * R[2]
    if not (bottom[2] > 0 and top[2] > 0):
        raise BehindCameraError("person is not in front of the camera")
    hb, ht = P[1:] @ bottom, P[1:] @ top
    return float(hb[0] / hb[1] - ht[0] / ht[1])


def refine(position, direction, h_orig: float, camera: CameraModel, cfg: RefineConfig) -> np.ndarray:
    """Rescale the distance along ``direction`` until the nominal height matches ``h_orig``.

    ``camera`` is posed at the current frame.  Stops early (keeping the current
    value) once the estimate falls behind the camera.
    """
    pos = np.array(position, dtype=float)
    if not cfg.refinement_enabled or not h_orig > 0:
        return pos
    o = camera.translation
    dist = float(np.linalg.norm(pos - o))
    for r in range(1, cfg.steps + 1):
        try:
            h_est = height_px(camera, pos, cfg.person_height)
        except BehindCameraError:
            break
        dist = dist * (1.0 + (h_est / h_orig - 1.0) * cfg.gain(r))
        pos = o + dist * direction
    return pos


def estimate(track, camera: CameraModel, cfg: RefineConfig) -> PedestrianEstimate:
    """Position estimate for the newest observation of ``track``.

    Uses the previous observation for triangulation.  Without parallax the
    refinement starts from the filter's prediction instead; a track that has
    never been triangulated raises :class:`NoParallaxError`.  The estimate is
    appended to ``track.estimates``.
    """
    curr = track.history[-1]
    cam_curr = curr.camera
    d_curr = curr.directions
    init = None
    if len(track.history) >= 2:
        prev = track.history[-2]
        try:
            init = initial_position(prev.skeleton, curr.skeleton, prev.camera, cam_curr, cfg,
                                    prev.directions, d_curr)
        except NoParallaxError:
            init = None

    kf = track.kalman
    dt = None if track.last_filter_time is None else curr.timestamp - track.last_filter_time
    if init is None:
        if kf is None or not kf.initialized:
            raise NoParallaxError(f"track {track.id} has no parallax yet")
        start = kf.predicted_position(dt)
        direction = mean_direction(d_curr, select_confident(curr.skeleton, cfg.drop_fraction))
        skel3d = Skeleton3D(np.full((NUM_KEYPOINTS, 3), np.nan), np.zeros(NUM_KEYPOINTS, bool))
        refine_only = True
    else:
        start, skel3d, direction = init
        refine_only = False

    if refine_only and not cfg.refinement_enabled:
        refined = start.copy()
        filtered = kf.step(np.full(3, np.nan), dt)
    else:
        refined = refine(start, direction, curr.bbox.height, cam_curr, cfg)
        if kf is None:
            kf = track.kalman = cfg.make_filter()
        filtered = kf.step(refined, dt)
    track.last_filter_time = curr.timestamp

    est = PedestrianEstimate(track.id, curr.timestamp, np.asarray(start, dtype=float), refined,
                             filtered, skel3d, direction, curr.bbox, refine_only)
    track.estimates.append(est)
    return est
