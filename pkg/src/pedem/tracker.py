"""Image-plane pedestrian tracking with yaw compensation, GIoU cost and Hungarian assignment."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .geometry import CameraModel, pixels_to_directions, yaw_rotation
from .skeleton import BBox, Skeleton2D


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    r = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if r == -math.pi else r


@dataclass(frozen=True, eq=False)
class EgoPose:
    timestamp: float
    origin: np.ndarray
    yaw: float
    rotation: Optional[np.ndarray] = None  # full camera-to-world rotation, overrides yaw

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        if self.rotation is not None:
            object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))

    def rotation_matrix(self) -> np.ndarray:
        return self.rotation if self.rotation is not None else yaw_rotation(self.yaw)

    def camera(self, camera: CameraModel) -> CameraModel:
        return camera.posed(self.origin, self.rotation_matrix())

    def __eq__(self, other):
        if not isinstance(other, EgoPose):
            return NotImplemented
        rot_eq = (self.rotation is None and other.rotation is None) or (
            self.rotation is not None and other.rotation is not None
            and np.array_equal(self.rotation, other.rotation))
        return (self.timestamp == other.timestamp and self.yaw == other.yaw
                and np.array_equal(self.origin, other.origin) and rot_eq)


def compensate_yaw(u, delta_yaw: float, aperture: float, width: float):
    """Shift u by the pixel displacement of a yaw change (linear in angle)."""
    return u - (delta_yaw / aperture) * width


# -- box overlap ---------------------------------------------------------------

def _as_boxes(b):
    return np.asarray(b, dtype=float).reshape(-1, 4)


def intersection_matrix(a, b) -> np.ndarray:
    a, b = _as_boxes(a), _as_boxes(b)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    return np.clip(iw, 0, None) * np.clip(ih, 0, None)


def _area(b):
    return (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])


def iou_matrix(a, b) -> np.ndarray:
    a, b = _as_boxes(a), _as_boxes(b)
    inter = intersection_matrix(a, b)
    union = _area(a)[:, None] + _area(b)[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)


def giou_matrix(a, b) -> np.ndarray:
    """Pairwise GIoU.  A zero union contributes an IoU term of 0; a zero hull a penalty of 0."""
    a, b = _as_boxes(a), _as_boxes(b)
    inter = intersection_matrix(a, b)
    union = _area(a)[:, None] + _area(b)[None, :] - inter
    hw = np.maximum(a[:, None, 2], b[None, :, 2]) - np.minimum(a[:, None, 0], b[None, :, 0])
    hh = np.maximum(a[:, None, 3], b[None, :, 3]) - np.minimum(a[:, None, 1], b[None, :, 1])
    hull = hw * hh
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
        penalty = np.where(hull > 0, (hull - union) / hull, 0.0)
    return iou - penalty


def iou(a: BBox, b: BBox) -> float:
    return float(iou_matrix(a, b)[0, 0])


def giou(a: BBox, b: BBox) -> float:
    return float(giou_matrix(a, b)[0, 0])


# -- assignment ----------------------------------------------------------------

def hungarian(cost) -> np.ndarray:
    """Minimum-cost perfect matching of a square matrix.

    Returns ``assign`` with ``assign[j]`` the column given to row ``j``.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidInputError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(c)
    assign = np.empty(c.shape[0], dtype=int)
    assign[rows] = cols
    return assign


def assignment_cost(cost, assign) -> float:
    c = np.asarray(cost, dtype=float)
    return float(c[np.arange(len(assign)), assign].sum())


# -- tracks --------------------------------------------------------------------

@dataclass
class TrackEntry:
    timestamp: float
    skeleton: Skeleton2D  # as observed, in the frame's own image coordinates
    bbox: BBox
    ego: EgoPose
    camera: CameraModel  # posed at ``ego``
    _directions: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def directions(self) -> np.ndarray:
        """Unit world ray directions of the 17 keypoints."""
        if self._directions is None:
            self._directions = pixels_to_directions(self.camera, self.skeleton.keypoints)
        return self._directions


@dataclass
class Track:
    """A pedestrian identity.

    ``history`` keeps observations in their original image coordinates (the
    position estimate needs them that way).  ``comp_shift`` accumulates the
    yaw compensation applied since the latest observation; ``comp_bbox`` and
    ``comp_skeleton`` are that observation moved by it, which is what
    association compares against.
    """

    id: int
    history: deque
    comp_shift: float = 0.0
    miss_count: int = 0
    kalman: object = None
    last_filter_time: Optional[float] = None
    estimates: list = field(default_factory=list)

    @property
    def last(self) -> TrackEntry:
        return self.history[-1]

    @property
    def comp_bbox(self) -> BBox:
        return self.last.bbox.shifted(self.comp_shift)

    @property
    def comp_skeleton(self) -> Skeleton2D:
        return self.last.skeleton.shifted(self.comp_shift)


@dataclass
class Match:
    track_id: int
    detection: int
    giou: float
    iou: float


@dataclass
class AssociationResult:
    matches: list = field(default_factory=list)
    new_tracks: list = field(default_factory=list)
    missed: list = field(default_factory=list)
    removed: list = field(default_factory=list)


class Tracker:
    """Track store for one scene; call :meth:`associate` once per frame, in time order."""

    def __init__(self, camera: CameraModel, max_misses: int = 3, max_history: int = 16,
                 compensate: bool = True):
        self.camera = camera
        self.max_misses = max_misses
        self.max_history = max_history
        self.compensate = compensate
        self.tracks: list[Track] = []
        self._next_id = 0
        self._last_ego: Optional[EgoPose] = None

    def _new_track(self, skel, box, ego, cam) -> Track:
        t = Track(self._next_id, deque(maxlen=self.max_history))
        t.history.append(TrackEntry(ego.timestamp, skel, box, ego, cam))
        self._next_id += 1
        self.tracks.append(t)
        return t

    def associate(self, detections, ego_curr: EgoPose, ego_prev: Optional[EgoPose] = None):
        """Fold one frame of detections into the track list.

        ``ego_prev`` defaults to the pose passed with the previous frame.
        Returns an :class:`AssociationResult`; ``self.tracks`` is updated in place.
        """
        if ego_prev is None:
            ego_prev = self._last_ego
        self._last_ego = ego_curr
        skels = list(detections)
        if skels:
            kp = np.stack([s.keypoints for s in skels])
            det_arr = np.concatenate([kp.min(axis=1), kp.max(axis=1)], axis=1)
            boxes = [BBox(*row) for row in det_arr.tolist()]
        else:
            boxes = []
        result = AssociationResult()
        cam_curr = ego_curr.camera(self.camera)

        if self.compensate and ego_prev is not None and self.tracks:
            dpsi = wrap_angle(ego_curr.yaw - ego_prev.yaw)
            if dpsi != 0.0:
                du = compensate_yaw(0.0, dpsi, self.camera.aperture, self.camera.width)
                for t in self.tracks:
                    t.comp_shift += du

        tracks = self.tracks
        if skels and tracks:
            trk_arr = np.array([t.comp_bbox for t in tracks])
            overlap = intersection_matrix(det_arr, trk_arr) > 0
        else:
            overlap = np.zeros((len(skels), len(tracks)), dtype=bool)
        det_idx = np.flatnonzero(overlap.any(axis=1))
        trk_idx = np.flatnonzero(overlap.any(axis=0))

        assigned_trk = set()
        assigned_det = set()
        if len(det_idx) and len(trk_idx):
            g = giou_matrix(det_arr[det_idx], trk_arr[trk_idx])
            ious = iou_matrix(det_arr[det_idx], trk_arr[trk_idx])
            m, n = g.shape
            size = max(m, n)
            # constant padding does not change which real pairs are optimal
            cost = np.zeros((size, size))
            cost[:m, :n] = -g
            assign = hungarian(cost)
            for r in range(m):
                k = assign[r]
                if k >= n:
                    continue
                j, ti = det_idx[r], trk_idx[k]
                t = tracks[ti]
                result.matches.append(Match(t.id, int(j), float(g[r, k]), float(ious[r, k])))
                t.history.append(TrackEntry(ego_curr.timestamp, skels[j], boxes[j], ego_curr, cam_curr))
                t.comp_shift = 0.0
                t.miss_count = 0
                assigned_trk.add(ti)
                assigned_det.add(j)

        survivors = []
        for ti, t in enumerate(tracks):
            if ti not in assigned_trk:
                t.miss_count += 1
                result.missed.append(t.id)
                if t.miss_count >= self.max_misses:
                    result.removed.append(t.id)
                    continue
            survivors.append(t)
        self.tracks = survivors

        for j in range(len(skels)):
            if j not in assigned_det:
                t = self._new_track(skels[j], boxes[j], ego_curr, cam_curr)
                result.new_tracks.append(t.id)
        return result

    def get(self, track_id: int) -> Optional[Track]:
        for t in self.tracks:
            if t.id == track_id:
                return t
        return None
