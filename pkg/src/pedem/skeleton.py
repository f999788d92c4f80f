"""2D/3D skeleton containers and skeleton-derived boxes (17-point COCO layout)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError

COCO_KEYPOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)
NUM_KEYPOINTS = len(COCO_KEYPOINTS)
LEFT_HIP, RIGHT_HIP = COCO_KEYPOINTS.index("left_hip"), COCO_KEYPOINTS.index("right_hip")


class BBox(NamedTuple):
    u_min: float
    v_min: float
    u_max: float
    v_max: float

    @property
    def width(self) -> float:
        return self.u_max - self.u_min

    @property
    def height(self) -> float:
        return self.v_max - self.v_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def shifted(self, du: float, dv: float = 0.0) -> "BBox":
        return BBox(self.u_min + du, self.v_min + dv, self.u_max + du, self.v_max + dv)


@dataclass(frozen=True, eq=False)
class Skeleton2D:
    keypoints: np.ndarray  # (17, 2) pixels
    probs: np.ndarray  # (17,)

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if kp.shape != (NUM_KEYPOINTS, 2):
            raise InvalidInputError(f"skeleton needs {NUM_KEYPOINTS}x2 keypoints, got {kp.shape}")
        if p.shape != (NUM_KEYPOINTS,):
            raise InvalidInputError(f"skeleton needs {NUM_KEYPOINTS} probabilities, got {p.shape}")
        if not np.all(np.isfinite(kp)):
            raise InvalidInputError("keypoints must be finite")
        if np.any(~(p >= 0.0) | ~(p <= 1.0)):
            raise InvalidInputError("probabilities must lie in [0, 1]")
        kp.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "probs", p)

    def shifted(self, du: float) -> "Skeleton2D":
        kp = self.keypoints.copy()
        kp[:, 0] += du
        return Skeleton2D(kp, self.probs)

    def bbox(self) -> BBox:
        return bbox_from_skeleton(self)

    def __eq__(self, other):
        if not isinstance(other, Skeleton2D):
            return NotImplemented
        return bool(np.array_equal(self.keypoints, other.keypoints)
                    and np.array_equal(self.probs, other.probs))


@dataclass(frozen=True, eq=False)
class Skeleton3D:
    keypoints: np.ndarray  # (17, 3) world metres, NaN where invalid
    valid: np.ndarray  # (17,) bool

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=float).reshape(NUM_KEYPOINTS, 3)
        ok = np.asarray(self.valid, dtype=bool).reshape(NUM_KEYPOINTS)
        if not np.all(np.isfinite(kp[ok])):
            raise InvalidInputError("valid 3D keypoints must be finite")
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "valid", ok)

    def to_list(self):
        return [p.tolist() if ok else None for p, ok in zip(self.keypoints, self.valid)]

    @classmethod
    def from_list(cls, items):
        kp = np.full((NUM_KEYPOINTS, 3), np.nan)
        ok = np.zeros(NUM_KEYPOINTS, dtype=bool)
        for i, p in enumerate(items):
            if p is not None:
                kp[i] = p
                ok[i] = True
        return cls(kp, ok)


def bbox_from_skeleton(s: Skeleton2D) -> BBox:
    box = s.__dict__.get("_bbox")
    if box is None:
        kp = s.keypoints
        u_min, v_min = kp.min(axis=0)
        u_max, v_max = kp.max(axis=0)
        box = BBox(float(u_min), float(v_min), float(u_max), float(v_max))
        object.__setattr__(s, "_bbox", box)
    return box


def select_confident(s: Skeleton2D, drop_fraction: float) -> np.ndarray:
    """Indices kept after dropping the ``floor(drop_fraction * 17)`` least probable keypoints.

    Ties drop the lower COCO index first.  The result is sorted.
    """
    if not 0.0 <= drop_fraction < 1.0:
        raise InvalidInputError(f"drop_fraction must lie in [0, 1), got {drop_fraction}")
    n_drop = math.floor(drop_fraction * NUM_KEYPOINTS)
    order = np.argsort(s.probs, kind="stable")
    return np.sort(order[n_drop:])
