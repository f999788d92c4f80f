"""Frame-by-frame orchestration: associate detections, then estimate positions."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoParallaxError
from .geometry import CameraModel
from .position import RefineConfig, estimate
from .skeleton import Skeleton2D
from .tracker import Tracker

log = logging.getLogger(__name__)


class Pipeline:
    """Stateful per-scene processor.  Feed frames in time order via :meth:`process`."""

    def __init__(self, camera: CameraModel, cfg: RefineConfig | None = None, compensate: bool = True):
        self.camera = camera
        self.cfg = cfg or RefineConfig()
        self.tracker = Tracker(camera, compensate=compensate)
        self.last_association = None
        self.assoc_seconds = 0.0
        self.position_seconds = 0.0
        self.position_calls = 0

    def process(self, frame) -> list:
        t0 = time.perf_counter()
        self.last_association = self.tracker.associate(frame.detections, frame.ego)
        t1 = time.perf_counter()
        out = []
        n = 0
        for track in self.tracker.tracks:
            if track.miss_count or track.last.timestamp != frame.timestamp:
                continue
            n += 1
            try:
                out.append(estimate(track, self.camera, self.cfg))
            except NoParallaxError as exc:
                log.debug("t=%.3f track %d: %s", frame.timestamp, track.id, exc)
        t2 = time.perf_counter()
        self.assoc_seconds = t1 - t0
        self.position_seconds = t2 - t1
        self.position_calls = n
        return out


def run_pipeline(frames, camera: CameraModel, cfg: RefineConfig | None = None) -> list:
    """All estimates for one scene, in frame order then track order."""
    pipe = Pipeline(camera, cfg)
    out = []
    for f in frames:
        out.extend(pipe.process(f))
    return out


@dataclass
class BenchResult:
    association_ms_per_frame: float
    position_ms_per_pedestrian: float
    frames: int
    pedestrians: int
    reps: int
    # (pedestrians in frame, position ms in frame) samples, for scaling checks
    samples: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"association_ms_per_frame": self.association_ms_per_frame,
                "position_ms_per_pedestrian": self.position_ms_per_pedestrian,
                "frames": self.frames, "pedestrians": self.pedestrians, "reps": self.reps}


def bench(frames, camera: CameraModel, cfg: RefineConfig | None = None, reps: int = 5,
          warmup: int = 10) -> BenchResult:
    """Mean wall-clock cost of association per frame and of position estimation per pedestrian.

    The first ``warmup`` frames of every repetition are not timed.
    """
    assoc, pos, n_frames, n_peds = 0.0, 0.0, 0, 0
    samples = []
    for _ in range(reps):
        pipe = Pipeline(camera, cfg)
        # fresh skeletons so nothing cached by an earlier repetition is reused
        run = [replace(f, detections=[Skeleton2D(s.keypoints, s.probs) for s in f.detections])
               for f in frames]
        for k, f in enumerate(run):
            pipe.process(f)
            if k < warmup:
                continue
            assoc += pipe.assoc_seconds
            n_frames += 1
            if pipe.position_calls:
                pos += pipe.position_seconds
                n_peds += pipe.position_calls
                samples.append((pipe.position_calls, 1e3 * pipe.position_seconds))
    return BenchResult(1e3 * assoc / n_frames if n_frames else 0.0,
                       1e3 * pos / n_peds if n_peds else 0.0,
                       n_frames, n_peds, reps, samples)


def scaling_fit(samples):
    """Least-squares line through (pedestrians, ms) samples; returns (slope, intercept, r2)."""
    if len(samples) < 2:
        return 0.0, 0.0, 0.0
    x, y = np.array(samples, dtype=float).T
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid ** 2).sum() / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(icpt), float(r2)
