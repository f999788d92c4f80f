"""JSON Lines formats for frames (input / ground truth) and position estimates.

Frame line::

    {"t": 0.1, "ego": {"o": [x, y, z], "yaw": rad, "R": [9 numbers, optional]},
     "det": [{"kp": [[u, v] x 17], "p": [17 numbers], "gt_id": int (optional)}],
     "gt": [{"id": int, "pos": [x, y, z], "bbox": [u0, v0, u1, v1], "occ": bool}]}

Estimate line::

    {"t", "track_id", "pos", "pos_initial", "pos_refined", "skeleton3d": [[x, y, z] | null x 17],
     "dir": [x, y, z], "bbox": [u0, v0, u1, v1], "refine_only": bool}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import IngestionError, PedemError
from .skeleton import BBox, Skeleton2D, Skeleton3D
from .tracker import EgoPose


@dataclass
class GTRecord:
    id: int
    pos: np.ndarray
    bbox: BBox
    occluded: bool = False

    def __eq__(self, other):
        return (isinstance(other, GTRecord) and self.id == other.id
                and np.array_equal(self.pos, other.pos) and tuple(self.bbox) == tuple(other.bbox)
                and self.occluded == other.occluded)


@dataclass
class FrameRecord:
    timestamp: float
    ego: EgoPose
    detections: list
    gt: Optional[list] = None
    det_ids: Optional[list] = None  # simulator identity of each detection, if known

    def __eq__(self, other):
        return (isinstance(other, FrameRecord) and self.timestamp == other.timestamp
                and self.ego == other.ego and self.detections == other.detections
                and self.gt == other.gt and self.det_ids == other.det_ids)


def frame_to_dict(f: FrameRecord) -> dict:
    ego = {"o": f.ego.origin.tolist(), "yaw": f.ego.yaw}
    if f.ego.rotation is not None:
        ego["R"] = f.ego.rotation.ravel().tolist()
    dets = []
    for i, s in enumerate(f.detections):
        d = {"kp": s.keypoints.tolist(), "p": s.probs.tolist()}
        if f.det_ids is not None and f.det_ids[i] is not None:
            d["gt_id"] = int(f.det_ids[i])
        dets.append(d)
    out = {"t": f.timestamp, "ego": ego, "det": dets}
    if f.gt is not None:
        out["gt"] = [{"id": int(g.id), "pos": np.asarray(g.pos, dtype=float).tolist(),
                      "bbox": [float(x) for x in g.bbox], "occ": bool(g.occluded)} for g in f.gt]
    return out


def frame_from_dict(d: dict) -> FrameRecord:
    if not isinstance(d, dict):
        raise ValueError("frame must be a JSON object")
    e = d["ego"]
    rot = e.get("R")
    ego = EgoPose(float(d["t"]), e["o"], float(e["yaw"]),
                  None if rot is None else np.asarray(rot, dtype=float).reshape(3, 3))
    dets, ids = [], []
    for det in d.get("det", []):
        dets.append(Skeleton2D(det["kp"], det["p"]))
        ids.append(det.get("gt_id"))
    gt = None
    if "gt" in d:
        gt = [GTRecord(int(g["id"]), np.asarray(g["pos"], dtype=float).reshape(3),
                       BBox(*map(float, g["bbox"])), bool(g.get("occ", False))) for g in d["gt"]]
    has_ids = any(i is not None for i in ids)
    return FrameRecord(ego.timestamp, ego, dets, gt, ids if has_ids else None)


def _lines(path):
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                yield n, line


def read_frames(path) -> list:
    """Parse a frame file; schema problems raise :class:`IngestionError` with the line number."""
    frames = []
    last_t = None
    try:
        for n, line in _lines(path):
            try:
                f = frame_from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, PedemError) as exc:
                what = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                raise IngestionError(what, line=n) from None
            if last_t is not None and not f.timestamp > last_t:
                raise IngestionError(f"timestamp {f.timestamp} not after {last_t}", line=n)
            last_t = f.timestamp
            frames.append(f)
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from None
    return frames


def write_frames(frames: Iterable[FrameRecord], path) -> None:
    Path(path).write_text("".join(json.dumps(frame_to_dict(f)) + "\n" for f in frames))


def dumps_frames(frames: Iterable[FrameRecord]) -> str:
    return "".join(json.dumps(frame_to_dict(f)) + "\n" for f in frames)


def estimate_to_dict(e) -> dict:
    return {
        "t": e.timestamp, "track_id": int(e.track_id),
        "pos": np.asarray(e.position_filtered, dtype=float).tolist(),
        "pos_initial": np.asarray(e.position_initial, dtype=float).tolist(),
        "pos_refined": np.asarray(e.position_refined, dtype=float).tolist(),
        "skeleton3d": e.skeleton3d.to_list(),
        "dir": np.asarray(e.mean_direction, dtype=float).tolist(),
        "bbox": None if e.bbox is None else [float(x) for x in e.bbox],
        "refine_only": bool(e.refine_only),
    }


def estimate_from_dict(d: dict):
    from .position import PedestrianEstimate

    pos = np.asarray(d["pos"], dtype=float)
    skel = Skeleton3D.from_list(d.get("skeleton3d") or [None] * 17)
    bbox = None if d.get("bbox") is None else BBox(*map(float, d["bbox"]))
    return PedestrianEstimate(int(d["track_id"]), float(d["t"]),
                              np.asarray(d.get("pos_initial", pos), dtype=float),
                              np.asarray(d.get("pos_refined", pos), dtype=float),
                              pos, skel, np.asarray(d.get("dir", [np.nan] * 3), dtype=float), bbox,
                              bool(d.get("refine_only", False)))


def read_estimates(path) -> list:
    out = []
    try:
        for n, line in _lines(path):
            try:
                out.append(estimate_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, PedemError) as exc:
                what = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
                raise IngestionError(what, line=n) from None
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from None
    return out


def write_estimates(estimates, path) -> None:
    Path(path).write_text("".join(json.dumps(estimate_to_dict(e)) + "\n" for e in estimates))
