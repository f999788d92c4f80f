"""Ground-truth matching and position error metrics."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .tracker import iou_matrix


@dataclass
class MatchedPair:
    scene: str
    timestamp: float
    track_id: int
    gt_id: int
    predicted: np.ndarray
    truth: np.ndarray
    origin: np.ndarray


def match_gt(estimates, gts, include_occluded: bool = False) -> list:
    """Pair estimates of one frame with ground truth.

    Candidates overlap in the image (IoU > 0); pairs are taken greedily in
    order of increasing world distance, each side used at most once.
    Returns ``[(estimate, gt), ...]``.
    """
    gts = [g for g in gts if include_occluded or not g.occluded]
    ests = [e for e in estimates if e.bbox is not None]
    if not ests or not gts:
        return []
    ov = iou_matrix(np.array([e.bbox for e in ests]), np.array([g.bbox for g in gts])) > 0
    cands = []
    for i, e in enumerate(ests):
        for j, g in enumerate(gts):
            if ov[i, j]:
                d = float(np.linalg.norm(np.asarray(e.position_filtered) - g.pos))
                cands.append((d, i, j))
    cands.sort()
    used_e, used_g, out = set(), set(), []
    for _, i, j in cands:
        if i in used_e or j in used_g:
            continue
        used_e.add(i)
        used_g.add(j)
        out.append((ests[i], gts[j]))
    return out


def match_scene(estimates, frames, scene: str = "scene", position: str = "filtered") -> tuple:
    """Match every frame of a scene.  Returns ``(pairs, n_unmatched_estimates)``.

    ``position`` picks which estimate stage is scored: filtered, refined or initial.
    """
    by_t = defaultdict(list)
    for e in estimates:
        by_t[e.timestamp].append(e)
    attr = {"filtered": "position_filtered", "refined": "position_refined",
            "initial": "position_initial"}[position]
    pairs, unmatched = [], 0
    for f in frames:
        ests = by_t.get(f.timestamp, [])
        matched = match_gt(ests, f.gt or [])
        unmatched += len(ests) - len(matched)
        for e, g in matched:
            pairs.append(MatchedPair(scene, f.timestamp, e.track_id, g.id,
                                     np.asarray(getattr(e, attr), dtype=float), g.pos, f.ego.origin))
    return pairs, unmatched


@dataclass
class ErrorSummary:
    e_abs: float
    e_rel: float
    matches: int
    unmatched: int = 0
    id_switches: int = 0


@dataclass
class DistanceBin:
    low: float
    high: float
    mean_e_abs: float
    count: int


@dataclass
class MetricsReport:
    scenes: dict
    overall: ErrorSummary
    bins: list
    runtime: Optional[dict] = None
    planar: bool = False

    def to_dict(self) -> dict:
        return {
            "planar": self.planar,
            "overall": asdict(self.overall),
            "scenes": {k: asdict(v) for k, v in self.scenes.items()},
            "bins": [asdict(b) for b in self.bins],
            "runtime": self.runtime,
        }


def pair_errors(pairs, planar: bool = False):
    """(e_abs, gt_distance) arrays; planar drops the vertical component of both."""
    if not pairs:
        return np.zeros(0), np.zeros(0)
    pred = np.array([p.predicted for p in pairs])
    gt = np.array([p.truth for p in pairs])
    org = np.array([p.origin for p in pairs])
    k = 2 if planar else 3
    e_abs = np.linalg.norm(pred[:, :k] - gt[:, :k], axis=1)
    dist = np.linalg.norm(gt[:, :k] - org[:, :k], axis=1)
    return e_abs, dist


def id_switches(pairs) -> int:
    """Number of times a ground-truth identity is matched to a different track than before."""
    seq = defaultdict(list)
    for p in pairs:
        seq[(p.scene, p.gt_id)].append((p.timestamp, p.track_id))
    n = 0
    for items in seq.values():
        items.sort()
        n += sum(1 for (_, a), (_, b) in zip(items, items[1:]) if a != b)
    return n


def summarize(pairs, planar: bool = False, unmatched: int = 0) -> ErrorSummary:
    e_abs, dist = pair_errors(pairs, planar)
    if len(e_abs) == 0:
        return ErrorSummary(math.nan, math.nan, 0, unmatched, 0)
    ok = dist > 0
    e_rel = float(np.mean(100.0 * e_abs[ok] / dist[ok])) if ok.any() else math.nan
    return ErrorSummary(float(e_abs.mean()), e_rel, len(pairs), unmatched, id_switches(pairs))


def distance_bins(pairs, bin_width: float = 5.0, planar: bool = False) -> list:
    e_abs, dist = pair_errors(pairs, planar)
    if len(e_abs) == 0:
        return []
    idx = np.floor(dist / bin_width).astype(int)
    out = []
    for b in range(idx.max() + 1):
        sel = idx == b
        if sel.any():
            out.append(DistanceBin(b * bin_width, (b + 1) * bin_width, float(e_abs[sel].mean()),
                                   int(sel.sum())))
    return out


def evaluate(pairs, bin_width: float = 5.0, planar: bool = False, unmatched=None) -> MetricsReport:
    """Error report over matched pairs, per scene and overall.

    ``unmatched`` optionally maps scene name to the count of estimates without
    a ground-truth partner.
    """
    unmatched = unmatched or {}
    by_scene = defaultdict(list)
    for p in pairs:
        by_scene[p.scene].append(p)
    for s in unmatched:
        by_scene.setdefault(s, [])
    scenes = {s: summarize(ps, planar, unmatched.get(s, 0)) for s, ps in sorted(by_scene.items())}
    overall = summarize(list(pairs), planar, sum(unmatched.values()))
    return MetricsReport(scenes, overall, distance_bins(list(pairs), bin_width, planar), planar=planar)


def write_bins_csv(bins, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_low", "bin_high", "mean_e_abs", "count"])
        for b in bins:
            w.writerow([b.low, b.high, f"{b.mean_e_abs:.6f}", b.count])
