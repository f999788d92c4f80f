import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import box_skeleton, noiseless
from pedem.errors import BehindCameraError, InvalidInputError
from pedem.geometry import CameraModel, project_to_pixel
from pedem.scenegen import EgoPath, PedestrianSpec, generate
from pedem.skeleton import BBox
from pedem.tracker import (EgoPose, Tracker, assignment_cost, compensate_yaw, giou, giou_matrix,
                           hungarian, iou, wrap_angle)

EGO = EgoPose(0.0, [0, 0, 1.5], 0.0)
CAM = CameraModel.from_aperture()


def ego(t, yaw=0.0):
    return EgoPose(t, [0, 0, 1.5], yaw)


def brute_force(c):
    n = len(c)
    return min(sum(c[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


# -- GIoU ---------------------------------------------------------------------

def test_giou_values():
    assert giou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0
    assert giou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7 - 2 / 9, abs=1e-12)
    assert giou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(-0.0794, abs=1e-4)
    assert giou((0, 0, 1, 1), (2, 0, 3, 1)) == pytest.approx(-1 / 3, abs=1e-12)


def test_giou_degenerate_boxes():
    assert giou((1, 1, 1, 1), (1, 1, 1, 1)) == 0.0
    # two points: union 0, hull 2x0 = 0
    assert giou((0, 0, 0, 0), (2, 0, 2, 0)) == 0.0
    # two zero-area boxes with a proper hull: IoU term 0, penalty (hull - 0) / hull = 1
    assert giou((0, 0, 0, 0), (2, 2, 2, 2)) == -1.0


def test_giou_far_apart_tends_to_minus_one():
    vals = [giou((0, 0, 1, 1), (d, d, d + 1, d + 1)) for d in (10, 100, 1000)]
    assert vals[0] > vals[1] > vals[2] > -1
    assert vals[2] == pytest.approx(-1, abs=1e-2)


boxes = st.tuples(st.floats(-100, 100), st.floats(-100, 100), st.floats(0, 50), st.floats(0, 50)).map(
    lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))


@settings(max_examples=300)
@given(boxes, boxes)
def test_giou_properties(a, b):
    g = giou(a, b)
    assert g == pytest.approx(giou(b, a), abs=1e-12)
    assert g <= iou(a, b) + 1e-12
    assert -1 <= g <= 1


@settings(max_examples=300)
@given(boxes, boxes)
def test_giou_one_iff_identical(a, b):
    if (a[2] - a[0]) * (a[3] - a[1]) > 1e-6:
        assert giou(a, a) == pytest.approx(1.0)
        if giou(a, b) > 1 - 1e-12:
            assert np.allclose(a, b, atol=1e-4)


def test_giou_matrix_shape():
    g = giou_matrix([(0, 0, 1, 1), (5, 5, 6, 6)], [(0, 0, 1, 1), (0, 0, 2, 2), (9, 9, 10, 10)])
    assert g.shape == (2, 3)
    assert g[0, 0] == 1.0 and g[0, 1] == pytest.approx(0.25)


# -- Hungarian ----------------------------------------------------------------

def test_hungarian_examples():
    assert hungarian([[4]]).tolist() == [0]
    a = hungarian([[1, 2], [2, 4]])
    assert a.tolist() == [1, 0]
    assert assignment_cost([[1, 2], [2, 4]], a) == 4


def test_hungarian_rejects():
    with pytest.raises(InvalidInputError):
        hungarian(np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        hungarian([[1.0, np.inf], [0.0, 1.0]])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: arrays(float, (n, n), elements=st.floats(-10, 10))))
def test_hungarian_optimal(c):
    a = hungarian(c)
    assert sorted(a.tolist()) == list(range(len(c)))
    assert assignment_cost(c, a) == pytest.approx(brute_force(c.tolist()), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: arrays(float, (n, n), elements=st.floats(-10, 10))),
       st.floats(-100, 100))
def test_hungarian_shift_invariant(c, k):
    a, b = hungarian(c), hungarian(c + k)
    assert assignment_cost(c, b) == pytest.approx(assignment_cost(c, a), abs=1e-7)


# -- yaw compensation ---------------------------------------------------------

def test_compensate_yaw_formula():
    a = math.radians(64.5)
    assert compensate_yaw(800.0, math.radians(2.0), a, 1600) == pytest.approx(800 - 2 / 64.5 * 1600)
    assert compensate_yaw(800.0, 0.0, a, 1600) == 800.0


def test_wrap_angle():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.25, 0.25), st.floats(-4, 4), st.floats(5, 60), st.floats(math.radians(0.5),
                                                                               math.radians(5)))
def test_compensation_matches_projection(x_over_z, h, z, dpsi):
    """Linear compensation tracks the true pinhole shift of a static point within 2% of w."""
    cam = EgoPose(0, [0, 0, 1.5], 0.0).camera(CAM)
    p = np.array([x_over_z * z, z, 1.5 + h * z / 60])
    u0 = project_to_pixel(cam, p)[0]
    for sign in (1, -1):
        cam1 = EgoPose(0, [0, 0, 1.5], sign * dpsi).camera(CAM)
        try:
            u1 = project_to_pixel(cam1, p)[0]
        except BehindCameraError:
            continue
        if 0 <= u1 <= 1600:
            assert abs(compensate_yaw(u0, sign * dpsi, cam.aperture, 1600) - u1) < 0.02 * 1600


# -- associate ----------------------------------------------------------------

def test_new_tracks_from_empty(camera):
    tr = Tracker(camera)
    res = tr.associate([box_skeleton(0, 0, 50, 100), box_skeleton(200, 0, 250, 100)], EGO)
    assert res.new_tracks == [0, 1] and not res.matches
    assert [t.id for t in tr.tracks] == [0, 1]


def test_identical_box_assigned(camera):
    tr = Tracker(camera)
    s = box_skeleton(100, 100, 150, 250)
    tr.associate([s], ego(0.0))
    res = tr.associate([s], ego(0.1))
    assert [(m.track_id, m.detection) for m in res.matches] == [(0, 0)]
    assert res.matches[0].giou == 1.0
    assert tr.tracks[0].miss_count == 0 and len(tr.tracks[0].history) == 2


def test_removed_on_third_miss(camera):
    tr = Tracker(camera)
    tr.associate([box_skeleton(100, 100, 150, 250)], ego(0.0))
    for k, t in enumerate((0.1, 0.2), start=1):
        res = tr.associate([], ego(t))
        assert res.missed == [0] and not res.removed
        assert tr.get(0).miss_count == k
    res = tr.associate([], ego(0.3))
    assert res.removed == [0] and tr.tracks == [] and tr.get(0) is None


def test_miss_counter_resets(camera):
    tr = Tracker(camera)
    s = box_skeleton(100, 100, 150, 250)
    tr.associate([s], ego(0.0))
    tr.associate([], ego(0.1))
    tr.associate([], ego(0.2))
    tr.associate([s], ego(0.3))
    assert tr.get(0).miss_count == 0
    tr.associate([], ego(0.4))
    tr.associate([], ego(0.5))
    assert tr.get(0) is not None


def test_nonoverlapping_detection_starts_track(camera):
    tr = Tracker(camera)
    tr.associate([box_skeleton(100, 100, 150, 250)], ego(0.0))
    res = tr.associate([box_skeleton(100, 100, 150, 250), box_skeleton(900, 100, 950, 250)], ego(0.1))
    assert res.new_tracks == [1] and [m.track_id for m in res.matches] == [0]
    # a further new detection leaves existing assignments alone and never reuses an id
    res = tr.associate([box_skeleton(100, 100, 150, 250), box_skeleton(900, 100, 950, 250),
                        box_skeleton(400, 100, 450, 250)], ego(0.2))
    assert sorted((m.track_id, m.detection) for m in res.matches) == [(0, 0), (1, 1)]
    assert res.new_tracks == [2]


def test_compensation_keeps_track_across_turn(camera):
    shift = 5 / 64.5 * 1600  # about 124 px for a 5 degree turn
    for comp, expect_match in ((True, True), (False, False)):
        tr = Tracker(camera, compensate=comp)
        tr.associate([box_skeleton(700, 300, 760, 500)], ego(0.0, 0.0))
        res = tr.associate([box_skeleton(700 - shift, 300, 760 - shift, 500)], ego(0.1, math.radians(5)))
        assert bool(res.matches) is expect_match
        if comp:
            assert res.matches[0].iou == pytest.approx(1.0)


def test_history_keeps_original_pixels(camera):
    tr = Tracker(camera)
    s = box_skeleton(700, 300, 760, 500)
    tr.associate([s], ego(0.0, 0.0))
    tr.associate([], ego(0.1, math.radians(1)))
    t = tr.get(0)
    assert t.last.bbox == BBox(700, 300, 760, 500)
    assert t.comp_bbox.u_min == pytest.approx(700 - 1 / 64.5 * 1600)
    assert t.comp_skeleton.keypoints[:, 0] == pytest.approx(s.keypoints[:, 0] - 1 / 64.5 * 1600)


def test_history_bounded(camera):
    tr = Tracker(camera, max_history=4)
    s = box_skeleton(100, 100, 150, 250)
    for k in range(10):
        tr.associate([s], ego(0.1 * k))
    assert len(tr.tracks[0].history) == 4


def test_crossing_pedestrians_keep_ids():
    # a child in front and an adult behind swap sides over ten frames; the camera sees
    # over the child, so both stay detected while their boxes overlap
    peds = [PedestrianSpec(0, [[-0.3, 10.0], [0.3, 10.0]], 0.6, height=1.1),
            PedestrianSpec(1, [[0.6, 20.0], [-0.6, 20.0]], 1.2)]
    cfg = noiseless(peds, ego=EgoPath([[0, 0]], 0.0), duration=1.0)
    frames = generate(cfg)
    assert len(frames) == 10 and all(len(f.detections) == 2 for f in frames)
    tr = Tracker(cfg.camera)
    owner = {}
    for f in frames:
        res = tr.associate(f.detections, f.ego)
        for tid in res.new_tracks:
            det = [j for j in range(len(f.detections)) if tr.get(tid).last.skeleton is f.detections[j]][0]
            owner[tid] = f.det_ids[det]
        for m in res.matches:
            assert owner[m.track_id] == f.det_ids[m.detection]
    assert len(owner) == 2

    def order(f):
        u = {i: s.keypoints[:, 0].mean() for i, s in zip(f.det_ids, f.detections)}
        return u[0] < u[1]
    assert order(frames[0]) and not order(frames[-1])
