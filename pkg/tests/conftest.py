import math

import numpy as np
import pytest

from pedem.geometry import CameraModel
from pedem.scenegen import EgoPath, NoiseConfig, PedestrianSpec, SceneConfig
from pedem.skeleton import NUM_KEYPOINTS, Skeleton2D


@pytest.fixture
def camera():
    return CameraModel.from_aperture(1600, 900, 64.5)


def box_skeleton(u0, v0, u1, v1, prob=1.0):
    """17 keypoints spread over a box; the first two sit on opposite corners."""
    rng = np.random.default_rng(0)
    kp = np.column_stack([rng.uniform(u0, u1, NUM_KEYPOINTS), rng.uniform(v0, v1, NUM_KEYPOINTS)])
    kp[0] = (u0, v0)
    kp[1] = (u1, v1)
    return Skeleton2D(kp, np.full(NUM_KEYPOINTS, prob))


def noiseless(peds, ego=None, duration=10.0, **kw):
    ego = ego or EgoPath([[0.0, 0.0], [0.0, 100.0]], 5.0)
    return SceneConfig(ego, peds, duration=duration, noise=NoiseConfig(0.0, prob_sigma=0.0), **kw)


def static_layout():
    """Five standing pedestrians 10-50 m ahead, alternating sides, never overlapping in the image."""
    spots = [(3.0, 10.0), (-4.0, 20.0), (5.0, 30.0), (-6.0, 40.0), (7.0, 50.0)]
    return [PedestrianSpec(i, [[x, y]]) for i, (x, y) in enumerate(spots)]


def ring_layout(radius, n=8):
    angs = np.radians(np.arange(-80, 100, 25))[:n]
    return [PedestrianSpec(i, [[radius * math.sin(a), radius * math.cos(a)]]) for i, a in enumerate(angs)]


def crowd(n, duration=5.0, seed=0, sigma=2.0):
    """n standing pedestrians 35-65 m ahead on distinct bearings; the ego creeps towards them."""
    rng = np.random.default_rng(seed)
    angs = np.radians(np.linspace(-18.0, 18.0, n)) if n > 1 else np.zeros(1)
    peds = []
    for i, a in enumerate(angs):
        r = rng.uniform(35.0, 65.0)
        peds.append(PedestrianSpec(i, [[r * math.sin(a), r * math.cos(a)]]))
    return SceneConfig(EgoPath([[0.0, 0.0], [0.0, 100.0]], 2.0), peds, duration=duration,
                       noise=NoiseConfig(sigma), seed=seed)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = {}


def record(number, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
