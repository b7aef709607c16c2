"""Shared fixture builders for the test suite.

Expected values quoted in tests are frozen from independent computations:
hand enumeration for the tiny fixtures, the brute-force oracle for random
instances.
"""

import numpy as np

from circtrack.cost_models import CostAssignment
from circtrack.graph_model import Detection, build_network


def fixture_a():
    """Two detections with one allowed transition, integer costs.

    Feasible circulations, enumerated by hand:
      empty = 0; singleton x1 = 2 - 5 + 2 = -1; singleton x2 = -1;
      both singletons = -2; linked pair = 2 - 5 + 1 - 5 + 2 = -5.
    Optimal: the single linked cycle at -5.
    """
    dets = [
        Detection(id=1, frame=1, position=(0.0, 0.0)),
        Detection(id=2, frame=2, position=(1.0, 0.0)),
    ]
    costs = CostAssignment(
        enter={1: 2, 2: 2},
        exit={1: 2, 2: 2},
        observation={1: -5, 2: -5},
        transition={(1, 2): 1},
        cost_scale=1,
    )
    return dets, costs, build_network(dets, costs)


def fixture_b():
    """Single detection: singleton cycle 1 - 3 + 1 = -1 beats empty 0."""
    dets = [Detection(id=0, frame=0, position=(0.0, 0.0))]
    costs = CostAssignment(
        enter={0: 1}, exit={0: 1}, observation={0: -3}, transition={}, cost_scale=1
    )
    return dets, costs, build_network(dets, costs)


def fig1_instance():
    """Seven detections over three frames, costs tuned so the optimum is the
    three trajectories (1,3,6), (2,4,7), (5)."""
    frames = {1: 1, 2: 1, 3: 2, 4: 2, 5: 2, 6: 3, 7: 3}
    dets = [
        Detection(id=i, frame=frames[i], position=(float(i), 0.0)) for i in sorted(frames)
    ]
    good = {(1, 3), (3, 6), (2, 4), (4, 7)}
    links = good | {(1, 4), (2, 3), (2, 5), (3, 7), (4, 6), (5, 7)}
    costs = CostAssignment(
        enter={i: 1 for i in frames},
        exit={i: 1 for i in frames},
        observation={i: -4 for i in frames},
        transition={pair: (-5 if pair in good else 5) for pair in links},
        cost_scale=1,
    )
    return dets, costs, build_network(dets, costs)


def random_integer_instance(rng, min_det=2, max_det=12, max_frames=5,
                            lo=-100, hi=100, trans_p=0.5):
    """Random detections over random frames with integer costs in [lo, hi]."""
    n_det = int(rng.integers(min_det, max_det + 1))
    n_frames = int(rng.integers(2, max_frames + 1))
    frames = np.sort(rng.integers(0, n_frames, size=n_det))
    dets = [
        Detection(id=i, frame=int(frames[i]), position=tuple(rng.uniform(0, 10, 2)))
        for i in range(n_det)
    ]
    enter = {i: int(rng.integers(lo, hi + 1)) for i in range(n_det)}
    exit_ = {i: int(rng.integers(lo, hi + 1)) for i in range(n_det)}
    obs = {i: int(rng.integers(lo, hi + 1)) for i in range(n_det)}
    trans = {}
    for i in range(n_det):
        for j in range(n_det):
            if frames[i] < frames[j] and rng.random() < trans_p:
                trans[(i, j)] = int(rng.integers(lo, hi + 1))
    costs = CostAssignment(
        enter=enter, exit=exit_, observation=obs, transition=trans, cost_scale=1
    )
    return dets, costs, build_network(dets, costs)
