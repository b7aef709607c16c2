import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circtrack.cost_models import (
    CostAssignment,
    CostModelConfig,
    EmpiricalDistanceModel,
    estimate_enter_exit_from_counts,
    fit_empirical_distance,
    gate_transitions,
    groundtruth_observation_costs,
    probabilistic_costs,
    refine_costs,
)
from circtrack.graph_model import Detection
from circtrack.tracking_pipeline import Trajectory, TrajectorySet


def det(i, frame, x, y=0.0, beta=0.5):
    return Detection(id=i, frame=frame, position=(float(x), float(y)), beta=beta)


# -- probabilistic costs -------------------------------------------------------

def test_observation_cost_beta_half_is_zero():
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5)
    out = probabilistic_costs([det(0, 0, 0.0, beta=0.5)], cfg, pairs=[])
    assert out.observation[0] == 0.0


def test_observation_cost_beta_09():
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5)
    out = probabilistic_costs([det(0, 0, 0.0, beta=0.9)], cfg, pairs=[])
    assert out.observation[0] == pytest.approx(math.log(9.0), abs=1e-12)
    assert out.observation[0] == pytest.approx(2.1972, abs=1e-4)


def test_enter_probability_one_unclamped_gives_zero_cost():
    cfg = CostModelConfig(p_enter=1.0, p_exit=1.0, clamp_lo=0.0, clamp_hi=1.0)
    out = probabilistic_costs([det(0, 0, 0.0)], cfg, pairs=[])
    assert out.enter[0] == 0.0
    assert out.exit[0] == 0.0


def test_zero_probability_after_unclamped_config_raises():
    cfg = CostModelConfig(p_enter=0.0, p_exit=0.5, clamp_lo=0.0, clamp_hi=1.0)
    with pytest.raises(ValueError, match="enter"):
        probabilistic_costs([det(0, 0, 0.0)], cfg, pairs=[])


def test_global_beta_override():
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5, beta=0.2)
    out = probabilistic_costs([det(0, 0, 0.0, beta=0.9)], cfg, pairs=[])
    assert out.observation[0] == pytest.approx(math.log(0.2 / 0.8))


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=0.98),
    st.floats(min_value=0.001, max_value=0.01),
)
def test_cost_monotonicity(beta, bump):
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5)
    lo = probabilistic_costs([det(0, 0, 0.0, beta=beta)], cfg, pairs=[])
    hi = probabilistic_costs([det(0, 0, 0.0, beta=beta + bump)], cfg, pairs=[])
    assert hi.observation[0] > lo.observation[0]
    c1 = probabilistic_costs([det(0, 0, 0.0)], CostModelConfig(p_enter=0.4, p_exit=0.5), pairs=[])
    c2 = probabilistic_costs([det(0, 0, 0.0)], CostModelConfig(p_enter=0.4 + bump, p_exit=0.5), pairs=[])
    assert c2.enter[0] < c1.enter[0]


def test_transition_cost_uses_empirical_tail():
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5)
    model = fit_empirical_distance([1.0, 2.0, 3.0, 4.0])
    dets = [det(0, 0, 0.0), det(1, 1, 2.5)]
    out = probabilistic_costs(dets, cfg, pairs=[(0, 1)], distance_model=model)
    assert out.transition[(0, 1)] == pytest.approx(-math.log(model.tail_p(2.5)))


# -- empirical distance model --------------------------------------------------

def test_empirical_quartiles():
    model = fit_empirical_distance([1.0, 2.0, 3.0, 4.0])
    assert model.raw_tail_p(2.5) == 0.5  # two of four samples are >= 2.5
    assert model.raw_tail_p(0.0) == 1.0
    assert model.tail_p(0.0) == 1.0
    assert model.tail_p(99.0) == pytest.approx(1.0 / 5.0)
    assert model.tail_p(99.0) > 0.0


def test_empirical_rejects_empty():
    with pytest.raises(ValueError, match="at least one"):
        fit_empirical_distance([])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=40),
    st.lists(st.floats(min_value=0.0, max_value=2e6), min_size=2, max_size=10),
)
def test_empirical_tail_monotone_and_bounded(samples, queries):
    model = fit_empirical_distance(samples)
    values = [model.tail_p(q) for q in sorted(queries)]
    assert all(0.0 < v <= 1.0 for v in values)
    assert all(a >= b for a, b in zip(values, values[1:]))


# -- gating --------------------------------------------------------------------

def test_gating_single_chain():
    cfg = CostModelConfig(gating_k=3, jump_window=2, p_enter=0.5, p_exit=0.5)
    dets = [det(1, 1, 0.0), det(2, 2, 1.0), det(3, 3, 2.0)]
    pairs = gate_transitions(dets, cfg)
    assert set(pairs) == {(1, 2), (1, 3), (2, 3)}


def test_gating_takes_k_nearest():
    cfg = CostModelConfig(gating_k=3, jump_window=1, p_enter=0.5, p_exit=0.5)
    src = det(0, 0, 0.0)
    targets = [det(i, 1, x) for i, x in [(1, 5.0), (2, 1.0), (3, 4.0), (4, 2.0), (5, 3.0)]]
    pairs = gate_transitions([src] + targets, cfg)
    from_src = {j for i, j in pairs if i == 0}
    # brute force: distances 5,1,4,2,3 -> nearest three are ids 2,4,5
    assert from_src == {2, 4, 5}


def test_gating_tie_break_by_id():
    cfg = CostModelConfig(gating_k=1, jump_window=1, p_enter=0.5, p_exit=0.5)
    dets = [det(0, 0, 0.0), det(7, 1, 1.0), det(3, 1, -1.0)]
    pairs = gate_transitions(dets, cfg)
    assert pairs == [(0, 3)]  # equidistant; smaller id wins


def test_gating_respects_jump_window():
    cfg = CostModelConfig(gating_k=3, jump_window=15, p_enter=0.5, p_exit=0.5)
    dets = [det(i, i, float(i)) for i in range(0, 21)]
    pairs = gate_transitions(dets, cfg)
    for i, j in pairs:
        assert 1 <= j - i <= 15
    assert (0, 15) in pairs
    assert (0, 16) not in pairs


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_gating_capacity_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 25))
    dets = [
        Detection(id=i, frame=int(rng.integers(0, 4)), position=tuple(rng.uniform(0, 5, 2)))
        for i in range(n)
    ]
    cfg = CostModelConfig(gating_k=int(rng.integers(1, 4)),
                          jump_window=int(rng.integers(1, 3)),
                          p_enter=0.5, p_exit=0.5)
    frame = {d.id: d.frame for d in dets}
    pairs = gate_transitions(dets, cfg)
    assert len(set(pairs)) == len(pairs)
    per_offset: dict = {}
    for i, j in pairs:
        delta = frame[j] - frame[i]
        assert 1 <= delta <= cfg.jump_window
        per_offset[(i, delta)] = per_offset.get((i, delta), 0) + 1
    assert all(v <= cfg.gating_k for v in per_offset.values())


# -- forced observation costs --------------------------------------------------

def test_groundtruth_costs_formula():
    base = CostAssignment(enter={0: 2.0}, exit={0: 3.0}, observation={0: 9.0},
                          transition={}, cost_scale=1)
    out = groundtruth_observation_costs(base)
    assert out.observation[0] == -5.0
    zero = groundtruth_observation_costs(
        CostAssignment(enter={0: 0.0}, exit={0: 0.0}, observation={0: 1.0},
                       transition={}, cost_scale=1)
    )
    assert zero.observation[0] == 0.0


def test_groundtruth_costs_make_singletons_free():
    cfg = CostModelConfig(p_enter=0.3, p_exit=0.2, force_all_detections=True)
    out = probabilistic_costs([det(0, 0, 0.0, beta=0.7)], cfg, pairs=[])
    assert out.enter[0] + out.observation[0] + out.exit[0] == pytest.approx(0.0)


# -- enter/exit estimation from counts ------------------------------------------

def test_count_estimation_literal_and_clamped():
    dets = (
        [det(i, 0, i) for i in range(3)]
        + [det(10 + i, 1, i) for i in range(5)]
        + [det(20 + i, 2, i) for i in range(4)]
    )
    # counts 3 -> 5 -> 4: one rise of 2, one drop of 1; 12 detections
    p_enter, p_exit = estimate_enter_exit_from_counts(dets, "literal")
    assert p_enter == pytest.approx(2 / 12)
    assert p_exit == pytest.approx(1 / 12)
    p_enter_c, p_exit_c = estimate_enter_exit_from_counts(dets, "clamped")
    assert p_enter_c == pytest.approx((2 + 3) / 12)
    assert p_exit_c == pytest.approx((1 + 4) / 12)


# -- refinement ----------------------------------------------------------------

def _simple_previous(dets, chains):
    trajectories = [Trajectory(detections=list(chain), cost=0) for chain in chains]
    return TrajectorySet(trajectories=trajectories, total_cost=0)


def test_refined_velocity_prediction_prefers_extrapolated_position():
    # one tracked target moving +1 in x per frame, plus stationary decoys
    dets = [
        det(0, 0, 0.0), det(1, 1, 1.0),
        det(2, 2, 2.0),   # where constant velocity predicts detection 1 goes
        det(3, 2, 1.0),   # where it already was
    ]
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5, gating_k=4, jump_window=1)
    previous = _simple_previous(dets, [(0, 1)])
    out = refine_costs(previous, dets, cfg, pairs=[(1, 2), (1, 3)])
    assert out.transition[(1, 2)] < out.transition[(1, 3)]


def test_refined_p_jump_ratio_exact():
    # chain of 11 detections: frames 0..8 consecutive plus two jumps of 2
    frames = [0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12]
    dets = [det(i, f, float(i)) for i, f in enumerate(frames)]
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5, jump_window=2)
    previous = _simple_previous(dets, [tuple(range(11))])
    out = refine_costs(previous, dets, cfg, pairs=[(0, 1)])
    assert out.refinement is not None
    assert out.refinement.linkages == 10
    assert out.refinement.jumps == 2
    assert out.refinement.p_jump == 2 / 10


def test_refined_zero_jumps_clamps_jump_cost():
    dets = [det(0, 0, 0.0), det(1, 1, 1.0), det(2, 3, 2.0)]
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5, jump_window=3)
    previous = _simple_previous(dets, [(0, 1)])
    out = refine_costs(previous, dets, cfg, pairs=[(1, 2)])
    assert out.refinement.p_jump == 0.0
    assert math.isfinite(out.transition[(1, 2)])
    assert out.transition[(1, 2)] == pytest.approx(-math.log(cfg.clamp_lo))


def test_refined_untracked_detection_gets_zero_velocity():
    dets = [det(0, 0, 0.0), det(1, 1, 1.0), det(2, 1, 5.0), det(3, 2, 5.0), det(4, 2, 7.0)]
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5, velocity_neighbors=0)
    previous = _simple_previous(dets, [(0, 1)])
    out = refine_costs(previous, dets, cfg, pairs=[(2, 3), (2, 4)])
    # detection 2 is in no trajectory: distances fall back to raw positions
    assert out.transition[(2, 3)] <= out.transition[(2, 4)]


def test_refined_reestimates_enter_exit():
    dets = [det(0, 0, 0.0), det(1, 1, 1.0), det(2, 0, 9.0), det(3, 1, 9.0)]
    cfg = CostModelConfig(p_enter=0.9, p_exit=0.9)
    previous = _simple_previous(dets, [(0, 1), (2, 3)])
    out = refine_costs(previous, dets, cfg, pairs=[])
    assert out.refinement.p_enter == pytest.approx(2 / 4)
    assert out.enter[0] == pytest.approx(-math.log(0.5))


def test_refine_falls_back_without_linkages():
    dets = [det(0, 0, 0.0), det(1, 1, 1.0)]
    cfg = CostModelConfig(p_enter=0.5, p_exit=0.5)
    previous = _simple_previous(dets, [(0,), (1,)])  # singletons: no linkages
    out = refine_costs(previous, dets, cfg, pairs=[(0, 1)])
    baseline = probabilistic_costs(dets, cfg, pairs=[(0, 1)])
    assert out.refinement is None
    assert out.transition == baseline.transition
    assert out.enter == baseline.enter
