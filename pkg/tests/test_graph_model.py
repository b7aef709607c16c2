import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circtrack.cost_models import CostAssignment
from circtrack.graph_model import (
    ArcKind,
    CirculationNetwork,
    Detection,
    build_network,
    read_graph_dump,
    validate_network,
    write_graph_dump,
)
from helpers import fig1_instance, fixture_a, random_integer_instance


def test_two_detection_arc_counts():
    _, _, net = fixture_a()
    assert net.node_count == 5
    assert net.arc_count == 7  # 2 enter, 2 observation, 2 exit, 1 transition
    kinds = [net.arc_kind(a) for a in range(net.arc_count)]
    assert kinds.count(ArcKind.ENTER) == 2
    assert kinds.count(ArcKind.OBSERVATION) == 2
    assert kinds.count(ArcKind.EXIT) == 2
    assert kinds.count(ArcKind.TRANSITION) == 1


def test_empty_network():
    net = build_network([], CostAssignment(cost_scale=1))
    assert net.node_count == 1
    assert net.arc_count == 0
    assert net.max_abs_cost == 0
    assert validate_network(net).ok


def test_seven_detection_fig_structure():
    _, costs, net = fig1_instance()
    assert net.node_count == 15
    assert net.arc_count == 21 + len(costs.transition)
    assert validate_network(net).ok


def test_node_numbering_and_detection_map():
    dets, _, net = fixture_a()
    assert net.dummy_node == 0
    for k, det in enumerate(dets):
        assert net.detection_map[det.id] == (2 * k + 1, 2 * k + 2)
    # round trip: observation arcs pair exactly the mapped nodes
    for a in range(net.arc_count):
        if net.arc_kind(a) == ArcKind.OBSERVATION:
            pre, post = net.arc_tail(a), net.arc_head(a)
            det_id = net.detection_ids[(pre - 1) // 2]
            assert net.detection_map[det_id] == (pre, post)


def test_twin_slot_layout():
    _, _, net = fixture_a()
    for a in range(net.arc_count):
        fwd, rev = 2 * a, 2 * a + 1
        assert rev == fwd ^ 1
        assert net.tails[fwd] == net.heads[rev]
        assert net.heads[fwd] == net.tails[rev]
        assert net.costs[fwd] == -net.costs[rev]
        assert net.caps[fwd] == 1 and net.caps[rev] == 0


def test_duplicate_detection_id_rejected():
    dets = [
        Detection(id=1, frame=0, position=(0.0, 0.0)),
        Detection(id=1, frame=1, position=(1.0, 0.0)),
    ]
    costs = CostAssignment(
        enter={1: 0}, exit={1: 0}, observation={1: 0}, transition={}, cost_scale=1
    )
    with pytest.raises(ValueError, match="duplicate"):
        build_network(dets, costs)


def test_temporal_order_rejected():
    dets = [
        Detection(id=1, frame=1, position=(0.0, 0.0)),
        Detection(id=2, frame=1, position=(1.0, 0.0)),
    ]
    costs = CostAssignment(
        enter={1: 0, 2: 0},
        exit={1: 0, 2: 0},
        observation={1: 0, 2: 0},
        transition={(1, 2): 1.0},
        cost_scale=1,
    )
    with pytest.raises(ValueError, match="temporal"):
        build_network(dets, costs)


def test_non_finite_cost_rejected():
    dets = [Detection(id=1, frame=0, position=(0.0, 0.0))]
    costs = CostAssignment(
        enter={1: math.nan}, exit={1: 0}, observation={1: 0}, transition={}, cost_scale=1
    )
    with pytest.raises(ValueError, match="non-finite"):
        build_network(dets, costs)


def test_missing_cost_rejected():
    dets = [Detection(id=1, frame=0, position=(0.0, 0.0))]
    with pytest.raises(ValueError, match="missing cost"):
        build_network(dets, CostAssignment(cost_scale=1))


def test_mixed_dimensionality_rejected():
    dets = [
        Detection(id=1, frame=0, position=(0.0, 0.0)),
        Detection(id=2, frame=1, position=(1.0, 0.0, 2.0)),
    ]
    costs = CostAssignment(
        enter={1: 0, 2: 0}, exit={1: 0, 2: 0}, observation={1: 0, 2: 0},
        transition={}, cost_scale=1,
    )
    with pytest.raises(ValueError, match="dimensionality"):
        build_network(dets, costs)


def test_duplicate_transition_keeps_cheaper():
    dets = [
        Detection(id="a", frame=0, position=(0.0, 0.0)),
        Detection(id="b", frame=1, position=(1.0, 0.0)),
    ]
    costs = CostAssignment(
        enter={"a": 0, "b": 0}, exit={"a": 0, "b": 0},
        observation={"a": 0, "b": 0},
        transition={("a", "b"): 7.0},
        cost_scale=1,
    )
    costs.transition[("a", "b")] = 7.0
    net1 = build_network(dets, costs)
    costs.transition[("a", "b")] = 3.0
    net2 = build_network(dets, costs)
    t1 = [net1.arc_cost(a) for a in range(net1.arc_count)
          if net1.arc_kind(a) == ArcKind.TRANSITION]
    t2 = [net2.arc_cost(a) for a in range(net2.arc_count)
          if net2.arc_kind(a) == ArcKind.TRANSITION]
    assert t1 == [7] and t2 == [3]


def test_cost_scaling_rounds_to_integers():
    dets = [Detection(id=1, frame=0, position=(0.0, 0.0))]
    costs = CostAssignment(
        enter={1: 1.25}, exit={1: -0.5}, observation={1: 0.0000004},
        transition={}, cost_scale=10**6,
    )
    net = build_network(dets, costs)
    by_kind = {net.arc_kind(a): net.arc_cost(a) for a in range(net.arc_count)}
    assert by_kind[ArcKind.ENTER] == 1_250_000
    assert by_kind[ArcKind.EXIT] == -500_000
    assert by_kind[ArcKind.OBSERVATION] == 0


def test_validate_passes_on_built_network():
    _, _, net = fixture_a()
    report = validate_network(net)
    assert report.ok and report.first_violation is None
    assert report.checks == {
        "dag_without_hub": True,
        "unit_vertex_capacity": True,
        "pre_post_pairing": True,
    }


def _raw_two_detection_arcs():
    return (
        [0, 1, 2, 0, 3, 4],
        [1, 2, 0, 3, 4, 0],
        [0, 0, 0, 0, 0, 0],
        [ArcKind.ENTER, ArcKind.OBSERVATION, ArcKind.EXIT,
         ArcKind.ENTER, ArcKind.OBSERVATION, ArcKind.EXIT],
    )


def test_validate_flags_cycle_without_hub():
    tails, heads, costs, kinds = _raw_two_detection_arcs()
    # forward transition 2->3 plus a backward 4->1 closes a cycle off the hub
    tails += [2, 4]
    heads += [3, 1]
    costs += [0, 0]
    kinds += [ArcKind.TRANSITION, ArcKind.TRANSITION]
    net = CirculationNetwork(5, tails, heads, costs, kinds, [10, 20], cost_scale=1)
    report = validate_network(net)
    assert not report.ok
    assert report.checks["dag_without_hub"] is False


def test_validate_flags_unit_vertex_capacity():
    tails, heads, costs, kinds = _raw_two_detection_arcs()
    # second outgoing arc from pre-node 3, which also has in-degree 2
    tails += [2, 3]
    heads += [3, 0]
    costs += [0, 0]
    kinds += [ArcKind.TRANSITION, ArcKind.EXIT]
    net = CirculationNetwork(5, tails, heads, costs, kinds, [10, 20], cost_scale=1)
    report = validate_network(net)
    assert not report.ok
    assert report.checks["dag_without_hub"] is True
    assert report.checks["unit_vertex_capacity"] is False
    assert "node 3" in report.first_violation


def test_graph_dump_round_trip(tmp_path):
    _, _, net = fig1_instance()
    path = tmp_path / "net.dump"
    write_graph_dump(net, str(path))
    loaded = read_graph_dump(str(path))
    assert loaded.node_count == net.node_count
    assert loaded.arc_count == net.arc_count
    assert np.array_equal(loaded.tails, net.tails)
    assert np.array_equal(loaded.heads, net.heads)
    assert np.array_equal(loaded.costs, net.costs)
    assert np.array_equal(loaded.kinds, net.kinds)
    assert validate_network(loaded).ok


def test_graph_dump_rejects_malformed(tmp_path):
    path = tmp_path / "bad.dump"
    path.write_text("3 1\n0 1 5 sideways\n")
    with pytest.raises(ValueError, match=":2"):
        read_graph_dump(str(path))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_network_counts_match_recounts(seed):
    rng = np.random.default_rng(seed)
    dets, costs, net = random_integer_instance(rng, min_det=0, max_det=8)
    assert net.node_count == 2 * len(dets) + 1
    assert net.arc_count == 3 * len(dets) + len(costs.transition)
    recount_c = max((abs(net.arc_cost(a)) for a in range(net.arc_count)), default=0)
    assert net.max_abs_cost == recount_c
    report = validate_network(net)
    assert report.ok, report.first_violation
    # pre out-degree and post in-degree are exactly one
    tails = net.tails[0::2]
    heads = net.heads[0::2]
    out_deg = np.bincount(tails, minlength=net.node_count)
    in_deg = np.bincount(heads, minlength=net.node_count)
    for det_id, (pre, post) in net.detection_map.items():
        assert out_deg[pre] == 1
        assert in_deg[post] == 1
