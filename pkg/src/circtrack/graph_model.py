"""Circulation-network construction for tracking data association.

Each detection becomes a pre-node/post-node pair joined by an observation
arc; a single dummy hub node closes every trajectory into a directed cycle.
All arcs have unit capacity and scaled-integer costs, and the graph minus
the hub is a DAG because transition arcs only point forward in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from circtrack.cost_models import CostAssignment

# Scaled arc costs beyond this magnitude are rejected: they leave no int64
# headroom for the solver's internal cost multiplier and price updates.
MAX_ABS_SCALED_COST = 2**40

DUMMY_NODE = 0


class ArcKind(IntEnum):
    ENTER = 0        # s -> pre-node
    OBSERVATION = 1  # pre-node -> post-node
    TRANSITION = 2   # post-node -> later pre-node
    EXIT = 3         # post-node -> s


@dataclass(frozen=True)
class Detection:
    """One detected object snapshot.

    beta is the probability that this detection is a false positive and
    must lie strictly inside (0, 1); cost models clamp it before use.
    """

    id: int
    frame: int
    position: tuple[float, ...]
    beta: float = 0.5
    features: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"detection {self.id}: frame must be >= 0, got {self.frame}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"detection {self.id}: beta must be in (0,1), got {self.beta}")


def pre_node(det_index: int) -> int:
    return 2 * det_index + 1


def post_node(det_index: int) -> int:
    return 2 * det_index + 2


class CirculationNetwork:
    """Arena-stored unit-capacity circulation network.

    Original arc i lives at slot 2*i of the flat arrays; its reverse
    residual twin lives at slot 2*i + 1 (twin id = id ^ 1) with negated
    cost and zero capacity, so residual queries never allocate.
    """

    def __init__(
        self,
        node_count: int,
        tails: Sequence[int],
        heads: Sequence[int],
        costs: Sequence[int],
        kinds: Sequence[int],
        detection_ids: Sequence[int],
        cost_scale: int = 10**6,
    ):
        m = len(tails)
        if not (len(heads) == len(costs) == len(kinds) == m):
            raise ValueError("arc field lengths disagree")
        self.node_count = int(node_count)
        self.arc_count = m
        self.cost_scale = int(cost_scale)
        self.dummy_node = DUMMY_NODE
        self.detection_ids = list(detection_ids)
        self.detection_index = {d: i for i, d in enumerate(self.detection_ids)}
        if len(self.detection_index) != len(self.detection_ids):
            raise ValueError("duplicate detection ids")
        # pre(post^-1) pairing is positional: detection i <-> nodes 2i+1, 2i+2
        self.detection_map = {
            d: (pre_node(i), post_node(i)) for i, d in enumerate(self.detection_ids)
        }

        self.tails = np.empty(2 * m, dtype=np.int64)
        self.heads = np.empty(2 * m, dtype=np.int64)
        self.costs = np.empty(2 * m, dtype=np.int64)
        self.caps = np.empty(2 * m, dtype=np.int64)
        t = np.asarray(tails, dtype=np.int64)
        h = np.asarray(heads, dtype=np.int64)
        c = np.asarray(costs, dtype=np.int64)
        if m and (t.min() < 0 or t.max() >= node_count or h.min() < 0 or h.max() >= node_count):
            raise ValueError("arc endpoint out of range")
        if m and np.abs(c).max() > MAX_ABS_SCALED_COST:
            raise ValueError(
                f"scaled arc cost exceeds the supported bound {MAX_ABS_SCALED_COST}"
            )
        self.tails[0::2] = t
        self.tails[1::2] = h
        self.heads[0::2] = h
        self.heads[1::2] = t
        self.costs[0::2] = c
        self.costs[1::2] = -c
        self.caps[0::2] = 1
        self.caps[1::2] = 0
        self.kinds = np.asarray(kinds, dtype=np.int8)
        self.max_abs_cost = int(np.abs(c).max()) if m else 0

        # CSR adjacency over the doubled arc slots (covers reverse traversal).
        order = np.argsort(self.tails, kind="stable")
        counts = np.bincount(self.tails, minlength=self.node_count)
        self.adj_start = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=self.adj_start[1:])
        self.adj_arcs = order.astype(np.int64)

    # -- original-arc views ------------------------------------------------

    def arc_tail(self, i: int) -> int:
        return int(self.tails[2 * i])

    def arc_head(self, i: int) -> int:
        return int(self.heads[2 * i])

    def arc_cost(self, i: int) -> int:
        return int(self.costs[2 * i])

    def arc_kind(self, i: int) -> ArcKind:
        return ArcKind(int(self.kinds[i]))

    def arcs(self) -> Iterable[tuple[int, int, int, ArcKind]]:
        for i in range(self.arc_count):
            yield self.arc_tail(i), self.arc_head(i), self.arc_cost(i), self.arc_kind(i)

    def out_arcs(self, v: int) -> np.ndarray:
        """Doubled-slot arc ids leaving node v (original and twin slots)."""
        return self.adj_arcs[self.adj_start[v] : self.adj_start[v + 1]]


@dataclass
class ValidationReport:
    ok: bool
    checks: dict[str, bool] = field(default_factory=dict)
    first_violation: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok


def _scaled(value: float, scale: int, what: str) -> int:
    if not math.isfinite(value):
        raise ValueError(f"non-finite cost for {what}: {value}")
    s = int(round(value * scale))
    if abs(s) > MAX_ABS_SCALED_COST:
        raise ValueError(
            f"scaled cost for {what} is {s}, beyond the supported bound {MAX_ABS_SCALED_COST}"
        )
    return s


def build_network(detections: Sequence[Detection], costs: "CostAssignment") -> CirculationNetwork:
    """Build the circulation network for a detection set and cost assignment.

    Produces n = 2*len(detections) + 1 nodes (hub node 0; detection i at
    nodes 2i+1 and 2i+2) and m = 3*len(detections) + #transitions arcs.
    Transition pairs must point forward in frame time; duplicates are
    merged keeping the cheaper cost.
    """
    ids = [d.id for d in detections]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"duplicate detection id {dup!r}")
    index = {d.id: k for k, d in enumerate(detections)}
    dims = {len(d.position) for d in detections}
    if len(dims) > 1:
        raise ValueError(f"mixed position dimensionality: {sorted(dims)}")

    scale = costs.cost_scale
    tails: list[int] = []
    heads: list[int] = []
    arc_costs: list[int] = []
    kinds: list[int] = []

    for k, det in enumerate(detections):
        try:
            c_en = costs.enter[det.id]
            c_obs = costs.observation[det.id]
            c_ex = costs.exit[det.id]
        except KeyError as exc:
            raise ValueError(f"missing cost for detection {det.id!r}") from exc
        tails += [DUMMY_NODE, pre_node(k), post_node(k)]
        heads += [pre_node(k), post_node(k), DUMMY_NODE]
        arc_costs += [
            _scaled(c_en, scale, f"enter({det.id})"),
            _scaled(c_obs, scale, f"observation({det.id})"),
            _scaled(c_ex, scale, f"exit({det.id})"),
        ]
        kinds += [ArcKind.ENTER, ArcKind.OBSERVATION, ArcKind.EXIT]

    merged: dict[tuple[int, int], float] = {}
    for (i, j), c in costs.transition.items():
        if i not in index or j not in index:
            raise ValueError(f"transition ({i!r}, {j!r}) references unknown detection")
        if detections[index[i]].frame >= detections[index[j]].frame:
            raise ValueError(
                f"transition ({i!r}, {j!r}) violates temporal order: "
                f"frame {detections[index[i]].frame} >= {detections[index[j]].frame}"
            )
        key = (index[i], index[j])
        if key not in merged or c < merged[key]:
            merged[key] = c
    for (ki, kj) in sorted(merged):
        tails.append(post_node(ki))
        heads.append(pre_node(kj))
        arc_costs.append(_scaled(merged[(ki, kj)], scale, f"transition({ki},{kj})"))
        kinds.append(ArcKind.TRANSITION)

    return CirculationNetwork(
        node_count=2 * len(detections) + 1,
        tails=tails,
        heads=heads,
        costs=arc_costs,
        kinds=kinds,
        detection_ids=ids,
        cost_scale=scale,
    )


def validate_network(net: CirculationNetwork) -> ValidationReport:
    """Check the structural invariants every built network must satisfy.

    (a) the graph minus the hub node is acyclic (topological sort),
    (b) every non-hub node has in-degree 1 or out-degree 1,
    (c) observation-arc endpoints pair up: each pre-node has exactly one
        outgoing arc and each post-node exactly one incoming arc.
    Failures are reported, never raised.
    """
    report = ValidationReport(ok=True)
    n = net.node_count
    s = net.dummy_node
    m = net.arc_count
    tails = net.tails[0::2]
    heads = net.heads[0::2]

    in_deg = np.bincount(heads, minlength=n)
    out_deg = np.bincount(tails, minlength=n)

    # (a) Kahn's algorithm on G \ s.
    keep = (tails != s) & (heads != s)
    sub_in = np.bincount(heads[keep], minlength=n)
    succ: list[list[int]] = [[] for _ in range(n)]
    for a in np.nonzero(keep)[0]:
        succ[tails[a]].append(int(heads[a]))
    queue = [v for v in range(n) if v != s and sub_in[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for w in succ[v]:
            sub_in[w] -= 1
            if sub_in[w] == 0:
                queue.append(w)
    dag_ok = seen == n - 1
    report.checks["dag_without_hub"] = bool(dag_ok)
    if not dag_ok and report.first_violation is None:
        report.first_violation = "cycle exists in the graph with the hub node removed"

    # (b) unit vertex capacity everywhere but the hub.
    uvc = True
    for v in range(n):
        if v == s:
            continue
        if in_deg[v] != 1 and out_deg[v] != 1:
            uvc = False
            if report.first_violation is None:
                report.first_violation = (
                    f"node {v} has in-degree {in_deg[v]} and out-degree {out_deg[v]}"
                )
            break
    report.checks["unit_vertex_capacity"] = uvc

    # (c) pre/post pairing via observation arcs.
    pairing = True
    obs = np.nonzero(net.kinds == ArcKind.OBSERVATION)[0]
    if len(obs) != len(net.detection_ids):
        pairing = False
        if report.first_violation is None:
            report.first_violation = (
                f"{len(obs)} observation arcs for {len(net.detection_ids)} detections"
            )
    for a in obs:
        o, h = int(tails[a]), int(heads[a])
        if out_deg[o] != 1 or in_deg[h] != 1:
            pairing = False
            if report.first_violation is None:
                report.first_violation = (
                    f"observation arc {o}->{h}: pre out-degree {out_deg[o]}, "
                    f"post in-degree {in_deg[h]}"
                )
            break
    report.checks["pre_post_pairing"] = pairing

    report.ok = dag_ok and uvc and pairing
    del m
    return report


def write_graph_dump(net: CirculationNetwork, path: str) -> None:
    """Write the `n m` header and one `tail head cost kind` line per arc."""
    with open(path, "w") as fh:
        fh.write(f"{net.node_count} {net.arc_count}\n")
        for tail, head, cost, kind in net.arcs():
            fh.write(f"{tail} {head} {cost} {kind.name.lower()}\n")


def read_graph_dump(path: str) -> CirculationNetwork:
    """Parse a graph dump produced by write_graph_dump."""
    kind_by_name = {k.name.lower(): k for k in ArcKind}
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'n m'")
        n, m = int(header[0]), int(header[1])
        tails, heads, costs, kinds = [], [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4 or parts[3] not in kind_by_name:
                raise ValueError(f"{path}:{lineno}: expected 'tail head cost kind'")
            tails.append(int(parts[0]))
            heads.append(int(parts[1]))
            costs.append(int(parts[2]))
            kinds.append(kind_by_name[parts[3]])
    if len(tails) != m:
        raise ValueError(f"{path}: header promises {m} arcs, found {len(tails)}")
    det_count = (n - 1) // 2
    if n != 2 * det_count + 1:
        raise ValueError(f"{path}: node count {n} is not 2*detections + 1")
    return CirculationNetwork(
        node_count=n,
        tails=tails,
        heads=heads,
        costs=costs,
        kinds=kinds,
        detection_ids=list(range(det_count)),
        cost_scale=1,
    )
