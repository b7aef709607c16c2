"""Reference solvers: successive shortest paths on the split flow network,
a dynamic-tree variant, and an exhaustive oracle for small instances.

The flow network splits the circulation hub into a source (keeping the
enter arcs) and a sink (receiving the exit arcs); arc ids and costs match
the circulation network one to one, so flows translate directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from circtrack import _kernels
from circtrack.graph_model import ArcKind, CirculationNetwork

_INF = int(_kernels.INF64)


class FlowNetwork:
    """Source/sink form of a circulation network (same arcs, split hub)."""

    def __init__(self, net: CirculationNetwork):
        self.base = net
        self.source = 0
        self.sink = net.node_count
        self.node_count = net.node_count + 1
        self.arc_count = net.arc_count
        m = net.arc_count

        tails = net.tails[0::2].copy()
        heads = net.heads[0::2].copy()
        heads[net.kinds == ArcKind.EXIT] = self.sink
        costs = net.costs[0::2].copy()

        self.tails = np.empty(2 * m, dtype=np.int64)
        self.heads = np.empty(2 * m, dtype=np.int64)
        self.costs = np.empty(2 * m, dtype=np.int64)
        self.caps = np.empty(2 * m, dtype=np.int64)
        self.tails[0::2] = tails
        self.tails[1::2] = heads
        self.heads[0::2] = heads
        self.heads[1::2] = tails
        self.costs[0::2] = costs
        self.costs[1::2] = -costs
        self.caps[0::2] = 1
        self.caps[1::2] = 0

        order = np.argsort(self.tails, kind="stable")
        counts = np.bincount(self.tails, minlength=self.node_count)
        self.adj_start = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=self.adj_start[1:])
        self.adj_arcs = order.astype(np.int64)
        self.topo_order = self._topological_order()

    def _topological_order(self) -> np.ndarray:
        n = self.node_count
        indeg = np.bincount(self.heads[0::2], minlength=n)
        order = np.empty(n, dtype=np.int64)
        qt = 0
        for v in range(n):
            if indeg[v] == 0:
                order[qt] = v
                qt += 1
        qh = 0
        while qh < qt:
            v = order[qh]
            qh += 1
            for a in self.adj_arcs[self.adj_start[v]:self.adj_start[v + 1]]:
                if self.caps[a] > 0:
                    w = int(self.heads[a])
                    indeg[w] -= 1
                    if indeg[w] == 0:
                        order[qt] = w
                        qt += 1
        if qt != n:
            raise ValueError("flow network is not acyclic; bad circulation input")
        return order


@dataclass
class SspResult:
    flow: np.ndarray  # per original arc, 0/1
    curve: list  # cumulative cost after 0, 1, ... augmentations
    cost: int
    augmentations: int


def _walk_path(fnet: FlowNetwork, parent: np.ndarray) -> tuple[list, int]:
    """Arc slots of the augmenting path ending at the sink, plus true cost."""
    slots = []
    cost = 0
    v = fnet.sink
    while v != fnet.source:
        a = int(parent[v])
        slots.append(a)
        cost += int(fnet.costs[a])
        v = int(fnet.tails[a])
    slots.reverse()
    return slots, cost


def ssp_solve(fnet: FlowNetwork, K: Optional[int] = None) -> SspResult:
    """Successive shortest augmenting paths with node potentials.

    Augments unit flow along the cheapest residual source-sink path until
    the next path would not lower the total cost, or for exactly K
    augmentations when K is given (the cost-per-K curve needs points past
    the minimum). Dijkstra runs on reduced costs, kept non-negative by the
    usual potential update.
    """
    n = fnet.node_count
    m = fnet.arc_count
    flow = np.zeros(2 * m, dtype=np.int64)
    pot = np.empty(n, dtype=np.int64)
    _kernels.dag_potentials_kernel(
        fnet.heads, fnet.costs, fnet.caps, fnet.adj_start, fnet.adj_arcs,
        fnet.topo_order, pot, np.int64(fnet.source),
    )
    reachable = pot < _kernels.INF64

    dist = np.empty(n, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    heap_keys = np.empty(2 * m + 4, dtype=np.int64)
    heap_nodes = np.empty(2 * m + 4, dtype=np.int64)

    curve = [0]
    while K is None or len(curve) <= K:
        if not reachable[fnet.sink]:
            break
        settled, status = _kernels.dijkstra_kernel(
            fnet.heads, fnet.costs, fnet.caps, flow, fnet.adj_start,
            fnet.adj_arcs, pot, np.int64(fnet.source), np.int64(fnet.sink),
            dist, parent, heap_keys, heap_nodes,
        )
        if status != 0:
            raise RuntimeError("negative reduced cost during Dijkstra")
        if not settled[fnet.sink]:
            break
        slots, path_cost = _walk_path(fnet, parent)
        if K is None and path_cost >= 0:
            break
        for a in slots:
            flow[a] += 1
            flow[a ^ 1] -= 1
        eff = np.where(settled, dist, dist[fnet.sink])
        pot[reachable] += eff[reachable]
        curve.append(curve[-1] + path_cost)
    return SspResult(
        flow=flow[0::2].copy(),
        curve=curve,
        cost=curve[-1],
        augmentations=len(curve) - 1,
    )


def dssp_solve(fnet: FlowNetwork, K: Optional[int] = None) -> SspResult:
    """SSP variant that keeps the shortest-path tree between augmentations.

    After each augmentation only the tree descendants of the path nodes
    lose their labels; everything else restarts the next Dijkstra as a
    settled zero-distance source. A simplified take on dynamic shortest
    path trees: it reuses valid regions but rebuilds the invalidated ones.
    """
    n = fnet.node_count
    m = fnet.arc_count
    flow = np.zeros(2 * m, dtype=np.int64)
    pot = np.empty(n, dtype=np.int64)
    _kernels.dag_potentials_kernel(
        fnet.heads, fnet.costs, fnet.caps, fnet.adj_start, fnet.adj_arcs,
        fnet.topo_order, pot, np.int64(fnet.source),
    )
    reachable = pot < _kernels.INF64

    dist = np.empty(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    valid = np.zeros(n, dtype=np.bool_)
    valid[fnet.source] = True
    heap_keys = np.empty(2 * m + 4, dtype=np.int64)
    heap_nodes = np.empty(2 * m + 4, dtype=np.int64)

    curve = [0]
    while K is None or len(curve) <= K:
        if not reachable[fnet.sink]:
            break
        settled, status = _kernels.repair_dijkstra_kernel(
            fnet.heads, fnet.costs, fnet.caps, flow, fnet.adj_start,
            fnet.adj_arcs, pot, valid, np.int64(fnet.sink),
            dist, parent, heap_keys, heap_nodes,
        )
        if status != 0:
            raise RuntimeError("negative reduced cost during Dijkstra repair")
        if not settled[fnet.sink]:
            break
        slots, path_cost = _walk_path(fnet, parent)
        if K is None and path_cost >= 0:
            break
        for a in slots:
            flow[a] += 1
            flow[a ^ 1] -= 1
        eff = np.where(settled, dist, dist[fnet.sink])
        pot[reachable] += eff[reachable]
        curve.append(curve[-1] + path_cost)

        # invalidate the path nodes (sink included) and their tree subtrees
        valid = settled.copy()
        children: list[list[int]] = [[] for _ in range(n)]
        for v in range(n):
            a = int(parent[v])
            if a >= 0:
                children[int(fnet.tails[a])].append(v)
        stack = [int(fnet.heads[a]) for a in slots]
        for v in stack:
            valid[v] = False
        while stack:
            v = stack.pop()
            for w in children[v]:
                if valid[w]:
                    valid[w] = False
                    stack.append(w)
        valid[fnet.source] = True
    return SspResult(
        flow=flow[0::2].copy(),
        curve=curve,
        cost=curve[-1],
        augmentations=len(curve) - 1,
    )


# -- exhaustive oracle --------------------------------------------------------

ORACLE_LIMIT = 14


def _detection_tables(net: CirculationNetwork):
    """Per-detection enter/observation/exit costs and successor lists, read
    back from the arc list so the oracle shares nothing with the solver."""
    d = len(net.detection_ids)
    enter = [None] * d
    obs = [None] * d
    exit_ = [None] * d
    succ: list[list[tuple[int, int, int]]] = [[] for _ in range(d)]
    arc_of = {}
    for a in range(net.arc_count):
        kind = net.arc_kind(a)
        tail, head, cost = net.arc_tail(a), net.arc_head(a), net.arc_cost(a)
        if kind == ArcKind.ENTER:
            enter[(head - 1) // 2] = cost
            arc_of[("en", (head - 1) // 2)] = a
        elif kind == ArcKind.OBSERVATION:
            obs[(tail - 1) // 2] = cost
            arc_of[("obs", (tail - 1) // 2)] = a
        elif kind == ArcKind.EXIT:
            exit_[(tail - 2) // 2] = cost
            arc_of[("ex", (tail - 2) // 2)] = a
        else:
            i = (tail - 2) // 2
            j = (head - 1) // 2
            succ[i].append((j, cost, a))
    if any(v is None for v in enter + obs + exit_):
        raise ValueError("network is missing enter/observation/exit arcs")
    for lst in succ:
        lst.sort()
    topo = _detection_topo_order(d, succ)
    return enter, obs, exit_, succ, arc_of, topo


def _detection_topo_order(d: int, succ) -> list:
    indeg = [0] * d
    for lst in succ:
        for j, _, _ in lst:
            indeg[j] += 1
    order = [i for i in range(d) if indeg[i] == 0]
    head = 0
    while head < len(order):
        i = order[head]
        head += 1
        for j, _, _ in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                order.append(j)
    if len(order) != d:
        raise ValueError("transition arcs contain a cycle")
    return order


@dataclass
class OracleResult:
    cost: int
    cycles: list  # one list of detection ids per selected trajectory


def brute_force_oracle(net: CirculationNetwork, limit: int = ORACLE_LIMIT) -> OracleResult:
    """Exhaustive minimum over all node-disjoint trajectory selections.

    Enumerates, with memoization on the used-detection mask, every way to
    partition a subset of detections into transition-linked paths. Each
    trajectory pays enter + per-detection observation + transitions + exit.
    Intended for instances of at most `limit` detections.
    """
    d = len(net.detection_ids)
    if d > limit:
        raise ValueError(f"instance too large for the oracle: {d} detections")
    enter, obs, exit_, succ, _, topo = _detection_tables(net)
    pos_in_topo = {det: k for k, det in enumerate(topo)}
    memo: dict = {}

    def best(mask: int):
        if mask in memo:
            return memo[mask]
        start = -1
        for det in topo:
            if not mask >> det & 1:
                start = det
                break
        if start < 0:
            return 0, ()
        # leave `start` out of every trajectory
        skip_cost, skip_set = best(mask | 1 << start)
        best_cost, best_set = skip_cost, skip_set

        # or let a trajectory begin at `start` (canonical: the topologically
        # earliest unused detection is always a trajectory head)
        stack = [(start, enter[start] + obs[start], 1 << start, (start,))]
        while stack:
            end, cost, pmask, path = stack.pop()
            total = cost + exit_[end]
            rest_cost, rest_set = best(mask | pmask)
            if total + rest_cost < best_cost:
                best_cost = total + rest_cost
                best_set = (path,) + rest_set
            for j, cst, _ in succ[end]:
                if not (mask | pmask) >> j & 1:
                    stack.append((j, cost + cst + obs[j], pmask | 1 << j, path + (j,)))
        memo[mask] = (best_cost, best_set)
        return memo[mask]

    cost, chosen = best(0)
    ids = net.detection_ids
    cycles = [[ids[i] for i in traj] for traj in chosen]
    cycles.sort(key=lambda t: pos_in_topo[ids.index(t[0])] if t else 0)
    return OracleResult(cost=cost, cycles=cycles)


def enumerate_feasible_circulations(
    net: CirculationNetwork, limit: int = 10
) -> Iterator[tuple]:
    """Yield every feasible integral circulation as (arc id frozenset, cycles).

    Used to score arbitrary objectives over the full solution space of a
    small instance, independently of any solver.
    """
    d = len(net.detection_ids)
    if d > limit:
        raise ValueError(f"instance too large to enumerate: {d} detections")
    enter, obs, exit_, succ, arc_of, topo = _detection_tables(net)
    del enter, obs, exit_

    trans_arc = {}
    for i in range(d):
        for j, _, a in succ[i]:
            trans_arc[(i, j)] = a

    def paths_from(start: int, blocked: int):
        stack = [(start, 1 << start, (start,), frozenset({arc_of[("en", start)], arc_of[("obs", start)]}))]
        while stack:
            end, pmask, path, arcs = stack.pop()
            yield pmask, path, arcs | {arc_of[("ex", end)]}
            for j, _, a in succ[end]:
                if not (blocked | pmask) >> j & 1:
                    stack.append((j, pmask | 1 << j, path + (j,),
                                  arcs | {a, arc_of[("obs", j)]}))

    def expand(mask: int, cycles: tuple, arcs: frozenset):
        start = -1
        for det in topo:
            if not mask >> det & 1:
                start = det
                break
        if start < 0:
            yield arcs, cycles
            return
        yield from expand(mask | 1 << start, cycles, arcs)
        for pmask, path, parcs in paths_from(start, mask):
            yield from expand(mask | pmask, cycles + (path,), arcs | parcs)

    ids = net.detection_ids
    for arcs, cycles in expand(0, (), frozenset()):
        yield arcs, [[ids[i] for i in traj] for traj in cycles]
