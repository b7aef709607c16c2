"""Cost-scaling minimum-cost circulation solver with blocking-flow pushes.

The solver keeps a pseudo-flow, node prices, and a scale parameter eps,
maintaining eps-optimality (every residual arc has reduced cost >= -eps).
Each refine iteration halves eps, saturates all admissible arcs, and
restores feasibility by alternating set-relabel (grow the admissible
network backward from deficit nodes by raising prices) with depth-first
unit pushes guided by the marked blocking structure. Price-only
refinement then tries to halve eps again without touching the flow.

Costs are multiplied internally by (n + 1) so that integer arithmetic is
exact end to end: an eps = 1 circulation in internal units is optimal for
the network's integer costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from circtrack import _kernels
from circtrack.graph_model import CirculationNetwork

# Prices beyond this magnitude would risk int64 overflow in reduced costs.
MAX_ABS_PRICE = 2**61


@dataclass
class SolveOptions:
    enable_arc_fixing: bool = True
    push_budget_factor: int = 2
    collect_stats: bool = True
    on_refine: Optional[Callable[["SolverState"], None]] = None

    def __post_init__(self):
        if self.push_budget_factor < 1:
            raise ValueError("push_budget_factor must be >= 1")


@dataclass
class SolveStats:
    refine_iterations: int = 0
    restore_rounds: int = 0
    set_relabel_rounds: int = 0
    relabels: int = 0
    pushes: int = 0
    paths: int = 0
    scanned_arcs: int = 0
    price_refinement_attempts: int = 0
    price_refinement_successes: int = 0
    arcs_fixed: int = 0
    epsilon_final: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BlockingStructure:
    """Reverse-reachability marks from the final set-relabel pass."""

    marked_arcs: np.ndarray  # bool per doubled slot
    reaches_deficit: np.ndarray  # bool per node

    @staticmethod
    def empty(net: CirculationNetwork) -> "BlockingStructure":
        return BlockingStructure(
            marked_arcs=np.zeros(2 * net.arc_count, dtype=np.bool_),
            reaches_deficit=np.zeros(net.node_count, dtype=np.bool_),
        )


class SolverState:
    """Flow, prices, excesses, and eps for one solve on one network."""

    def __init__(self, net: CirculationNetwork, opts: Optional[SolveOptions] = None):
        self.net = net
        self.opts = opts or SolveOptions()
        self.n = net.node_count
        self.multiplier = self.n + 1
        self.costs = net.costs * np.int64(self.multiplier)
        self.flow = np.zeros(2 * net.arc_count, dtype=np.int64)
        self.price = np.zeros(self.n, dtype=np.int64)
        self.excess = np.zeros(self.n, dtype=np.int64)
        self.fixed = np.zeros(2 * net.arc_count, dtype=np.bool_)
        self.eps = max(1, net.max_abs_cost * self.multiplier)
        self.stats = SolveStats()
        # cap of ceil(sqrt(n)) price-refinement passes, fixed by design
        r = math.isqrt(self.n)
        self.price_refine_cap = r if r * r == self.n else r + 1

    # -- queries -------------------------------------------------------------

    def residuals(self) -> np.ndarray:
        return self.net.caps - self.flow

    def reduced_costs(self) -> np.ndarray:
        return self.costs + self.price[self.net.tails] - self.price[self.net.heads]

    def total_excess(self) -> int:
        e = self.excess
        return int(e[e > 0].sum())

    def excess_nodes(self) -> np.ndarray:
        return np.nonzero(self.excess > 0)[0]

    def deficit_nodes(self) -> np.ndarray:
        return np.nonzero(self.excess < 0)[0]

    def set_arc_flow(self, arc: int, value: int) -> None:
        """Force flow on an original arc (test fixture helper); keeps twin
        antisymmetry and excess bookkeeping consistent."""
        a = 2 * arc
        delta = value - self.flow[a]
        self.flow[a] += delta
        self.flow[a ^ 1] -= delta
        self.excess[self.net.tails[a]] -= delta
        self.excess[self.net.heads[a]] += delta


class AdmissibleView:
    """Read-only queries over the admissible network of a state."""

    def __init__(self, state: SolverState):
        self.state = state

    def is_admissible(self, slot: int) -> bool:
        st = self.state
        if st.fixed[slot] or st.net.caps[slot] - st.flow[slot] <= 0:
            return False
        rc = st.costs[slot] + st.price[st.net.tails[slot]] - st.price[st.net.heads[slot]]
        return bool(rc < 0)

    def arcs(self) -> np.ndarray:
        st = self.state
        rc = st.reduced_costs()
        mask = (~st.fixed) & (st.residuals() > 0) & (rc < 0)
        return np.nonzero(mask)[0]

    def reach_deficit_set(self) -> set:
        """Nodes from which a deficit node is reachable in the admissible
        network, deficit nodes included: the set-relabel set S."""
        st = self.state
        net = st.net
        in_s = set(int(v) for v in st.deficit_nodes())
        stack = list(in_s)
        while stack:
            v = stack.pop()
            for a in net.out_arcs(v):
                t = int(a) ^ 1
                if self.is_admissible(t):
                    u = int(net.heads[a])
                    if u not in in_s:
                        in_s.add(u)
                        stack.append(u)
        return in_s


@dataclass
class SolveResult:
    flow: np.ndarray  # per original arc, 0/1
    total_cost: int  # in the network's scaled-integer units
    stats: SolveStats
    state: SolverState = field(repr=False, default=None)


def check_epsilon_optimality(state: SolverState, net: CirculationNetwork,
                             eps: Optional[int] = None) -> bool:
    """Full residual scan: every residual arc has reduced cost >= -eps."""
    if eps is None:
        eps = state.eps
    rc = state.reduced_costs()
    resid = state.residuals() > 0
    if not resid.any():
        return True
    return bool((rc[resid] >= -eps).min())


def arc_fixing(net: CirculationNetwork, state: SolverState,
               threshold: Optional[float] = None) -> int:
    """Exclude arcs whose reduced-cost magnitude pins their optimal flow.

    With an eps-optimal circulation, |reduced cost| > 2*n*eps means the
    arc carries the same flow in every optimal circulation, so scans can
    skip it. Must be called at circulation states only. Returns the count
    of fixed slots."""
    if threshold is None:
        threshold = 2 * state.n * state.eps
    if not math.isfinite(threshold):
        state.fixed[:] = False
        state.stats.arcs_fixed = 0
        return 0
    thr = np.int64(min(int(threshold), 2**62))
    rc = state.reduced_costs()
    np.greater(np.abs(rc), thr, out=state.fixed)
    count = int(state.fixed.sum())
    state.stats.arcs_fixed = count
    return count


def _saturate_admissible(state: SolverState) -> int:
    """Saturate every admissible arc, leaving no residual arc with negative
    reduced cost; excesses and deficits appear here."""
    net = state.net
    rc = state.reduced_costs()
    resid = net.caps - state.flow
    mask = (~state.fixed) & (resid > 0) & (rc < 0)
    idx = np.nonzero(mask)[0]
    if state.opts.collect_stats:
        state.stats.scanned_arcs += int((~state.fixed).sum())
    if idx.size == 0:
        return 0
    r = resid[idx]
    state.flow[idx] += r
    state.flow[idx ^ 1] -= r
    np.subtract.at(state.excess, net.tails[idx], r)
    np.add.at(state.excess, net.heads[idx], r)
    return int(idx.size)


def set_relabel(state: SolverState, net: CirculationNetwork) -> tuple:
    """Raise prices until every excess node can reach a deficit node in the
    admissible network; returns the marked blocking structure."""
    round_limit = 100 * (math.isqrt(state.n) + 2) + 10_000
    fix_threshold = min(2 * state.n * state.eps, 2**62)
    rounds, relabels, scanned, ok, marked, in_s = _kernels.set_relabel_kernel(
        net.tails, net.heads, state.costs, net.caps, state.flow, state.price,
        state.excess, state.fixed, net.adj_start, net.adj_arcs,
        np.int64(state.eps), np.int64(round_limit), np.int64(fix_threshold),
    )
    st = state.stats
    st.set_relabel_rounds += int(rounds)
    st.relabels += int(relabels)
    if state.opts.collect_stats:
        st.scanned_arcs += int(scanned)
    if not ok:
        raise RuntimeError(
            "set-relabel could not bring every excess node into the admissible "
            "network; the cost-scaling invariant is broken"
        )
    return state, BlockingStructure(marked_arcs=marked, reaches_deficit=in_s)


def push_relabel_along_blocking(state: SolverState, net: CirculationNetwork,
                                blocking: BlockingStructure,
                                push_budget: int) -> SolverState:
    """Drain excess along admissible paths, marked arcs first.

    Each completed excess-to-deficit path is saturated atomically, so total
    excess never increases and drops by one per path; the call stops once
    the push budget is spent (never before the first completed path)."""
    pushes, paths, scanned, status = _kernels.blocking_push_kernel(
        net.heads, state.costs, net.caps, state.flow, state.price, state.excess,
        state.fixed, net.adj_start, net.adj_arcs, blocking.marked_arcs,
        np.int64(push_budget),
    )
    if status != 0:
        raise RuntimeError("admissible network contained a cycle during pushes")
    st = state.stats
    st.pushes += int(pushes)
    st.paths += int(paths)
    if state.opts.collect_stats:
        st.scanned_arcs += int(scanned)
    return state


def refine_once(state: SolverState, net: CirculationNetwork) -> SolverState:
    """One scaling iteration: halve eps, saturate admissible arcs, restore
    feasibility; the result is an eps-optimal circulation."""
    state.eps = (state.eps + 1) // 2
    _saturate_admissible(state)
    budget = state.opts.push_budget_factor * max(net.arc_count, 1)
    guard = 0
    guard_limit = 200 * (math.isqrt(state.n) + 2) + 20_000
    while state.total_excess() > 0:
        _, blocking = set_relabel(state, net)
        push_relabel_along_blocking(state, net, blocking, budget)
        state.stats.restore_rounds += 1
        guard += 1
        if guard > guard_limit:
            raise RuntimeError("restore loop failed to drain excess")
    state.stats.refine_iterations += 1
    if int(np.abs(state.price).max(initial=0)) > MAX_ABS_PRICE:
        raise RuntimeError("node prices exceeded the supported integer range")
    return state


def price_refinement(state: SolverState, net: CirculationNetwork,
                     cap: Optional[int] = None) -> tuple:
    """Try to certify (eps/2)-optimality by price updates alone.

    Gives up untouched when the admissible network has a cycle or when the
    relaxation has not converged after cap passes; on success applies the
    price adjustment atomically and halves eps. Either way the state stays
    eps-optimal."""
    if cap is None:
        cap = state.price_refine_cap
    state.stats.price_refinement_attempts += 1
    order, qt, adm, has_cycle = _kernels.admissible_topo_kernel(
        net.tails, net.heads, state.costs, net.caps, state.flow, state.price,
        state.fixed, net.adj_start, net.adj_arcs,
    )
    if has_cycle:
        return state, False
    eps_target = (state.eps + 1) // 2
    delta = np.zeros(state.n, dtype=np.int64)
    for _ in range(max(cap, 1)):
        changed = _kernels.price_refine_pass_kernel(
            net.heads, state.costs, net.caps, state.flow, state.price,
            state.fixed, net.adj_start, net.adj_arcs, order, delta,
            np.int64(eps_target),
        )
        feasible = _kernels.price_feasible_kernel(
            net.tails, net.heads, state.costs, net.caps, state.flow,
            state.price, state.fixed, delta, np.int64(eps_target),
        )
        if feasible:
            state.price += delta
            state.eps = eps_target
            state.stats.price_refinement_successes += 1
            return state, True
        if not changed:
            return state, False
    return state, False


def solve(net: CirculationNetwork, opts: Optional[SolveOptions] = None) -> SolveResult:
    """Minimum-cost circulation on a built network.

    Starts from the zero circulation (always feasible) with zero prices and
    eps = C, then refines until eps-optimality at eps below the integer
    resolution certifies optimality. Total cost is never positive because
    the zero circulation costs nothing.
    """
    state = SolverState(net, opts)
    opts = state.opts
    if opts.enable_arc_fixing:
        arc_fixing(net, state)
    while state.eps > 1:
        refine_once(state, net)
        if opts.on_refine is not None:
            opts.on_refine(state)
        if opts.enable_arc_fixing:
            arc_fixing(net, state)
        while state.eps > 1:
            _, ok = price_refinement(state, net)
            if not ok:
                break
    state.stats.epsilon_final = state.eps

    if state.excess.any():
        raise RuntimeError("solver terminated with unbalanced nodes")
    flow = state.flow[0::2].copy()
    if flow.size and (flow.min() < 0 or flow.max() > 1):
        raise RuntimeError("solver produced a non-binary arc flow")
    total_cost = int(np.dot(net.costs[0::2], flow)) if flow.size else 0
    if total_cost > 0:
        raise RuntimeError("optimal circulation cost came out positive")
    return SolveResult(flow=flow, total_cost=total_cost, stats=state.stats, state=state)
