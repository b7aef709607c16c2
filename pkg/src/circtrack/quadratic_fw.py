"""Frank-Wolfe driver for quadratic objectives over circulation vertices.

Higher-order couplings between arc indicators make the objective
quadratic; after relaxing integrality, each iteration linearizes at the
current point, writes the gradient entries as arc costs, and solves the
resulting circulation problem for the next vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from circtrack.graph_model import MAX_ABS_SCALED_COST, CirculationNetwork
from circtrack.mcc_solver import SolveOptions, solve


class QuadraticObjective:
    """linear . x + sum_k q_k * x[a_k] * x[b_k] over arc indicators.

    Quadratic entries are stored once per unordered pair (a <= b); a
    diagonal entry a == b contributes q * x_a^2.
    """

    def __init__(self, linear: np.ndarray, quadratic: Optional[list] = None):
        self.linear = np.asarray(linear, dtype=np.float64)
        if not np.isfinite(self.linear).all():
            raise ValueError("linear coefficients must be finite")
        entries: dict[tuple[int, int], float] = {}
        for a, b, q in quadratic or []:
            if not math.isfinite(q):
                raise ValueError(f"quadratic coefficient for ({a},{b}) is not finite")
            key = (min(a, b), max(a, b))
            entries[key] = entries.get(key, 0.0) + q
        self.q_a = np.array([k[0] for k in entries], dtype=np.int64)
        self.q_b = np.array([k[1] for k in entries], dtype=np.int64)
        self.q_c = np.array(list(entries.values()), dtype=np.float64)

    @property
    def arc_count(self) -> int:
        return int(self.linear.size)

    def value(self, x: np.ndarray) -> float:
        v = float(self.linear @ x)
        if self.q_c.size:
            v += float(np.sum(self.q_c * x[self.q_a] * x[self.q_b]))
        return v

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = self.linear.copy()
        if self.q_c.size:
            diag = self.q_a == self.q_b
            np.add.at(g, self.q_a, np.where(diag, 2.0 * self.q_c * x[self.q_a],
                                            self.q_c * x[self.q_b]))
            off = ~diag
            np.add.at(g, self.q_b[off], self.q_c[off] * x[self.q_a[off]])
        if not np.isfinite(g).all():
            raise ValueError("gradient is not finite")
        return g


def load_quadratic_objective(path: str, arc_count: int) -> QuadraticObjective:
    """Sparse text format: `arc coeff` lines set linear entries, triplets
    `arc_a arc_b coeff` add quadratic entries; `#` starts a comment."""
    linear = np.zeros(arc_count, dtype=np.float64)
    quads = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if len(parts) == 2:
                    linear[int(parts[0])] += float(parts[1])
                elif len(parts) == 3:
                    quads.append((int(parts[0]), int(parts[1]), float(parts[2])))
                else:
                    raise ValueError("expected 2 or 3 tokens")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: bad objective line: {raw!r}") from exc
    return QuadraticObjective(linear, quads)


@dataclass
class FrankWolfeResult:
    x: np.ndarray  # final fractional iterate
    trace: list  # objective value after each iteration
    best_vertex: np.ndarray
    best_vertex_value: float
    iterations: int = 0
    step_schedule: str = "paper"
    extras: dict = field(default_factory=dict)


def _gradient_network(net: CirculationNetwork, gradient: np.ndarray) -> CirculationNetwork:
    scaled = np.round(gradient * net.cost_scale)
    if np.abs(scaled).max(initial=0) > MAX_ABS_SCALED_COST:
        raise ValueError("gradient too large to scale into integer arc costs")
    return CirculationNetwork(
        node_count=net.node_count,
        tails=net.tails[0::2],
        heads=net.heads[0::2],
        costs=scaled.astype(np.int64),
        kinds=net.kinds,
        detection_ids=net.detection_ids,
        cost_scale=net.cost_scale,
    )


def _step_size(k: int, schedule: str) -> float:
    if schedule == "paper":
        return k / (k + 2.0)
    if schedule == "standard":
        return 2.0 / (k + 2.0)
    raise ValueError(f"unknown step schedule {schedule!r}")


def frank_wolfe(
    obj: QuadraticObjective,
    net: CirculationNetwork,
    iters: int,
    step_schedule: str = "paper",
    improvement_tol: Optional[float] = None,
) -> FrankWolfeResult:
    """Iterate over the convex hull of feasible circulations.

    Starts at the zero circulation. Iteration k solves the circulation
    problem with the gradient as arc costs and moves toward that vertex
    with step k/(k+2) (the "standard" schedule 2/(k+2) is available as an
    option). Tracks the best vertex seen under the true objective.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if obj.arc_count != net.arc_count:
        raise ValueError("objective and network disagree on arc count")
    x = np.zeros(net.arc_count, dtype=np.float64)
    trace: list[float] = []
    best_vertex = x.copy()
    best_value = obj.value(best_vertex)
    prev = obj.value(x)
    for k in range(1, iters + 1):
        g = obj.gradient(x)
        vertex = solve(_gradient_network(net, g), SolveOptions()).flow.astype(np.float64)
        vval = obj.value(vertex)
        if vval < best_value:
            best_value = vval
            best_vertex = vertex.copy()
        gamma = _step_size(k, step_schedule)
        x = (1.0 - gamma) * x + gamma * vertex
        current = obj.value(x)
        trace.append(current)
        if improvement_tol is not None and abs(prev - current) <= improvement_tol * max(
            1.0, abs(prev)
        ):
            prev = current
            break
        prev = current
    return FrankWolfeResult(
        x=x,
        trace=trace,
        best_vertex=best_vertex,
        best_vertex_value=best_value,
        iterations=len(trace),
        step_schedule=step_schedule,
    )


def round_solution(
    obj: QuadraticObjective, net: CirculationNetwork, x: np.ndarray
) -> np.ndarray:
    """Map a fractional point to a feasible integral circulation by one more
    linearized solve at that point."""
    if net.arc_count == 0:
        return np.zeros(0, dtype=np.int64)
    g = obj.gradient(np.asarray(x, dtype=np.float64))
    return solve(_gradient_network(net, g), SolveOptions()).flow
