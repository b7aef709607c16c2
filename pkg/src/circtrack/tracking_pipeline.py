"""End-to-end tracking pipeline: ingest, gate, cost, build, solve, decode.

File formats
------------
mot-csv input rows: ``frame,id,x,y,w,h,conf`` (detections at box centers,
false-positive probability 1 - conf). points-csv rows: ``frame,x,y[,z]``.
A leading non-numeric row is treated as a header; ``#`` lines are skipped.

Trajectory output rows: ``track_id,frame,detection_id,x,y[,z]``, tracks
sorted by first frame then first detection id.

Config files are flat ``key = value`` lines (see CONFIG_KEYS); command
line flags override file values.

Graph dumps: header ``n m`` then ``tail head cost kind`` lines.

Quadratic objective files: see circtrack.quadratic_fw.load_quadratic_objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from circtrack import baseline_solvers, mcc_solver, synthetic
from circtrack.cost_models import (
    CostAssignment,
    CostModelConfig,
    gate_transitions,
    probabilistic_costs,
    refine_costs,
)
from circtrack.graph_model import ArcKind, CirculationNetwork, Detection, build_network

SOLVERS = ("cinda", "ssp", "dssp")
FORMATS = ("mot-csv", "points-csv")


@dataclass
class Trajectory:
    detections: list  # detection ids, frame order
    cost: int  # scaled integer


@dataclass
class TrajectorySet:
    trajectories: list
    total_cost: int = 0

    def __len__(self) -> int:
        return len(self.trajectories)

    def assignment(self) -> dict:
        """detection id -> track index for every tracked detection."""
        out = {}
        for t, traj in enumerate(self.trajectories):
            for det_id in traj.detections:
                out[det_id] = t
        return out


@dataclass
class RunReport:
    stage_seconds: dict = field(default_factory=dict)
    solver_stats: dict = field(default_factory=dict)
    solver: str = "cinda"
    iterations: int = 1
    detection_count: int = 0
    trajectory_count: int = 0
    total_cost_scaled: int = 0
    total_cost: float = 0.0
    config_echo: dict = field(default_factory=dict)

    def lines(self) -> list:
        out = []
        for key in ("solver", "iterations", "detection_count", "trajectory_count",
                    "total_cost_scaled", "total_cost"):
            out.append(f"{key} = {getattr(self, key)}")
        for stage, secs in self.stage_seconds.items():
            out.append(f"time.{stage} = {secs:.6f}")
        for key, value in self.solver_stats.items():
            out.append(f"stats.{key} = {value}")
        for key, value in sorted(self.config_echo.items()):
            out.append(f"config.{key} = {value}")
        return out


def flow_to_trajectories(flow: np.ndarray, net: CirculationNetwork) -> TrajectorySet:
    """Decode saturated cycles through the hub into ordered trajectories.

    Every unit of flow out of the hub starts one trajectory; conservation
    failures mean the flow did not come from a correct solver and raise.
    """
    flow = np.asarray(flow)
    if flow.shape[0] != net.arc_count:
        raise RuntimeError("flow vector length does not match the network")
    tails = net.tails[0::2]
    heads = net.heads[0::2]
    sat = flow == 1
    inflow = np.bincount(heads[sat], minlength=net.node_count)
    outflow = np.bincount(tails[sat], minlength=net.node_count)
    if not np.array_equal(inflow, outflow):
        raise RuntimeError("flow violates conservation; decoding refused")

    next_arc = np.full(net.node_count, -1, dtype=np.int64)
    enter_arcs = []
    for a in np.nonzero(sat)[0]:
        t = int(tails[a])
        if t == net.dummy_node:
            enter_arcs.append(int(a))
        else:
            if next_arc[t] != -1:
                raise RuntimeError(f"node {t} pushes two saturated arcs")
            next_arc[t] = a

    trajectories = []
    seen: set = set()
    total = 0
    for a in enter_arcs:
        ids = []
        cost = int(net.costs[2 * a])
        v = int(heads[a])
        while v != net.dummy_node:
            nxt = int(next_arc[v])
            if nxt < 0:
                raise RuntimeError(f"saturated path dead-ends at node {v}")
            if net.arc_kind(nxt) == ArcKind.OBSERVATION:
                det_index = (v - 1) // 2
                det_id = net.detection_ids[det_index]
                if det_id in seen:
                    raise RuntimeError(f"detection {det_id!r} appears in two cycles")
                seen.add(det_id)
                ids.append(det_id)
            cost += int(net.costs[2 * nxt])
            v = int(heads[nxt])
        trajectories.append(Trajectory(detections=ids, cost=cost))
        total += cost
    return TrajectorySet(trajectories=trajectories, total_cost=total)


def ingest_detections(path: str, format: str) -> list:
    """Parse a detection file; malformed rows report their line number."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    detections: list[Detection] = []
    next_id = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
            if format == "mot-csv":
                if len(values) < 7:
                    raise ValueError(f"{path}:{lineno}: mot-csv needs 7 columns")
                frame, _, x, y, w, h, conf = values[:7]
                conf = min(max(conf, 0.0), 1.0)
                beta = min(max(1.0 - conf, 1e-6), 1.0 - 1e-6)
                det = Detection(
                    id=next_id,
                    frame=int(frame),
                    position=(x + w / 2.0, y + h / 2.0),
                    beta=beta,
                )
            else:
                if len(values) not in (3, 4):
                    raise ValueError(f"{path}:{lineno}: points-csv needs 3 or 4 columns")
                det = Detection(
                    id=next_id,
                    frame=int(values[0]),
                    position=tuple(values[1:]),
                    beta=0.5,
                )
            detections.append(det)
            next_id += 1
    return detections


@dataclass
class PipelineConfig:
    input: str = ""
    format: str = "points-csv"
    solver: str = "cinda"
    iterations: int = 1
    output: Optional[str] = None
    report: Optional[str] = None
    cost: CostModelConfig = field(default_factory=CostModelConfig)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def _solve_with(solver: str, net: CirculationNetwork):
    """Run the chosen solver; arcs map one to one so flows are interchangeable."""
    if solver == "cinda":
        result = mcc_solver.solve(net)
        return result.flow, result.total_cost, result.stats.as_dict()
    fnet = baseline_solvers.FlowNetwork(net)
    result = baseline_solvers.ssp_solve(fnet) if solver == "ssp" else baseline_solvers.dssp_solve(fnet)
    return result.flow, result.cost, {"augmentations": result.augmentations}


def _write_trajectories(path: str, ts: TrajectorySet, detections: Sequence[Detection]) -> None:
    index = {d.id: d for d in detections}

    def sort_key(traj: Trajectory):
        first = index[traj.detections[0]]
        return (first.frame, first.id)

    ordered = sorted((t for t in ts.trajectories if t.detections), key=sort_key)
    with open(path, "w") as fh:
        for track_id, traj in enumerate(ordered):
            for det_id in traj.detections:
                det = index[det_id]
                coords = ",".join(f"{c:.6f}" for c in det.position)
                fh.write(f"{track_id},{det.frame},{det.id},{coords}\n")


def serialize_trajectories(ts: TrajectorySet, detections: Sequence[Detection]) -> str:
    """Canonical CSV text for a trajectory set (same bytes the CLI writes)."""
    import io

    index = {d.id: d for d in detections}
    ordered = sorted(
        (t for t in ts.trajectories if t.detections),
        key=lambda t: (index[t.detections[0]].frame, index[t.detections[0]].id),
    )
    buf = io.StringIO()
    for track_id, traj in enumerate(ordered):
        for det_id in traj.detections:
            det = index[det_id]
            coords = ",".join(f"{c:.6f}" for c in det.position)
            buf.write(f"{track_id},{det.frame},{det.id},{coords}\n")
    return buf.getvalue()


def run_tracking(config: PipelineConfig, detections: Optional[list] = None):
    """Full pipeline; returns (TrajectorySet, RunReport).

    With iterations > 1, later rounds rebuild the costs from the previous
    round's trajectories (velocity-predicted distances, jump penalty,
    re-estimated enter/exit) and solve again.
    """
    report = RunReport(solver=config.solver, iterations=config.iterations)
    timers = report.stage_seconds

    def timed(stage, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        timers[stage] = timers.get(stage, 0.0) + (time.perf_counter() - t0)
        return out

    if detections is None:
        detections = timed("ingest", ingest_detections, config.input, config.format)
    report.detection_count = len(detections)

    pairs = timed("gate", gate_transitions, detections, config.cost)
    assignment = timed("costs", probabilistic_costs, detections, config.cost, pairs)
    ts = None
    for iteration in range(1, config.iterations + 1):
        if iteration > 1:
            assignment = timed("costs", refine_costs, ts, detections, config.cost, pairs)
        net = timed("build", build_network, detections, assignment)
        flow, total_cost, stats = timed("solve", _solve_with, config.solver, net)
        ts = timed("decode", flow_to_trajectories, flow, net)
        if ts.total_cost != total_cost:
            raise RuntimeError(
                f"decoded cost {ts.total_cost} disagrees with solver cost {total_cost}"
            )
        report.solver_stats = stats
        report.total_cost_scaled = total_cost
        report.total_cost = total_cost / config.cost.cost_scale

    report.trajectory_count = len(ts)
    report.config_echo = {
        "input": config.input,
        "format": config.format,
        "solver": config.solver,
        "iterations": config.iterations,
        **{f.name: getattr(config.cost, f.name) for f in fields(CostModelConfig)},
    }
    if config.output:
        _write_trajectories(config.output, ts, detections)
    if config.report:
        with open(config.report, "w") as fh:
            fh.write("\n".join(report.lines()) + "\n")
    return ts, report


@dataclass
class BenchmarkRow:
    solver: str
    size: int
    seconds: float
    cost: int
    nodes: int
    arcs: int


def benchmark(
    solvers: Sequence[str],
    sizes: Sequence[int],
    seed: int = 0,
    frames: int = 100,
    cost: Optional[CostModelConfig] = None,
) -> list:
    """Time each solver on identical synthetic instances per size.

    Costs must agree exactly across solvers for every instance; any
    disagreement aborts with diagnostics since it means a solver bug.
    """
    for s in solvers:
        if s not in SOLVERS:
            raise ValueError(f"unknown solver {s!r}")
    cost = cost or CostModelConfig(p_enter=0.05, p_exit=0.05, beta=0.1,
                                   force_all_detections=True)
    rows: list[BenchmarkRow] = []
    for idx, size in enumerate(sizes):
        targets = max(1, size // frames)
        scene = synthetic.generate_scene(
            n_targets=targets, n_frames=frames, seed=seed + idx, jitter=0.1,
            extent=max(100.0, float(targets)),
        )
        dets = scene.detections
        pairs = gate_transitions(dets, cost)
        assignment = probabilistic_costs(dets, cost, pairs)
        net = build_network(dets, assignment)
        costs_seen = {}
        for solver in solvers:
            t0 = time.perf_counter()
            _, total_cost, _ = _solve_with(solver, net)
            dt = time.perf_counter() - t0
            rows.append(BenchmarkRow(
                solver=solver, size=len(dets), seconds=dt, cost=total_cost,
                nodes=net.node_count, arcs=net.arc_count,
            ))
            costs_seen[solver] = total_cost
        if len(set(costs_seen.values())) > 1:
            raise RuntimeError(
                f"solver costs disagree on size {size} (seed {seed + idx}): {costs_seen}"
            )
    return rows


def format_benchmark_table(rows: Sequence[BenchmarkRow]) -> str:
    header = f"{'solver':<8} {'size':>8} {'nodes':>9} {'arcs':>9} {'seconds':>10} {'cost':>14}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.solver:<8} {r.size:>8} {r.nodes:>9} {r.arcs:>9} {r.seconds:>10.3f} {r.cost:>14}"
        )
    return "\n".join(lines)


# -- flat key=value config files ----------------------------------------------

CONFIG_KEYS = {
    "input": str,
    "format": str,
    "solver": str,
    "iterations": int,
    "output": str,
    "report": str,
    "p_enter": float,
    "p_exit": float,
    "enter_exit_estimation": str,
    "beta": float,
    "clamp_lo": float,
    "clamp_hi": float,
    "gating_k": int,
    "jump_window": int,
    "distance_scale": float,
    "cost_scale": int,
    "force_all_detections": bool,
    "velocity_neighbors": int,
}

_PIPELINE_KEYS = ("input", "format", "solver", "iterations", "output", "report")


def parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; `#` comments; unknown keys rejected."""
    out: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            caster = CONFIG_KEYS[key]
            if caster is bool:
                if value.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(f"{path}:{lineno}: boolean expected for {key}")
                out[key] = value.lower() in ("true", "1")
            else:
                try:
                    out[key] = caster(value)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def config_from_mapping(values: dict) -> PipelineConfig:
    pipeline_kwargs = {k: v for k, v in values.items() if k in _PIPELINE_KEYS}
    cost_kwargs = {k: v for k, v in values.items() if k not in _PIPELINE_KEYS}
    return PipelineConfig(cost=CostModelConfig(**cost_kwargs), **pipeline_kwargs)


def merge_config(base: PipelineConfig, overrides: dict) -> PipelineConfig:
    pipeline_kwargs = {k: v for k, v in overrides.items() if k in _PIPELINE_KEYS}
    cost_kwargs = {k: v for k, v in overrides.items() if k not in _PIPELINE_KEYS}
    cost = replace(base.cost, **cost_kwargs) if cost_kwargs else base.cost
    return replace(base, cost=cost, **pipeline_kwargs)
