"""Arc-cost models: probability-based costs, gating, and iterative refinement.

Costs are negative log probabilities. Enter/exit probabilities come from
config, or are estimated from per-frame detection-count differences when
unset. Transition probabilities come from an empirical upper-tail
distribution over displacement magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from circtrack.graph_model import Detection

if TYPE_CHECKING:
    from circtrack.tracking_pipeline import TrajectorySet


@dataclass
class CostModelConfig:
    """Knobs for cost construction and candidate gating.

    p_enter / p_exit left as None means "learn from per-frame counts"
    using `enter_exit_estimation` ("literal" counts signed frame-to-frame
    differences only; "clamped" also counts the first frame as starts and
    the last frame as ends, so the estimate never collapses to zero).
    beta = None keeps each detection's own false-positive probability.
    """

    p_enter: Optional[float] = None
    p_exit: Optional[float] = None
    enter_exit_estimation: str = "literal"
    beta: Optional[float] = None
    clamp_lo: float = 1e-6
    clamp_hi: float = 1.0 - 1e-6
    gating_k: int = 3
    jump_window: int = 1
    distance_scale: float = 1.0
    cost_scale: int = 10**6
    force_all_detections: bool = False
    velocity_neighbors: int = 4

    def __post_init__(self):
        if self.gating_k < 1:
            raise ValueError("gating_k must be >= 1")
        if self.jump_window < 1:
            raise ValueError("jump_window must be >= 1")
        if self.cost_scale < 1:
            raise ValueError("cost_scale must be >= 1")
        if self.enter_exit_estimation not in ("literal", "clamped"):
            raise ValueError(f"unknown enter_exit_estimation {self.enter_exit_estimation!r}")
        if not 0.0 <= self.clamp_lo < self.clamp_hi <= 1.0:
            raise ValueError("require 0 <= clamp_lo < clamp_hi <= 1")

    def clamp(self, p: float) -> float:
        return min(max(p, self.clamp_lo), self.clamp_hi)


@dataclass
class RefinementInfo:
    """Diagnostics from one refinement pass."""

    p_jump: float
    p_enter: float
    p_exit: float
    jumps: int
    linkages: int


@dataclass
class CostAssignment:
    """Per-detection and per-pair costs feeding the network builder."""

    enter: dict = field(default_factory=dict)
    exit: dict = field(default_factory=dict)
    observation: dict = field(default_factory=dict)
    transition: dict = field(default_factory=dict)
    cost_scale: int = 10**6
    refinement: Optional[RefinementInfo] = None


class EmpiricalDistanceModel:
    """Upper-tail p-values over an empirical sample of displacement magnitudes.

    tail_p applies add-one smoothing: p(d) = (#samples >= d + 1) / (N + 1),
    which keeps p(0) = 1 and bounds the tail away from zero.
    """

    def __init__(self, samples: Sequence[float]):
        arr = np.asarray(sorted(samples), dtype=np.float64)
        if arr.size == 0:
            raise ValueError("empirical distance model needs at least one sample")
        if not np.isfinite(arr).all() or arr.min() < 0:
            raise ValueError("displacement samples must be finite and non-negative")
        self._samples = arr

    @property
    def sample_count(self) -> int:
        return int(self._samples.size)

    def raw_tail_p(self, d: float) -> float:
        n = self._samples.size
        idx = np.searchsorted(self._samples, d, side="left")
        return float(n - idx) / n

    def tail_p(self, d: float) -> float:
        n = self._samples.size
        idx = np.searchsorted(self._samples, d, side="left")
        return float(n - idx + 1) / (n + 1)


def fit_empirical_distance(displacements: Sequence[float]) -> EmpiricalDistanceModel:
    """Fit the tail-probability model from observed displacement magnitudes."""
    return EmpiricalDistanceModel(displacements)


def _by_frame(detections: Sequence[Detection]) -> dict[int, tuple[list, np.ndarray]]:
    groups: dict[int, tuple[list, list]] = {}
    for det in detections:
        groups.setdefault(det.frame, ([], []))
        groups[det.frame][0].append(det.id)
        groups[det.frame][1].append(det.position)
    return {
        f: (ids, np.asarray(pos, dtype=np.float64)) for f, (ids, pos) in groups.items()
    }


def gate_transitions(
    detections: Sequence[Detection], config: CostModelConfig
) -> list[tuple]:
    """Candidate transition pairs: the gating_k nearest detections at each
    frame offset 1..jump_window, ties broken by detection id ascending."""
    groups = _by_frame(detections)
    pairs: list[tuple] = []
    seen = set()
    for det in detections:
        src = np.asarray(det.position, dtype=np.float64)
        for delta in range(1, config.jump_window + 1):
            target = groups.get(det.frame + delta)
            if target is None:
                continue
            ids, pos = target
            dist = np.linalg.norm(pos - src, axis=1)
            order = np.lexsort((np.asarray(ids, dtype=object), dist))
            for t in order[: config.gating_k]:
                pair = (det.id, ids[t])
                if pair not in seen:
                    seen.add(pair)
                    pairs.append(pair)
    return pairs


def _nearest_neighbor_displacements(detections: Sequence[Detection]) -> list[float]:
    """Displacements between each detection and its nearest neighbor in the
    next occupied frame; the no-training-data stand-in for linkage samples."""
    groups = _by_frame(detections)
    frames = sorted(groups)
    out: list[float] = []
    for f1, f2 in zip(frames, frames[1:]):
        _, p1 = groups[f1]
        _, p2 = groups[f2]
        for row in p1:
            out.append(float(np.linalg.norm(p2 - row, axis=1).min()))
    return out


def estimate_enter_exit_from_counts(
    detections: Sequence[Detection], mode: str = "literal"
) -> tuple[float, float]:
    """Estimate start/end probabilities from per-frame detection counts.

    A drop of k detections between consecutive occupied frames counts as k
    trajectory ends; a rise of k as k starts. "clamped" additionally counts
    the first frame's detections as starts and the last frame's as ends.
    Returns unclamped ratios (callers clamp).
    """
    if not detections:
        return 0.0, 0.0
    counts: dict[int, int] = {}
    for det in detections:
        counts[det.frame] = counts.get(det.frame, 0) + 1
    frames = sorted(counts)
    starts = 0
    ends = 0
    for f1, f2 in zip(frames, frames[1:]):
        diff = counts[f2] - counts[f1]
        if diff > 0:
            starts += diff
        elif diff < 0:
            ends += -diff
    if mode == "clamped":
        starts += counts[frames[0]]
        ends += counts[frames[-1]]
    total = len(detections)
    return starts / total, ends / total


def _resolve_enter_exit(
    detections: Sequence[Detection], config: CostModelConfig
) -> tuple[float, float]:
    if config.p_enter is not None and config.p_exit is not None:
        return config.p_enter, config.p_exit
    est_enter, est_exit = estimate_enter_exit_from_counts(
        detections, config.enter_exit_estimation
    )
    p_enter = config.p_enter if config.p_enter is not None else est_enter
    p_exit = config.p_exit if config.p_exit is not None else est_exit
    return p_enter, p_exit


def _neg_log(p: float, what: str) -> float:
    if p <= 0.0 or not math.isfinite(p):
        raise ValueError(f"probability for {what} is {p} after clamping; check config")
    return -math.log(p)


def probabilistic_costs(
    detections: Sequence[Detection],
    config: CostModelConfig,
    pairs: Optional[Sequence[tuple]] = None,
    distance_model: Optional[EmpiricalDistanceModel] = None,
) -> CostAssignment:
    """Negative-log-probability costs for every detection and gated pair.

    enter/exit costs use -log P; the observation cost is log(beta/(1-beta)),
    negative exactly when a detection is more likely real than spurious.
    Transition costs are -log of the empirical tail p-value of the pair
    displacement (model auto-fitted from nearest-neighbor displacements in
    adjacent frames when not supplied).
    """
    if pairs is None:
        pairs = gate_transitions(detections, config)
    assignment = CostAssignment(cost_scale=config.cost_scale)
    p_enter, p_exit = _resolve_enter_exit(detections, config)
    p_enter = config.clamp(p_enter)
    p_exit = config.clamp(p_exit)
    index = {d.id: d for d in detections}
    for det in detections:
        beta = config.beta if config.beta is not None else det.beta
        beta = config.clamp(beta)
        assignment.enter[det.id] = _neg_log(p_enter, f"enter({det.id})")
        assignment.exit[det.id] = _neg_log(p_exit, f"exit({det.id})")
        assignment.observation[det.id] = math.log(beta / (1.0 - beta))
    if pairs and distance_model is None:
        samples = _nearest_neighbor_displacements(detections)
        distance_model = EmpiricalDistanceModel(samples) if samples else None
    for i, j in pairs:
        di, dj = index[i], index[j]
        d = float(
            np.linalg.norm(np.asarray(dj.position) - np.asarray(di.position))
        ) / config.distance_scale
        if distance_model is not None:
            p = distance_model.tail_p(d)
        else:
            p = math.exp(-d)
        assignment.transition[(i, j)] = _neg_log(config.clamp(p), f"transition({i},{j})")
    if config.force_all_detections:
        assignment = groundtruth_observation_costs(assignment)
    return assignment


def groundtruth_observation_costs(assignment: CostAssignment) -> CostAssignment:
    """Force every detection into a trajectory by making a singleton free.

    Sets observation cost to -(enter + exit) per detection, so dropping a
    detection can never beat keeping it as a one-point trajectory.
    """
    out = replace(
        assignment,
        observation={
            i: -(assignment.enter[i] + assignment.exit[i]) for i in assignment.enter
        },
    )
    return out


def _instant_velocities(
    previous: "TrajectorySet", detections: Sequence[Detection]
) -> dict:
    """Raw per-detection velocity from the surrounding trajectory footprints.

    Uses the displacement to the next footprint when one exists, else from
    the previous footprint; detections outside any trajectory get zero."""
    index = {d.id: d for d in detections}
    dim = len(detections[0].position) if detections else 2
    velocities = {d.id: np.zeros(dim) for d in detections}
    for traj in previous.trajectories:
        dets = [index[i] for i in traj.detections]
        for k, det in enumerate(dets):
            if k + 1 < len(dets):
                other, sign = dets[k + 1], 1.0
            elif k > 0:
                other, sign = dets[k - 1], -1.0
            else:
                continue
            df = abs(other.frame - det.frame)
            vec = sign * (np.asarray(other.position) - np.asarray(det.position))
            velocities[det.id] = vec / max(df, 1)
    return velocities


def _calibrated_velocities(
    detections: Sequence[Detection],
    raw: dict,
    neighbors: int,
) -> dict:
    """Component-wise median over each detection and its nearest same-frame
    neighbors, damping single-track velocity estimation noise."""
    groups = _by_frame(detections)
    out = {}
    for det in detections:
        ids, pos = groups[det.frame]
        dist = np.linalg.norm(pos - np.asarray(det.position, dtype=np.float64), axis=1)
        order = np.lexsort((np.asarray(ids, dtype=object), dist))
        chosen = []
        for t in order:
            if ids[t] == det.id:
                continue
            chosen.append(raw[ids[t]])
            if len(chosen) >= neighbors:
                break
        stack = np.vstack([raw[det.id]] + chosen) if chosen else raw[det.id][None, :]
        out[det.id] = np.median(stack, axis=0)
    return out


def refine_costs(
    previous: "TrajectorySet",
    detections: Sequence[Detection],
    config: CostModelConfig,
    pairs: Optional[Sequence[tuple]] = None,
) -> CostAssignment:
    """Second-pass costs using trajectory hypotheses from a prior solve.

    Transition distances are measured against constant-velocity predicted
    positions (velocities calibrated by same-frame neighbor medians), the
    displacement model is refit on prediction residuals of the previous
    linkages, jump arcs pay an extra -log(p_jump) with p_jump the observed
    jumps/linkages ratio, and enter/exit probabilities are re-estimated as
    trajectories/detections. Falls back to the non-iterative costs when the
    previous solution has no linkages.
    """
    if pairs is None:
        pairs = gate_transitions(detections, config)
    index = {d.id: d for d in detections}

    linkages = 0
    jumps = 0
    for traj in previous.trajectories:
        for a, b in zip(traj.detections, traj.detections[1:]):
            linkages += 1
            if index[b].frame - index[a].frame > 1:
                jumps += 1
    if linkages == 0:
        return probabilistic_costs(detections, config, pairs=pairs)

    raw_v = _instant_velocities(previous, detections)
    vel = _calibrated_velocities(detections, raw_v, config.velocity_neighbors)

    def predicted(i, frame: int) -> np.ndarray:
        det = index[i]
        return np.asarray(det.position, dtype=np.float64) + vel[i] * (frame - det.frame)

    residuals = []
    for traj in previous.trajectories:
        for a, b in zip(traj.detections, traj.detections[1:]):
            target = np.asarray(index[b].position, dtype=np.float64)
            residuals.append(float(np.linalg.norm(target - predicted(a, index[b].frame))))
    model = EmpiricalDistanceModel(residuals)

    p_jump = jumps / linkages
    n_traj = len(previous.trajectories)
    p_enter = config.clamp(n_traj / len(detections))
    p_exit = p_enter

    assignment = CostAssignment(
        cost_scale=config.cost_scale,
        refinement=RefinementInfo(
            p_jump=p_jump,
            p_enter=p_enter,
            p_exit=p_exit,
            jumps=jumps,
            linkages=linkages,
        ),
    )
    for det in detections:
        beta = config.clamp(config.beta if config.beta is not None else det.beta)
        assignment.enter[det.id] = _neg_log(p_enter, f"enter({det.id})")
        assignment.exit[det.id] = _neg_log(p_exit, f"exit({det.id})")
        assignment.observation[det.id] = math.log(beta / (1.0 - beta))
    for i, j in pairs:
        dj = index[j]
        d = float(
            np.linalg.norm(np.asarray(dj.position, dtype=np.float64) - predicted(i, dj.frame))
        ) / config.distance_scale
        p = model.tail_p(d)
        if dj.frame - index[i].frame > 1:
            p = p * p_jump
        assignment.transition[(i, j)] = _neg_log(config.clamp(p), f"transition({i},{j})")
    if config.force_all_detections:
        assignment = replace(
            groundtruth_observation_costs(assignment), refinement=assignment.refinement
        )
    return assignment
