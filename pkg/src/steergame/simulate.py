"""Closed-loop episodes: leader vs adversary, trajectory records, metrics.

A run couples a leader (exact steering controller or learner), an
adversary, and the environment, and maintains the running average cost
x_n = mean of the first n stage costs.  Rows are recorded on a thinned
grid (geometric early, periodic late) so that log-log convergence fits
stay cheap at long horizons.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .adversaries import Adversary, AdversaryContext
from .controller import SteeringController
from .game import GameModel
from .learner import TwoTimescaleLearner
from .targets import TargetSet

RECORD_PERIOD = 10**4
SLOPE_FLOOR = 1e-12


@dataclass
class TrajectoryRecord:
    """Thinned per-step rows of one episode plus run metadata.

    ``x`` rows are the running mean of the recorded cost stream through
    that step; ``eps`` is NaN for non-learning leaders.
    """

    n: np.ndarray  # (R,) step indices, 1-based
    state: np.ndarray  # (R,)
    a1: np.ndarray  # (R,)
    a2: np.ndarray  # (R,) actual adversary actions
    costs: np.ndarray  # (R, K)
    x: np.ndarray  # (R, K)
    dist: np.ndarray  # (R,)
    eps: np.ndarray  # (R,)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.n)


def _record_steps(steps: int, record_stride: int | None) -> set[int]:
    """Steps to record: powers of two plus every RECORD_PERIOD by default,
    or every ``record_stride`` steps; the final step is always kept."""
    chosen: set[int] = {steps}
    if record_stride is None:
        k = 1
        while k <= steps:
            chosen.add(k)
            k *= 2
        chosen.update(range(RECORD_PERIOD, steps + 1, RECORD_PERIOD))
    else:
        if record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        chosen.update(range(record_stride, steps + 1, record_stride))
    return chosen


class _Recorder:
    def __init__(self, steps: int, record_stride: int | None, K: int):
        self.keep = _record_steps(steps, record_stride)
        self.rows: list[tuple] = []

    def add(self, n, state, a1, a2, cost, x, dist, eps):
        if n in self.keep:
            self.rows.append((n, state, a1, a2, tuple(cost), tuple(x), dist, eps))

    def build(self, metadata: dict) -> TrajectoryRecord:
        rows = self.rows
        return TrajectoryRecord(
            n=np.array([r[0] for r in rows], dtype=np.int64),
            state=np.array([r[1] for r in rows], dtype=np.int64),
            a1=np.array([r[2] for r in rows], dtype=np.int64),
            a2=np.array([r[3] for r in rows], dtype=np.int64),
            costs=np.array([r[4] for r in rows], dtype=float),
            x=np.array([r[5] for r in rows], dtype=float),
            dist=np.array([r[6] for r in rows], dtype=float),
            eps=np.array([r[7] for r in rows], dtype=float),
            metadata=metadata,
        )


def run_episode(
    model: GameModel,
    leader: SteeringController | TwoTimescaleLearner,
    adversary: Adversary,
    target: TargetSet,
    steps: int,
    seed: int,
    noise_std: float | None = None,
    record_stride: int | None = None,
) -> TrajectoryRecord:
    """Execute one closed-loop episode of ``steps`` transitions.

    Deterministic given the seed: one generator drives every draw in the
    run (initial state, transitions, adversary, and the learner's own
    action simulation).  For a learner leader, the learner's noise_std
    config applies unless ``noise_std`` is given explicitly.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    recorder = _Recorder(steps, record_stride, model.K)

    if isinstance(leader, TwoTimescaleLearner):
        traj = _run_learner(model, leader, adversary, target, steps, rng, noise_std, recorder)
    else:
        traj = _run_controller(
            model, leader, adversary, target, steps, rng, noise_std or 0.0, recorder
        )
    traj.metadata["seed"] = seed
    traj.metadata["steps"] = steps
    traj.metadata["wall_time"] = time.perf_counter() - started
    return traj


def _run_controller(model, controller, adversary, target, steps, rng, noise_std, recorder):
    cum_kernel = model.cumulative_kernel()
    costs = model.costs
    K = model.K
    s = int(rng.integers(model.n_states))
    x = np.zeros(K)
    half_width = noise_std * sqrt(3.0)
    for t in range(1, steps + 1):
        policy = controller.next_policy(x)
        a1 = int(policy[s])
        ctx = AdversaryContext(x=x, leader_policy=policy)
        a2 = adversary.act(s, a1, ctx, rng)
        cost = costs[s, a1, a2].astype(float)
        if noise_std > 0.0:
            cost = cost + rng.uniform(-half_width, half_width, size=K)
        s_next = min(
            int(np.searchsorted(cum_kernel[s, a1, a2], rng.random(), side="right")),
            model.n_states - 1,
        )
        x = x + (cost - x) / t
        recorder.add(t, s, a1, a2, cost, x, target.distance(x), float("nan"))
        s = s_next
    return recorder.build(
        {"leader": "exact", "policy_recompute_count": controller.planner_calls}
    )


def _run_learner(model, learner, adversary, target, steps, rng, noise_std, recorder):
    learner.reset()
    learner.rng = rng
    if noise_std is not None:
        from dataclasses import replace

        learner.config = replace(learner.config, noise_std=noise_std)
    s0 = int(rng.integers(model.n_states))
    learner.start(s0, adversary)
    for _ in range(steps):
        rec = learner.step(adversary)
        x = learner.avg_cost
        recorder.add(
            rec.n, rec.state, rec.a1, rec.a2_actual, rec.cost, x, target.distance(x), rec.eps
        )
    return recorder.build({"leader": "learn", "policy_recompute_count": 0})


@dataclass(frozen=True)
class TrajectoryMetrics:
    final_dist: float
    max_dist_tail: float
    loglog_slope: float | None
    policy_recompute_count: int


def metrics(traj: TrajectoryRecord, target: TargetSet) -> TrajectoryMetrics:
    """Summary of a recorded trajectory.

    The log-log slope is the least-squares fit of log dist against log n
    over the last half of the recorded rows; rows with zero distance (the
    average is inside the target) carry no information for the power-law
    fit and are excluded.  With fewer than two positive rows in the window
    the slope is reported as None.
    """
    if len(traj) < 100:
        raise ValueError(f"need at least 100 recorded rows, got {len(traj)}")
    half = len(traj) // 2
    tail_n = traj.n[half:].astype(float)
    tail_dist = traj.dist[half:]
    positive = tail_dist > SLOPE_FLOOR
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(tail_n[positive]), np.log(tail_dist[positive]), 1)[0])
    else:
        slope = None
    return TrajectoryMetrics(
        final_dist=float(traj.dist[-1]),
        max_dist_tail=float(tail_dist.max()),
        loglog_slope=slope,
        policy_recompute_count=int(traj.metadata.get("policy_recompute_count", 0)),
    )
