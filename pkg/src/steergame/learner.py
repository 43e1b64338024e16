"""Two-timescale asynchronous Q-learning for steering with unknown kernel.

The learner runs two coupled tabular Q iterations on a fast timescale: a
follower array over ((s, a1), a2) estimating the informed adversary's
best-response values, and a leader array over (s, (a1, a2)) estimating the
min-max values against that adversary, both for the stage cost scalarized
along the current steering direction.  The running average cost and the
exploration rate move on the slow 1/n timescale, so the Q arrays track a
quasi-static problem.

Actions split three ways each step: the leader's actual action and a
simulated adversary action drive the Q updates and visit counts (the
adversary's worst case is simulated, never assumed played), while the real
adversary's action drives the state transition and the observed cost that
enters the running average.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .adversaries import Adversary
from .game import GameModel
from .targets import Ball, TargetSet, Union as TargetUnion


@dataclass(frozen=True)
class LearnerConfig:
    """Knobs of the learning loop.

    eps0/eps_floor: initial exploration rate and optional constant floor.
    The rate decays as eps0/(n+1) via the recursion
    eps <- eps * (1 - 1/(n+2)); the floor keeps every (s, a1, a2) triple
    sampled at a positive rate in runs where the steering feedback alone
    does not churn the greedy policies (frozen-direction studies).

    gamma2_exponent: fast step size gamma2(m) = 1/(m+1)^exponent, indexed
    by the per-triple visit count (asynchronous) or by n (synchronous).

    anchor: the fixed (s, a1, a2) index whose Q value plays the role of the
    average-cost offset in both updates.

    frozen_lambda: scalarize along this fixed unit direction instead of
    tracking the average cost.  lambda_refresh_period: recompute the
    steering direction every so many steps (1 = every step).
    """

    eps0: float = 0.3
    gamma2_exponent: float = 0.6
    anchor: tuple[int, int, int] = (0, 0, 0)
    sync: bool = False
    noise_std: float = 0.0
    seed: int = 0
    eps_floor: float = 0.0
    frozen_lambda: tuple[float, ...] | None = None
    lambda_refresh_period: int = 1

    @staticmethod
    def from_dict(data: dict) -> "LearnerConfig":
        allowed = {"eps0", "gamma2_exponent", "anchor", "sync", "noise_std", "seed"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown learner config fields: {sorted(extra)}")
        kwargs = dict(data)
        if "anchor" in kwargs:
            kwargs["anchor"] = tuple(int(i) for i in kwargs["anchor"])
        return LearnerConfig(**kwargs)

    def to_dict(self) -> dict:
        return {
            "eps0": self.eps0,
            "gamma2_exponent": self.gamma2_exponent,
            "anchor": list(self.anchor),
            "sync": self.sync,
            "noise_std": self.noise_std,
            "seed": self.seed,
        }


def schedules(n: int, eps0: float = 0.3, gamma2_exponent: float = 0.6, eps_floor: float = 0.0):
    """Closed forms of the step-size and exploration schedules at step n.

    gamma1(n) = 1/(n+1) makes the average-cost update an exact running
    mean; gamma2(m) = 1/(m+1)^exponent with exponent in (0.5, 1] is square
    summable and dominates gamma1, giving the two-timescale separation.
    eps_n = eps0/(n+1) is the telescoped value of the decay recursion.
    """
    gamma1 = 1.0 / (n + 1)
    gamma2 = 1.0 / (n + 1) ** gamma2_exponent
    eps = max(eps0 / (n + 1), eps_floor)
    return gamma1, gamma2, eps


def reference_value(q: np.ndarray, anchor: tuple[int, int, int]) -> float:
    """Offset functional f(Q) = Q[anchor]: satisfies f(ones) = 1,
    f(q + c*ones) = f(q) + c and f(c*q) = c*f(q)."""
    return float(q[anchor])


def _make_direction_fn(target: TargetSet):
    """Per-step steering direction as plain floats.

    Hand-rolled branches for balls and unions of balls keep the hot loop
    off numpy; anything else falls back to the generic geometry.  Returns
    a function x_list -> tuple direction or None when inside.
    """
    def from_ball(center, radius, x):
        diff = [xi - ci for xi, ci in zip(x, center)]
        norm = sqrt(sum(d * d for d in diff))
        if norm <= radius:
            return None
        return tuple(d / norm for d in diff), norm - radius

    if isinstance(target, Ball):
        center = tuple(float(c) for c in target.center)
        radius = float(target.radius)

        def direction(x):
            hit = from_ball(center, radius, x)
            return None if hit is None else hit[0]

        return direction

    if isinstance(target, TargetUnion) and all(isinstance(p, Ball) for p in target.pieces):
        pieces = [(tuple(float(c) for c in p.center), float(p.radius)) for p in target.pieces]

        def direction(x):
            hits = []
            for center, radius in pieces:
                hit = from_ball(center, radius, x)
                if hit is None:
                    return None
                hits.append(hit)
            best = min(h[1] for h in hits)
            for lam, dist in hits:  # lowest-index piece among ties
                if dist <= best + 1e-9:
                    return lam
            raise AssertionError("unreachable")

        return direction

    def direction(x):
        lam = target.direction(np.array(x))
        return None if lam is None else tuple(lam)

    return direction


@dataclass(slots=True)
class StepRecord:
    n: int
    state: int
    a1: int
    a2_actual: int
    cost: tuple[float, ...]
    eps: float


class _LazyLearnerContext:
    """Adversary view of the learner, computed on attribute access so the
    hot loop pays nothing when the adversary ignores the context."""

    __slots__ = ("_learner",)

    def __init__(self, learner: "TwoTimescaleLearner"):
        self._learner = learner

    @property
    def x(self) -> np.ndarray:
        return self._learner.avg_cost

    @property
    def leader_policy(self) -> np.ndarray:
        return self._learner._greedy_leader_array()


class TwoTimescaleLearner:
    """Stateful learner for one run; owns its rng, exclusively.

    Call start() once (draws the initial actions and observes the first
    transition's inputs), then step() once per time step.
    """

    def __init__(self, model: GameModel, target: TargetSet, config: LearnerConfig = LearnerConfig()):
        self.model = model
        self.target = target
        self.config = config
        S, A1, A2 = model.n_states, model.n_actions1, model.n_actions2
        a = config.anchor
        if not (0 <= a[0] < S and 0 <= a[1] < A1 and 0 <= a[2] < A2):
            raise ValueError(f"anchor {a} out of range")
        if config.frozen_lambda is not None:
            lam = np.asarray(config.frozen_lambda, dtype=float)
            if abs(np.linalg.norm(lam) - 1.0) > 1e-9:
                raise ValueError("frozen_lambda must be a unit vector")
        self._cum_kernel = model.cumulative_kernel()
        self._cum_rows = [
            [[self._cum_kernel[s, a1, a2].tolist() for a2 in range(A2)] for a1 in range(A1)]
            for s in range(S)
        ]
        self._costs = model.costs
        self._cost_rows = [
            [[tuple(model.costs[s, a1, a2]) for a2 in range(A2)] for a1 in range(A1)]
            for s in range(S)
        ]
        self._direction_fn = _make_direction_fn(target)
        self._ctx = _LazyLearnerContext(self)
        self.rng: np.random.Generator = np.random.default_rng(config.seed)
        self.reset()

    # -- state ---------------------------------------------------------------

    def reset(self, seed: int | None = None) -> None:
        model = self.model
        S, A1, A2 = model.n_states, model.n_actions1, model.n_actions2
        self.q_follower = np.zeros((S, A1, A2))  # over ((s, a1), a2)
        self.q_leader = np.zeros((S, A1, A2))  # over (s, (a1, a2))
        self.visit_counts = np.zeros((S, A1, A2), dtype=np.int64)
        self.n = 0
        self.epsilon = self.config.eps0
        self._x = [0.0] * model.K
        self._held_lambda: tuple[float, ...] | None = (
            tuple(self.config.frozen_lambda) if self.config.frozen_lambda is not None else None
        )
        self.q_abs_max = 0.0
        self._pending: tuple[int, int, int, int] | None = None
        self._started = False
        if seed is not None:
            self.rng = np.random.default_rng(seed)

    @property
    def avg_cost(self) -> np.ndarray:
        return np.array(self._x)

    @property
    def current_lambda(self) -> np.ndarray | None:
        if self._held_lambda is None:
            return None
        return np.array(self._held_lambda)

    def start(self, s0: int, adversary: Adversary) -> None:
        """Initial draws: uniform leader action, uniform simulated adversary
        action, and the real adversary's first action.  The first observed
        cost never enters the running average, which starts empty."""
        A1, A2 = self.model.n_actions1, self.model.n_actions2
        a1 = int(self.rng.integers(A1))
        a2_sim = int(self.rng.integers(A2))
        a2_actual = adversary.act(s0, a1, self._ctx, self.rng)
        self._pending = (s0, a1, a2_sim, a2_actual)
        self._started = True

    # -- policies ------------------------------------------------------------

    def _greedy_follower_at(self, s: int, a1: int) -> int:
        qh = self.q_follower
        best, best_v = 0, qh[s, a1, 0]
        for z in range(1, qh.shape[2]):
            v = qh[s, a1, z]
            if v > best_v:
                best_v = v
                best = z
        return best

    def _greedy_leader_at(self, s: int) -> int:
        qh, qt = self.q_follower, self.q_leader
        A1 = qh.shape[1]
        best, best_v = 0, None
        for y in range(A1):
            v = qt[s, y, self._greedy_follower_at(s, y)]
            if best_v is None or v < best_v:
                best_v = v
                best = y
        return best

    def _greedy_leader_array(self) -> np.ndarray:
        return np.array([self._greedy_leader_at(s) for s in range(self.model.n_states)], dtype=int)

    def greedy_policies(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic greedy pair, lowest index on ties: the leader map
        s -> a1 and the follower map (s, a1) -> a2."""
        S, A1 = self.model.n_states, self.model.n_actions1
        leader = self._greedy_leader_array()
        follower = np.array(
            [[self._greedy_follower_at(s, a1) for a1 in range(A1)] for s in range(S)], dtype=int
        )
        return leader, follower

    def sample_leader_action(self, s: int) -> int:
        """Draw from the exploration mixture (1-eps) greedy + eps uniform."""
        if self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.model.n_actions1))
        return self._greedy_leader_at(s)

    def sample_follower_action(self, s: int, a1: int) -> int:
        if self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.model.n_actions2))
        return self._greedy_follower_at(s, a1)

    # -- steering direction ----------------------------------------------------

    def _steer_direction(self) -> tuple[float, ...]:
        """Direction for the current average cost, holding the last value
        while inside the target (lowest-index axis on a cold start)."""
        if self.config.frozen_lambda is not None:
            return self._held_lambda
        if self.n % self.config.lambda_refresh_period == 0 or self._held_lambda is None:
            lam = self._direction_fn(self._x)
            if lam is not None:
                self._held_lambda = lam
            elif self._held_lambda is None:
                axis = [0.0] * self.model.K
                axis[0] = 1.0
                self._held_lambda = tuple(axis)
        return self._held_lambda

    def _scalar_cost(self, s: int, a1: int, a2: int, lam: tuple[float, ...]) -> float:
        row = self._cost_rows[s][a1][a2]
        total = 0.0
        for c, l in zip(row, lam):
            total += c * l
        return total

    def _gamma2(self, count: int) -> float:
        return 1.0 / (count + 1) ** self.config.gamma2_exponent

    # -- Q updates -------------------------------------------------------------

    def update_follower_q(self, s, a1, a2, s_next, a1_hat, lambda_cost, step_size=None):
        """Follower update at entry ((s, a1), a2); other entries untouched.

        Target: lambda_cost + max_z Q((s_next, a1_hat), z) - f(Q).  The step
        size defaults to gamma2 at the entry's current visit count.
        """
        qh = self.q_follower
        if step_size is None:
            step_size = self._gamma2(int(self.visit_counts[s, a1, a2]))
        best_next = qh[s_next, a1_hat, 0]
        for z in range(1, qh.shape[2]):
            v = qh[s_next, a1_hat, z]
            if v > best_next:
                best_next = v
        anchor_val = qh[self.config.anchor]
        new = qh[s, a1, a2] + step_size * (lambda_cost + best_next - anchor_val - qh[s, a1, a2])
        qh[s, a1, a2] = new
        if abs(new) > self.q_abs_max:
            self.q_abs_max = abs(new)

    def update_leader_q(self, s, a1, a2, s_next, lambda_cost, step_size=None):
        """Leader update at entry (s, (a1, a2)), lowest-index tie-breaking.

        Target: lambda_cost + min_y Q~(s_next, (y, argmax_z Q^(s_next, y, z)))
        - f(Q~), where Q^ is the follower array already updated this step.
        """
        qt = self.q_leader
        if step_size is None:
            step_size = self._gamma2(int(self.visit_counts[s, a1, a2]))
        inner = None
        for y in range(qt.shape[1]):
            v = qt[s_next, y, self._greedy_follower_at(s_next, y)]
            if inner is None or v < inner:
                inner = v
        anchor_val = qt[self.config.anchor]
        new = qt[s, a1, a2] + step_size * (lambda_cost + inner - anchor_val - qt[s, a1, a2])
        qt[s, a1, a2] = new
        if abs(new) > self.q_abs_max:
            self.q_abs_max = abs(new)

    def _sync_sweep(self, lam: tuple[float, ...]) -> None:
        """Synchronous variant: every entry updated with simulated next
        states, global step size gamma2(n), no indicators."""
        model = self.model
        S, A1, A2 = model.n_states, model.n_actions1, model.n_actions2
        g2 = self._gamma2(self.n)
        sc = self._costs @ np.array(lam)
        u = self.rng.random(size=(S, A1, A2))
        nxt = (u[..., None] >= self._cum_kernel).sum(axis=3)
        greedy = self._greedy_leader_array()
        explore = self.rng.random(size=(S, A1, A2)) < self.epsilon
        uniform = self.rng.integers(A1, size=(S, A1, A2))
        a_hat = np.where(explore, uniform, greedy[nxt])
        qh = self.q_follower
        best_next = qh[nxt, a_hat].max(axis=3)
        qh += g2 * (sc + best_next - qh[self.config.anchor] - qh)
        qt = self.q_leader
        follower_idx = qh.argmax(axis=2)  # (S, A1)
        state_values = np.take_along_axis(
            qt, follower_idx[:, :, None], axis=2
        ).squeeze(2).min(axis=1)
        qt += g2 * (sc + state_values[nxt] - qt[self.config.anchor] - qt)
        self.q_abs_max = max(
            self.q_abs_max, float(np.abs(qh).max()), float(np.abs(qt).max())
        )

    # -- one full loop iteration -------------------------------------------------

    def step(self, adversary: Adversary) -> StepRecord:
        """One iteration: observe the next state, update both Q arrays at the
        pending (actual a1, simulated a2) triple, choose the next actions,
        observe the real cost, and advance the slow averages."""
        if not self._started:
            raise RuntimeError("call start() before step()")
        s, a1, a2_sim, a2_actual = self._pending
        n = self.n
        rng = self.rng

        cum = self._cum_rows[s][a1][a2_actual]
        s_next = min(bisect_right(cum, rng.random()), len(cum) - 1)

        lam = self._steer_direction()

        if self.config.sync:
            self._sync_sweep(lam)
        else:
            a1_hat = self.sample_leader_action(s_next)
            ctilde = self._scalar_cost(s, a1, a2_sim, lam)
            self.update_follower_q(s, a1, a2_sim, s_next, a1_hat, ctilde)
            self.update_leader_q(s, a1, a2_sim, s_next, ctilde)

        a1_next = self.sample_leader_action(s_next)
        a2_sim_next = self.sample_follower_action(s_next, a1_next)
        a2_actual_next = adversary.act(s_next, a1_next, self._ctx, rng)

        cost = self._cost_rows[s_next][a1_next][a2_actual_next]
        if self.config.noise_std > 0.0:
            half_width = self.config.noise_std * sqrt(3.0)
            noise = rng.uniform(-half_width, half_width, size=len(cost))
            cost = tuple(c + e for c, e in zip(cost, noise))
        g1 = 1.0 / (n + 1)
        x = self._x
        for k, c in enumerate(cost):
            x[k] += g1 * (c - x[k])

        self.epsilon = max(self.epsilon * (1.0 - 1.0 / (n + 2)), self.config.eps_floor)
        self.visit_counts[s_next, a1_next, a2_sim_next] += 1
        self.n = n + 1
        self._pending = (s_next, a1_next, a2_sim_next, a2_actual_next)
        return StepRecord(
            n=self.n,
            state=s_next,
            a1=a1_next,
            a2_actual=a2_actual_next,
            cost=tuple(cost),
            eps=self.epsilon,
        )
