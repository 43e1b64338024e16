"""Exact solvers for the direction-scalarized Stackelberg average-cost game.

Given a unit direction lam, the stage cost becomes the scalar
``<c(s, a1, a2), lam>``.  Because the follower observes the leader's action,
the game splits into two average-cost dynamic programs: the follower's
best-response MDP on the augmented chain (s, a1), and the leader's min-max
problem on states.  Both are solved by relative value iteration damped with
an aperiodicity transform, which converges in span seminorm for unichain
models regardless of periodicity.

The per-state operator min over a1 of max over a2 is valid without
randomizing the leader: after the inner max the objective is linear in
pi1(.|s), so the minimum is attained at a pure action.  solve_minmax is
checked against brute_force_value, an independent oracle that enumerates
deterministic policies and averages costs through exact stationary
distributions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .game import GameModel, _stationary_from_matrix

UNIT_TOL = 1e-9


class PlannerConvergenceError(RuntimeError):
    def __init__(self, message: str, last_span: float):
        super().__init__(message)
        self.last_span = last_span


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlannerOptions:
    span_tol: float = 1e-10
    max_iters: int = 10**6
    damping: float = 0.5  # aperiodicity transform weight on the Bellman image


@dataclass(frozen=True)
class ScalarGame:
    """A game model together with a unit direction and the scalarized cost."""

    base: GameModel
    lam: np.ndarray
    scalar_cost: np.ndarray  # (S, A1, A2)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        lam.setflags(write=False)
        sc = np.asarray(self.scalar_cost, dtype=float)
        sc.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "scalar_cost", sc)


@dataclass(frozen=True)
class PlannerSolution:
    """Converged min-max solution for one steering direction.

    ``value`` is the leader's min-max average cost; ``leader_policy`` maps
    states to pure actions and ``follower_response`` maps (state, a1) to the
    follower's maximizing action, lowest index on ties.  Relative values are
    pinned at state 0 (leader) and at the (state 0, action 0) pair
    (follower).
    """

    value: float
    leader_policy: np.ndarray  # (S,) ints
    follower_response: np.ndarray  # (S, A1) ints
    leader_relative_values: np.ndarray  # (S,)
    follower_relative_values: np.ndarray  # (S, A1)
    follower_gain: float
    leader_gain: float
    iterations: int


def scalarize(model: GameModel, lam) -> ScalarGame:
    """Project the vector cost onto a unit steering direction."""
    lam = np.asarray(lam, dtype=float)
    norm = np.linalg.norm(lam)
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"direction must be a unit vector, got norm {norm!r}")
    scalar_cost = model.costs @ lam
    return ScalarGame(base=model, lam=lam, scalar_cost=scalar_cost)


def _damped_rvi(bellman, n_values: int, opts: PlannerOptions):
    """Relative value iteration V <- (1-tau) V + tau T(V), reference-pinned.

    ``bellman`` maps a value vector to T(V).  Returns (V, gain, iterations)
    where gain is the span midpoint of T(V) - V, recovered from the damped
    difference divided by tau.  Raises on non-convergence, carrying the last
    span so callers can report how far the iteration got.
    """
    tau = opts.damping
    V = np.zeros(n_values)
    span = math.inf
    for it in range(1, opts.max_iters + 1):
        TV = bellman(V)
        V_next = (1.0 - tau) * V + tau * TV
        diff = V_next - V
        lo = float(diff.min())
        hi = float(diff.max())
        span = hi - lo
        gain = (hi + lo) / (2.0 * tau)
        V = V_next - V_next.flat[0]
        if span <= opts.span_tol:
            return V, gain, it
    raise PlannerConvergenceError(
        f"relative value iteration span {span:.3e} after {opts.max_iters} iterations",
        last_span=span,
    )


def solve_minmax(game: ScalarGame, opts: PlannerOptions = PlannerOptions()) -> PlannerSolution:
    """Leader's min-max average cost and the pure policies attaining it.

    Iterates (TV)(s) = min_a1 max_a2 [ c(s,a1,a2) + sum_s' p(s,a1,a2,s') V(s') ].
    The follower's relative values on the augmented (s, a1) chain fall out
    of the same fixed point: under the deterministic leader policy the
    augmented chain continues through the leader's minimizing actions, so
    max_a2 [ c + p V ] - gain solves the follower's own dynamic program and
    the two gains coincide.
    """
    model = game.base
    kernel = model.kernel
    sc = game.scalar_cost
    S = model.n_states

    def bellman(V):
        q2 = sc + kernel @ V  # (S, A1, A2)
        return q2.max(axis=2).min(axis=1)

    V, gain, iterations = _damped_rvi(bellman, S, opts)

    q2 = sc + kernel @ V
    q1 = q2.max(axis=2)  # follower's maximizing value per (s, a1)
    leader_policy = q1.argmin(axis=1).astype(int)
    follower_response = q2.argmax(axis=2).astype(int)
    follower_values = q1 - gain
    follower_values = follower_values - follower_values[0, 0]
    return PlannerSolution(
        value=gain,
        leader_policy=leader_policy,
        follower_response=follower_response,
        leader_relative_values=V - V[0],
        follower_relative_values=follower_values,
        follower_gain=gain,
        leader_gain=gain,
        iterations=iterations,
    )


def _as_leader_matrix(model: GameModel, leader) -> np.ndarray:
    leader = np.asarray(leader)
    if leader.ndim == 1:
        mat = np.zeros((model.n_states, model.n_actions1))
        mat[np.arange(model.n_states), leader.astype(int)] = 1.0
        return mat
    if np.any(leader < 0) or np.any(np.abs(leader.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("leader rows must be probability vectors")
    return leader.astype(float)


def follower_best_response(
    model: GameModel,
    leader,
    lam,
    opts: PlannerOptions = PlannerOptions(),
) -> tuple[float, np.ndarray, np.ndarray]:
    """Follower's optimal average scalarized cost against a fixed leader.

    The follower controls the augmented chain over (s, a1) pairs: taking a2
    moves to (s', a1') with probability p(s,a1,a2,s') pi1(a1'|s').  Returns
    (gain, policy, relative_values) with policy an (S, A1) int array of
    maximizing actions and values pinned at pair (0, 0).

    ``leader`` may be a stochastic (S, A1) matrix or an (S,) int array of
    pure actions.
    """
    pi1 = _as_leader_matrix(model, leader)
    sc = scalarize(model, lam).scalar_cost
    kernel = model.kernel
    S, A1 = model.n_states, model.n_actions1

    def bellman(W_flat):
        W = W_flat.reshape(S, A1)
        w_bar = (pi1 * W).sum(axis=1)  # expected continuation per next state
        q = sc + kernel @ w_bar  # (S, A1, A2)
        return q.max(axis=2).reshape(-1)

    W_flat, gain, _ = _damped_rvi(bellman, S * A1, opts)
    W = W_flat.reshape(S, A1)
    q = sc + kernel @ (pi1 * W).sum(axis=1)
    policy = q.argmax(axis=2).astype(int)
    return gain, policy, W - W[0, 0]


def brute_force_value(model: GameModel, lam, budget: int = 10**7) -> float:
    """Min over deterministic leader policies of the max over deterministic
    follower responses of the exact average scalarized cost.

    Independent oracle for solve_minmax: each pair's average cost comes from
    the stationary distribution of the induced chain, no value iteration
    involved.  The follower's response only matters at the pairs (s,
    leader(s)) the chain actually visits, so responses are enumerated per
    state; unvisited (s, a1) combinations cannot change the average.
    Deterministic policies suffice by the linearity argument for the leader
    and average-cost MDP optimality for the follower.
    """
    sc = scalarize(model, lam).scalar_cost
    kernel = model.kernel
    S, A1, A2 = model.n_states, model.n_actions1, model.n_actions2
    n_pairs = (A1**S) * (A2**S)
    if n_pairs > budget:
        raise BudgetExceededError(
            f"{n_pairs} deterministic policy pairs exceed budget {budget}"
        )

    best_leader = math.inf
    for leader in itertools.product(range(A1), repeat=S):
        rows = np.array([kernel[s, leader[s]] for s in range(S)])  # (S, A2, S)
        costs = np.array([sc[s, leader[s]] for s in range(S)])  # (S, A2)
        worst = -math.inf
        for response in itertools.product(range(A2), repeat=S):
            idx = np.arange(S)
            P = rows[idx, list(response)]
            eta = _stationary_from_matrix(P)
            avg = float(eta @ costs[idx, list(response)])
            if avg > worst:
                worst = avg
        if worst < best_leader:
            best_leader = worst
    return best_leader
