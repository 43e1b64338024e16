"""Finite Stackelberg stochastic games with vector-valued stage costs.

A game couples a controlled transition kernel ``p(s' | s, a1, a2)`` with a
bounded vector cost ``c(s, a1, a2) in [-1, 1]^K``.  The leader (agent 1)
commits to an action first; the follower (agent 2) observes it before
acting.  This module holds the model container, validation, transition
sampling, and the exact stationary quantities (invariant distribution,
occupation measure, ergodic vector cost) for fixed stationary policy pairs.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-12
MARGINAL_TOL = 1e-10
STATIONARY_RESIDUAL_TOL = 1e-12


class NotUnichainError(RuntimeError):
    """The induced chain has no unique stationary distribution."""


@dataclass(frozen=True, eq=False)
class GameModel:
    """Dense representation of a finite Stackelberg stochastic game.

    kernel : array (S, A1, A2, S), each row a probability vector over next
        states.
    costs : array (S, A1, A2, K) with every component in [-1, 1].

    Instances are immutable after construction (arrays are marked
    read-only) and safe to share across concurrent runs.
    """

    kernel: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        costs = np.asarray(self.costs, dtype=float)
        if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[3]:
            raise ValueError(f"kernel must have shape (S, A1, A2, S), got {kernel.shape}")
        if costs.ndim != 4 or costs.shape[:3] != kernel.shape[:3]:
            raise ValueError(
                f"costs shape {costs.shape} inconsistent with kernel shape {kernel.shape}"
            )
        kernel.setflags(write=False)
        costs.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "costs", costs)

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions1(self) -> int:
        return self.kernel.shape[1]

    @property
    def n_actions2(self) -> int:
        return self.kernel.shape[2]

    @property
    def K(self) -> int:
        return self.costs.shape[3]

    def cumulative_kernel(self) -> np.ndarray:
        """Row-wise cumulative sums, used for inverse-CDF sampling."""
        return np.cumsum(self.kernel, axis=3)


@dataclass(frozen=True)
class StationaryPolicyPair:
    """A stationary leader policy pi1(a1|s) and follower policy pi2(a2|s,a1).

    leader : array (S, A1); follower : array (S, A1, A2).  Every row must
    be a probability vector.
    """

    leader: np.ndarray
    follower: np.ndarray

    def __post_init__(self):
        leader = np.asarray(self.leader, dtype=float)
        follower = np.asarray(self.follower, dtype=float)
        for name, rows in (("leader", leader), ("follower", follower)):
            if np.any(rows < 0):
                raise ValueError(f"{name} policy has negative entries")
            sums = rows.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
                raise ValueError(f"{name} policy rows must sum to 1 within {ROW_SUM_TOL}")
        leader.setflags(write=False)
        follower.setflags(write=False)
        object.__setattr__(self, "leader", leader)
        object.__setattr__(self, "follower", follower)

    @staticmethod
    def from_deterministic(leader_actions, follower_actions, n_actions1: int, n_actions2: int) -> "StationaryPolicyPair":
        """Build a pair from integer maps s -> a1 and (s, a1) -> a2."""
        leader_actions = np.asarray(leader_actions, dtype=int)
        follower_actions = np.asarray(follower_actions, dtype=int)
        n_states = leader_actions.shape[0]
        leader = np.zeros((n_states, n_actions1))
        leader[np.arange(n_states), leader_actions] = 1.0
        follower = np.zeros((n_states, n_actions1, n_actions2))
        for s in range(n_states):
            for a1 in range(n_actions1):
                follower[s, a1, follower_actions[s, a1]] = 1.0
        return StationaryPolicyPair(leader, follower)


@dataclass(frozen=True)
class OccupationMeasure:
    """Long-run joint frequency psi(s, a1, a2) with state marginal eta."""

    psi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if np.any(psi < -MARGINAL_TOL):
            raise ValueError("occupation measure has negative mass")
        if abs(psi.sum() - 1.0) > MARGINAL_TOL:
            raise ValueError("occupation measure must sum to 1")
        if np.max(np.abs(psi.sum(axis=(1, 2)) - eta)) > MARGINAL_TOL:
            raise ValueError("eta must equal the state marginal of psi")
        psi.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = field(default_factory=tuple)


def validate_model(model: GameModel) -> ValidationReport:
    """Check kernel rows, cost bounds, and index consistency.

    Returns a report rather than raising: violations name the offending
    indices so broken model files can be diagnosed in one pass.
    """
    violations: list[str] = []
    S, A1, A2 = model.n_states, model.n_actions1, model.n_actions2
    for s, a1, a2 in itertools.product(range(S), range(A1), range(A2)):
        row = model.kernel[s, a1, a2]
        if np.any(row < 0):
            violations.append(f"kernel row (s={s}, a1={a1}, a2={a2}) has a negative entry")
        total = row.sum()
        if abs(total - 1.0) > ROW_SUM_TOL:
            violations.append(
                f"kernel row (s={s}, a1={a1}, a2={a2}) sums to {total!r}, not 1"
            )
        comp = model.costs[s, a1, a2]
        if np.any(np.abs(comp) > 1.0):
            k = int(np.argmax(np.abs(comp)))
            violations.append(
                f"cost out of [-1,1] at (s={s}, a1={a1}, a2={a2}, k={k}): {comp[k]!r}"
            )
    return ValidationReport(ok=not violations, violations=tuple(violations))


def sample_transition(model: GameModel, s: int, a1: int, a2: int, rng: np.random.Generator) -> int:
    """Draw the next state from kernel(s, a1, a2) via inverse CDF.

    Consumes exactly one uniform variate, so the draw sequence is
    reproducible given the rng seed and call order.
    """
    if not (0 <= s < model.n_states and 0 <= a1 < model.n_actions1 and 0 <= a2 < model.n_actions2):
        raise IndexError(f"invalid indices (s={s}, a1={a1}, a2={a2})")
    cum = np.cumsum(model.kernel[s, a1, a2])
    return min(int(np.searchsorted(cum, rng.random(), side="right")), model.n_states - 1)


def induced_transition_matrix(model: GameModel, pair: StationaryPolicyPair) -> np.ndarray:
    """State transition matrix of the chain induced by a policy pair."""
    joint = pair.leader[:, :, None] * pair.follower  # (S, A1, A2)
    return np.einsum("sab,sabt->st", joint, model.kernel)


def _stationary_from_matrix(P: np.ndarray) -> np.ndarray:
    """Solve eta P = eta, sum(eta) = 1 by replacing one balance equation
    with the normalization constraint.  Exact at desk scale."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        eta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NotUnichainError(f"singular balance system: {exc}") from exc
    residual = np.max(np.abs(eta @ P - eta))
    if residual > STATIONARY_RESIDUAL_TOL or abs(eta.sum() - 1.0) > STATIONARY_RESIDUAL_TOL:
        raise NotUnichainError(
            f"not unichain: stationary residual {residual:.3e} beyond tolerance"
        )
    if np.any(eta < -1e-9):
        raise NotUnichainError("not unichain: negative stationary mass")
    return np.clip(eta, 0.0, None)


def stationary_distribution(model: GameModel, pair: StationaryPolicyPair) -> np.ndarray:
    """Unique invariant distribution of the chain induced by the pair."""
    return _stationary_from_matrix(induced_transition_matrix(model, pair))


def occupation_measure(model: GameModel, pair: StationaryPolicyPair) -> OccupationMeasure:
    """Ergodic occupation measure psi(s,a1,a2) = eta(s) pi1(a1|s) pi2(a2|s,a1)."""
    eta = stationary_distribution(model, pair)
    psi = eta[:, None, None] * pair.leader[:, :, None] * pair.follower
    return OccupationMeasure(psi=psi, eta=eta)


def ergodic_cost(model: GameModel, occ: OccupationMeasure) -> np.ndarray:
    """Expected average vector cost under an occupation measure."""
    return np.einsum("sab,sabk->k", occ.psi, model.costs)


@dataclass(frozen=True)
class IrreducibilityReport:
    ok: bool
    n_pairs_checked: int
    witness: tuple[tuple[int, ...], tuple[tuple[int, ...], ...]] | None = None
    budget_exceeded: bool = False
    note: str = ""


def _strongly_connected(adjacency: list[list[int]]) -> bool:
    """All states reachable from state 0 both forwards and backwards."""
    n = len(adjacency)

    def reach(adj):
        seen = [False] * n
        seen[0] = True
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return all(seen)

    reverse: list[list[int]] = [[] for _ in range(n)]
    for u, outs in enumerate(adjacency):
        for v in outs:
            reverse[v].append(u)
    return reach(adjacency) and reach(reverse)


def check_irreducibility(model: GameModel, budget: int = 10**6, rng: np.random.Generator | None = None) -> IrreducibilityReport:
    """Check that every deterministic stationary pair induces an irreducible chain.

    Deterministic pairs have the minimal support graphs: the support of any
    randomized pair is a union of deterministic supports, and adding edges
    preserves strong connectivity, so passing on all deterministic pairs
    implies irreducibility under every stationary pair.  Above ``budget``
    pairs, a seeded random sample is checked instead and the report says so.
    """
    S, A1, A2 = model.n_states, model.n_actions1, model.n_actions2
    support = model.kernel > 0.0
    n_leaders = A1**S
    n_followers = A2 ** (S * A1)
    total = n_leaders * n_followers

    def pair_adjacency(leader, follower_flat):
        adj = []
        for s in range(S):
            a1 = leader[s]
            a2 = follower_flat[s * A1 + a1]
            adj.append(list(np.nonzero(support[s, a1, a2])[0]))
        return adj

    def check_one(leader, follower_flat):
        if not _strongly_connected(pair_adjacency(leader, follower_flat)):
            follower = tuple(
                tuple(follower_flat[s * A1 + a1] for a1 in range(A1)) for s in range(S)
            )
            return IrreducibilityReport(
                ok=False,
                n_pairs_checked=checked,
                witness=(tuple(leader), follower),
                note="deterministic pair induces a disconnected support graph",
            )
        return None

    checked = 0
    if total <= budget:
        for leader in itertools.product(range(A1), repeat=S):
            for follower_flat in itertools.product(range(A2), repeat=S * A1):
                checked += 1
                bad = check_one(leader, follower_flat)
                if bad is not None:
                    return bad
        return IrreducibilityReport(ok=True, n_pairs_checked=checked)

    rng = rng if rng is not None else np.random.default_rng(0)
    for _ in range(budget):
        leader = tuple(int(a) for a in rng.integers(0, A1, size=S))
        follower_flat = tuple(int(a) for a in rng.integers(0, A2, size=S * A1))
        checked += 1
        bad = check_one(leader, follower_flat)
        if bad is not None:
            return bad
    return IrreducibilityReport(
        ok=True,
        n_pairs_checked=checked,
        budget_exceeded=True,
        note=f"budget exceeded, sampled {checked} pairs out of {total}",
    )


# ---------------------------------------------------------------------------
# JSON model files and shipped fixtures
# ---------------------------------------------------------------------------

def model_to_dict(model: GameModel) -> dict:
    return {
        "n_states": model.n_states,
        "n_actions1": model.n_actions1,
        "n_actions2": model.n_actions2,
        "K": model.K,
        "kernel": model.kernel.tolist(),
        "costs": model.costs.tolist(),
    }


def model_from_dict(data: dict) -> GameModel:
    required = {"n_states", "n_actions1", "n_actions2", "K", "kernel", "costs"}
    missing = required - data.keys()
    if missing:
        raise ValueError(f"model file missing fields: {sorted(missing)}")
    kernel = np.asarray(data["kernel"], dtype=float)
    costs = np.asarray(data["costs"], dtype=float)
    model = GameModel(kernel=kernel, costs=costs)
    declared = (data["n_states"], data["n_actions1"], data["n_actions2"], data["K"])
    actual = (model.n_states, model.n_actions1, model.n_actions2, model.K)
    if tuple(declared) != actual:
        raise ValueError(f"declared dimensions {declared} do not match arrays {actual}")
    return model


def load_model(path: str | Path) -> GameModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: GameModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def matching_pennies_game() -> GameModel:
    """One state, 2x2 actions; cost (1{a1=a2}, 1{a1!=a2}).

    The informed follower can always match the leader, which makes the
    first cost component unavoidable: a compact non-approachability probe.
    """
    kernel = np.ones((1, 2, 2, 1))
    costs = np.zeros((1, 2, 2, 2))
    for a1, a2 in itertools.product(range(2), range(2)):
        costs[0, a1, a2, 0] = 1.0 if a1 == a2 else 0.0
        costs[0, a1, a2, 1] = 0.0 if a1 == a2 else 1.0
    return GameModel(kernel=kernel, costs=costs)


def two_state_chain_game(hold: float = 0.9) -> GameModel:
    """Two states, leader actions {stay, switch}, singleton adversary.

    Action 0 keeps the current state with probability ``hold``; action 1
    switches with probability ``hold``.  Costs depend on the state only:
    c(s0) = (1, 0), c(s1) = (0, 1), so the achievable average costs form
    the segment {(p, 1-p) : p in [1-hold, hold]}.
    """
    kernel = np.zeros((2, 2, 1, 2))
    for s in range(2):
        kernel[s, 0, 0, s] = hold
        kernel[s, 0, 0, 1 - s] = 1.0 - hold
        kernel[s, 1, 0, 1 - s] = hold
        kernel[s, 1, 0, s] = 1.0 - hold
    costs = np.zeros((2, 2, 1, 2))
    costs[0, :, :, 0] = 1.0
    costs[1, :, :, 1] = 1.0
    return GameModel(kernel=kernel, costs=costs)


def random_game(n_states: int, n_actions1: int, n_actions2: int, K: int, rng: np.random.Generator) -> GameModel:
    """Seeded random game with strictly positive kernel rows (irreducible
    under every pair) and costs uniform in [-1, 1]."""
    kernel = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions1, n_actions2))
    kernel = np.clip(kernel, 1e-6, None)
    kernel /= kernel.sum(axis=3, keepdims=True)
    costs = rng.uniform(-1.0, 1.0, size=(n_states, n_actions1, n_actions2, K))
    return GameModel(kernel=kernel, costs=costs)
