"""Pluggable follower behaviors for closed-loop runs.

The worst-case adversary is the informed maximizer: it is granted the model
and the leader's current policy, and replays the exact best response for
the current steering direction, refreshed periodically as the average cost
drifts.  Approachability has to hold against every follower strategy, so
this is the most adversarial implementable opponent; the remaining
variants (stationary, scripted, uniform) exercise the benign end.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameModel
from .planner import PlannerOptions, follower_best_response
from .targets import TargetSet


@dataclass(frozen=True)
class AdversaryContext:
    """What the environment exposes to the adversary each step."""

    x: np.ndarray
    leader_policy: np.ndarray | None  # (S,) ints, the adversary's estimate


class Adversary:
    def act(self, s: int, a1: int, context: AdversaryContext, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def reset(self) -> None:
        pass


class UniformRandomAdversary(Adversary):
    def __init__(self, n_actions2: int):
        self.n_actions2 = n_actions2

    def act(self, s, a1, context, rng):
        return int(rng.integers(self.n_actions2))


class StationaryAdversary(Adversary):
    """Samples a fixed conditional policy pi2(a2 | s, a1)."""

    def __init__(self, policy: np.ndarray):
        policy = np.asarray(policy, dtype=float)
        if np.any(policy < 0) or np.any(np.abs(policy.sum(axis=-1) - 1.0) > 1e-12):
            raise ValueError("stationary adversary rows must be probability vectors")
        self.policy = policy
        self._cum = np.cumsum(policy, axis=-1)

    def act(self, s, a1, context, rng):
        idx = int(np.searchsorted(self._cum[s, a1], rng.random(), side="right"))
        return min(idx, self.policy.shape[-1] - 1)


class ScriptedAdversary(Adversary):
    def __init__(self, actions):
        actions = list(int(a) for a in actions)
        if not actions:
            raise ValueError("scripted adversary needs a nonempty action sequence")
        self.actions = actions
        self._pos = 0

    def act(self, s, a1, context, rng):
        if self._pos >= len(self.actions):
            raise RuntimeError("scripted adversary exhausted its action sequence")
        a2 = self.actions[self._pos]
        self._pos += 1
        return a2

    def reset(self):
        self._pos = 0


class WorstCaseAdversary(Adversary):
    """Informed best responder, refreshed every ``refresh_period`` steps.

    On refresh it recomputes the follower's best response to the observed
    leader policy for the steering direction of the current average cost.
    Inside the target the direction is undefined, so the last response is
    held (axis direction on a cold start, mirroring the controller).
    """

    def __init__(
        self,
        model: GameModel,
        target: TargetSet,
        refresh_period: int = 1000,
        planner_options: PlannerOptions = PlannerOptions(),
    ):
        self.model = model
        self.target = target
        self.refresh_period = max(1, int(refresh_period))
        self.planner_options = planner_options
        self._response: np.ndarray | None = None
        self._steps_since_refresh = 0

    def reset(self):
        self._response = None
        self._steps_since_refresh = 0

    def _refresh(self, context: AdversaryContext) -> None:
        lam = self.target.direction(context.x)
        if lam is None:
            if self._response is not None:
                return
            lam = np.zeros(self.target.dim)
            lam[0] = 1.0
        leader = context.leader_policy
        if leader is None:
            leader = np.zeros(self.model.n_states, dtype=int)
        _, policy, _ = follower_best_response(self.model, leader, lam, self.planner_options)
        self._response = policy

    def act(self, s, a1, context, rng):
        if self._response is None or self._steps_since_refresh >= self.refresh_period:
            self._refresh(context)
            self._steps_since_refresh = 0
        self._steps_since_refresh += 1
        return int(self._response[s, a1])


# ---------------------------------------------------------------------------
# JSON adversary specs (embedded in run configs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdversarySpec:
    kind: str
    refresh_period: int = 1000
    policy: tuple | None = None
    actions: tuple | None = None

    KINDS = ("worst_case", "stationary", "scripted", "uniform")

    @staticmethod
    def from_dict(data: dict) -> "AdversarySpec":
        kind = data.get("kind")
        if kind == "worst_case":
            extra = set(data) - {"kind", "refresh_period"}
            if extra:
                raise ValueError(f"unknown adversary fields: {sorted(extra)}")
            return AdversarySpec(kind=kind, refresh_period=int(data.get("refresh_period", 1000)))
        if kind == "stationary":
            extra = set(data) - {"kind", "policy"}
            if extra:
                raise ValueError(f"unknown adversary fields: {sorted(extra)}")
            return AdversarySpec(kind=kind, policy=_freeze(data["policy"]))
        if kind == "scripted":
            extra = set(data) - {"kind", "actions"}
            if extra:
                raise ValueError(f"unknown adversary fields: {sorted(extra)}")
            return AdversarySpec(kind=kind, actions=tuple(int(a) for a in data["actions"]))
        if kind == "uniform":
            extra = set(data) - {"kind"}
            if extra:
                raise ValueError(f"unknown adversary fields: {sorted(extra)}")
            return AdversarySpec(kind=kind)
        raise ValueError(f"unknown adversary kind: {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "worst_case":
            return {"kind": self.kind, "refresh_period": self.refresh_period}
        if self.kind == "stationary":
            return {"kind": self.kind, "policy": _thaw(self.policy)}
        if self.kind == "scripted":
            return {"kind": self.kind, "actions": list(self.actions)}
        return {"kind": self.kind}


def _freeze(nested):
    if isinstance(nested, (list, tuple)):
        return tuple(_freeze(v) for v in nested)
    return float(nested)


def _thaw(nested):
    if isinstance(nested, tuple):
        return [_thaw(v) for v in nested]
    return nested


def build_adversary(spec: AdversarySpec, model: GameModel, target: TargetSet) -> Adversary:
    if spec.kind == "worst_case":
        return WorstCaseAdversary(model, target, refresh_period=spec.refresh_period)
    if spec.kind == "stationary":
        return StationaryAdversary(np.asarray(spec.policy, dtype=float))
    if spec.kind == "scripted":
        return ScriptedAdversary(spec.actions)
    if spec.kind == "uniform":
        return UniformRandomAdversary(model.n_actions2)
    raise ValueError(f"unknown adversary kind: {spec.kind!r}")
