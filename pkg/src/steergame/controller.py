"""Steering controller and approachability condition checkers.

The controller closes the loop of the known-kernel strategy: at each step
it projects the running average cost onto the target, forms the steering
direction, and plays the leader policy of the scalarized min-max game for
that direction.  Policies are cached and only re-solved when the direction
moves more than a threshold, which is sound because the min-max value is
sqrt(K)-Lipschitz in the direction.

The checkers sweep directions (convex case) or sampled outside points
(union case) and compare the min-max value against the support value at
the projection.  A violated direction is a certificate of
non-approachability; an all-pass sweep is sampled evidence, not a proof,
and the report says so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import GameModel
from .planner import PlannerOptions, PlannerSolution, scalarize, solve_minmax
from .targets import TargetSet, Union

COND_TOL = 1e-7
DEFAULT_RECOMPUTE_THRESHOLD = 0.05


def unit_directions(dim: int, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """n unit vectors: uniform angular grid in the plane, Fibonacci sphere
    in 3-D, seeded uniform random above that."""
    if n <= 0:
        return np.zeros((0, dim))
    if dim == 1:
        signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
        return signs[:, None]
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if dim == 3:
        i = np.arange(n) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / n)
        theta = np.pi * (1.0 + math.sqrt(5.0)) * i
        return np.column_stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
        )
    rng = rng if rng is not None else np.random.default_rng(0)
    raw = rng.normal(size=(n, dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


@dataclass
class SteeringController:
    """Stateful leader for one run: owns the policy cache for a target.

    ``recompute_threshold`` is the direction drift above which the planner
    is re-solved; at 0 any change in direction re-solves.  When the average
    cost is inside the target the last policy is held (the steering
    strategy is only defined outside), falling back to the lowest-index
    axis direction on a cold start.
    """

    model: GameModel
    target: TargetSet
    recompute_threshold: float = DEFAULT_RECOMPUTE_THRESHOLD
    planner_options: PlannerOptions = field(default_factory=PlannerOptions)
    cached_lambda: np.ndarray | None = None
    cached_policy: np.ndarray | None = None
    cached_solution: PlannerSolution | None = None
    planner_calls: int = 0

    def _solve(self, lam: np.ndarray) -> None:
        solution = solve_minmax(scalarize(self.model, lam), self.planner_options)
        self.cached_lambda = lam
        self.cached_policy = solution.leader_policy
        self.cached_solution = solution
        self.planner_calls += 1

    def next_policy(self, x) -> np.ndarray:
        """Leader policy (state -> a1 ints) for the current average cost."""
        x = np.asarray(x, dtype=float)
        lam = self.target.direction(x)
        if lam is None:
            if self.cached_policy is None:
                axis = np.zeros(self.target.dim)
                axis[0] = 1.0
                self._solve(axis)
            return self.cached_policy
        if (
            self.cached_lambda is None
            or np.linalg.norm(lam - self.cached_lambda) > self.recompute_threshold
        ):
            self._solve(lam)
        return self.cached_policy


@dataclass(frozen=True)
class ApproachabilityCertificate:
    """Outcome of a condition sweep.  ``passed`` with no counterexample is
    sampled evidence of approachability, not a proof; a counterexample
    direction certifies non-approachability outright."""

    passed: bool
    mode: str  # "convex-directions" or "union-points"
    n_checked: int
    counterexample: dict | None
    max_margin: float  # max over the sweep of c*(lam) - support bound
    note: str

    def to_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "mode": self.mode,
            "n_checked": self.n_checked,
            "max_margin": self.max_margin,
            "note": self.note,
            "counterexample": self.counterexample,
        }
        return out


def check_approachable_convex(
    model: GameModel,
    target: TargetSet,
    n_directions: int = 360,
    cond_tol: float = COND_TOL,
    planner_options: PlannerOptions = PlannerOptions(),
    rng: np.random.Generator | None = None,
) -> ApproachabilityCertificate:
    """Sweep unit directions and verify c*(lam) <= h_D(lam) + cond_tol.

    For x outside a convex D with steering direction lam, the projection is
    the support point of D in direction lam, so the drift condition
    <c(psi) - P_D(x), lam> <= 0 reduces to c*(lam) <= h_D(lam).  Any
    violated direction certifies a half-space containing D that is not
    approachable.  The reported counterexample is the direction of maximum
    violation margin.
    """
    if isinstance(target, Union):
        raise ValueError("convex check requires a convex target; use the union check")
    directions = unit_directions(target.dim, n_directions, rng)
    worst_margin = -math.inf
    worst_lam = None
    for lam in directions:
        value = solve_minmax(scalarize(model, lam), planner_options).value
        margin = value - target.support(lam)
        if margin > worst_margin:
            worst_margin = margin
            worst_lam = lam
    if worst_lam is not None and worst_margin > cond_tol:
        counterexample = {
            "lambda": worst_lam.tolist(),
            "minmax_value": worst_margin + target.support(worst_lam),
            "support_value": target.support(worst_lam),
            "margin": worst_margin,
        }
        return ApproachabilityCertificate(
            passed=False,
            mode="convex-directions",
            n_checked=len(directions),
            counterexample=counterexample,
            max_margin=worst_margin,
            note="necessary condition violated: the reported half-space is not approachable",
        )
    note = (
        "all sampled directions satisfy the condition (sampled sufficiency, not a proof)"
        if len(directions) > 0
        else "no directions sampled: vacuous pass"
    )
    return ApproachabilityCertificate(
        passed=True,
        mode="convex-directions",
        n_checked=len(directions),
        counterexample=None,
        max_margin=worst_margin if len(directions) else 0.0,
        note=note,
    )


def check_approachable_nonconvex(
    model: GameModel,
    target: Union,
    sampler,
    n_points: int,
    cond_tol: float = COND_TOL,
    planner_options: PlannerOptions = PlannerOptions(),
    rng: np.random.Generator | None = None,
    max_attempts_per_point: int = 1000,
) -> ApproachabilityCertificate:
    """Pointwise condition check for a union target.

    Samples n_points points outside the union via ``sampler(rng)``; for
    each x and every nearest point p in the multi-projection, verifies
    c*(lam) <= <p, lam> + cond_tol with lam the corresponding direction.
    """
    if not isinstance(target, Union):
        raise ValueError("union check requires a union target")
    rng = rng if rng is not None else np.random.default_rng(0)
    if n_points == 0:
        return ApproachabilityCertificate(
            passed=True,
            mode="union-points",
            n_checked=0,
            counterexample=None,
            max_margin=0.0,
            note="no samples: vacuous pass",
        )
    worst_margin = -math.inf
    worst = None
    checked = 0
    for _ in range(n_points):
        x = None
        for _ in range(max_attempts_per_point):
            candidate = np.asarray(sampler(rng), dtype=float)
            if not target.contains(candidate):
                x = candidate
                break
        if x is None:
            raise RuntimeError("sampler failed to produce a point outside the target")
        checked += 1
        for p in target.project(x):
            lam = target.direction(x, chosen=p)
            value = solve_minmax(scalarize(model, lam), planner_options).value
            margin = value - float(p @ lam)
            if margin > worst_margin:
                worst_margin = margin
                worst = (x, p, lam)
    if worst is not None and worst_margin > cond_tol:
        x, p, lam = worst
        counterexample = {
            "x": x.tolist(),
            "nearest_point": p.tolist(),
            "lambda": lam.tolist(),
            "margin": worst_margin,
        }
        return ApproachabilityCertificate(
            passed=False,
            mode="union-points",
            n_checked=checked,
            counterexample=counterexample,
            max_margin=worst_margin,
            note="condition violated at a sampled point",
        )
    return ApproachabilityCertificate(
        passed=True,
        mode="union-points",
        n_checked=checked,
        counterexample=None,
        max_margin=worst_margin,
        note="all sampled points satisfy the condition (sampled sufficiency, not a proof)",
    )


def box_sampler(lower, upper):
    """Uniform sampler over a box, for the union check."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    def sample(rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(lower, upper)

    return sample
