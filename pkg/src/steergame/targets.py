"""Target sets in cost space: projections, steering directions, support.

Convex variants (ball, box, bounded halfspace intersection) have a unique
nearest point; a finite union of convex pieces may have several, and the
multi-projection returns all of them within a tie tolerance.  The steering
direction at a point x outside the set is the unit vector from the chosen
nearest point toward x.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import nnls

INSIDE_TOL = 1e-12
TIE_TOL = 1e-9
DYKSTRA_MAX_SWEEPS = 10**4
DYKSTRA_RESIDUAL = 1e-10


class TargetSet:
    """Closed target set for the running-average cost vector."""

    dim: int

    def project(self, x) -> list[np.ndarray]:
        """All nearest points of x in the set (singleton when convex)."""
        raise NotImplementedError

    def support(self, lam) -> float:
        """Support function max_{z in D} <z, lam> (convex variants only)."""
        raise NotImplementedError

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)[0]))

    def contains(self, x) -> bool:
        """Inside test with the shared tolerance: near-boundary points count
        as inside because the steering direction is ill-conditioned there."""
        return self.distance(x) <= INSIDE_TOL

    def nearest_point(self, x) -> np.ndarray:
        """Deterministic selection among ties: lowest-index piece, then
        lowest-index point, as produced by project()."""
        return self.project(x)[0]

    def direction(self, x, chosen: np.ndarray | None = None) -> np.ndarray | None:
        """Unit steering direction (x - p)/||x - p||, or None when x is inside.

        ``chosen`` must be a nearest point (one of project(x)); it defaults
        to the deterministic selection.
        """
        x = np.asarray(x, dtype=float)
        dist = self.distance(x)
        if dist <= INSIDE_TOL:
            return None
        if chosen is None:
            chosen = self.nearest_point(x)
        else:
            chosen = np.asarray(chosen, dtype=float)
            if abs(np.linalg.norm(x - chosen) - dist) > TIE_TOL:
                raise ValueError("chosen point is not a nearest point of x")
        diff = x - chosen
        return diff / np.linalg.norm(diff)


@dataclass(frozen=True)
class Ball(TargetSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        diff = x - self.center
        norm = np.linalg.norm(diff)
        if norm <= self.radius:
            return [x.copy()]
        return [self.center + self.radius * diff / norm]

    def support(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        return float(self.center @ lam + self.radius * np.linalg.norm(lam))

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return max(0.0, float(np.linalg.norm(x - self.center)) - self.radius)


@dataclass(frozen=True)
class Box(TargetSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def project(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        return [np.clip(x, self.lower, self.upper)]

    def support(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        return float(np.sum(np.where(lam >= 0, self.upper, self.lower) * lam))


@dataclass(frozen=True)
class HalfspaceIntersection(TargetSet):
    """Bounded intersection of halfspaces {z : <normal_i, z> <= offset_i}.

    Normals are normalized to unit length at construction.  Boundedness is
    verified by a support-finiteness probe over the signed axis directions:
    the support in direction d is finite iff d lies in the cone of the
    normals, checked by nonnegative least squares.  Projection uses
    Dykstra's alternating projections onto the halfspaces.
    """

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float)
        if normals.ndim != 2 or offsets.shape != (normals.shape[0],):
            raise ValueError("need normals (m, K) and offsets (m,)")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero normal vector")
        normals = normals / norms[:, None]
        offsets = offsets / norms
        normals.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        for d in range(normals.shape[1]):
            for sign in (1.0, -1.0):
                e = np.zeros(normals.shape[1])
                e[d] = sign
                _, residual = nnls(normals.T, e)
                if residual > 1e-9:
                    raise ValueError(
                        f"halfspace intersection unbounded in axis direction {sign * e}"
                    )
        vertices = self._enumerate_vertices(normals, offsets)
        if len(vertices) == 0:
            raise ValueError("halfspace intersection is empty or degenerate")
        verts = np.array(vertices)
        verts.setflags(write=False)
        object.__setattr__(self, "_vertices", verts)

    @staticmethod
    def _enumerate_vertices(normals: np.ndarray, offsets: np.ndarray) -> list[np.ndarray]:
        m, K = normals.shape
        if K > 4:
            raise ValueError("vertex enumeration supports dimension K <= 4")
        vertices: list[np.ndarray] = []
        for rows in itertools.combinations(range(m), K):
            A = normals[list(rows)]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            v = np.linalg.solve(A, offsets[list(rows)])
            if np.all(normals @ v <= offsets + 1e-9):
                if not any(np.linalg.norm(v - u) < 1e-9 for u in vertices):
                    vertices.append(v)
        return vertices

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices  # type: ignore[attr-defined]

    def project(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        slack = self.normals @ x - self.offsets
        if np.all(slack <= 1e-12):
            return [x.copy()]
        m = self.normals.shape[0]
        z = x.copy()
        corrections = np.zeros((m, x.shape[0]))
        for _ in range(DYKSTRA_MAX_SWEEPS):
            z_prev = z.copy()
            for i in range(m):
                y = z + corrections[i]
                violation = self.normals[i] @ y - self.offsets[i]
                z = y - max(violation, 0.0) * self.normals[i]
                corrections[i] = y - z
            if np.linalg.norm(z - z_prev) <= DYKSTRA_RESIDUAL:
                if np.all(self.normals @ z <= self.offsets + 1e-8):
                    return [z]
        raise RuntimeError(
            f"Dykstra projection did not converge within {DYKSTRA_MAX_SWEEPS} sweeps"
        )

    def support(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        return float(np.max(self.vertices @ lam))


@dataclass(frozen=True)
class Union(TargetSet):
    """Finite union of convex pieces.  Projection is the multi-projection:
    every piecewise-nearest point within TIE_TOL of the minimum distance,
    listed in piece order so index 0 is the deterministic controller choice."""

    pieces: tuple[TargetSet, ...]

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if len(pieces) == 0:
            raise ValueError("union must have at least one piece")
        if any(isinstance(p, Union) for p in pieces):
            raise ValueError("union pieces must be convex target sets")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise ValueError("union pieces must share one dimension")
        object.__setattr__(self, "pieces", pieces)

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    def project(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        candidates = [p.project(x)[0] for p in self.pieces]
        dists = [float(np.linalg.norm(x - c)) for c in candidates]
        best = min(dists)
        return [c for c, d in zip(candidates, dists) if d <= best + TIE_TOL]

    def nearest_piece(self, x) -> int:
        """Lowest index among pieces attaining the minimum distance."""
        x = np.asarray(x, dtype=float)
        dists = [float(np.linalg.norm(x - p.project(x)[0])) for p in self.pieces]
        best = min(dists)
        for i, d in enumerate(dists):
            if d <= best + TIE_TOL:
                return i
        raise AssertionError("unreachable")

    def support(self, lam) -> float:
        raise ValueError("support undefined for non-convex target")


# ---------------------------------------------------------------------------
# JSON target specs
# ---------------------------------------------------------------------------

def target_from_dict(data: dict) -> TargetSet:
    kind = data.get("type")
    if kind == "ball":
        return Ball(center=np.asarray(data["center"], dtype=float), radius=float(data["radius"]))
    if kind == "box":
        return Box(lower=np.asarray(data["lower"], dtype=float), upper=np.asarray(data["upper"], dtype=float))
    if kind == "halfspaces":
        rows = data["rows"]
        normals = np.asarray([r["normal"] for r in rows], dtype=float)
        offsets = np.asarray([r["offset"] for r in rows], dtype=float)
        return HalfspaceIntersection(normals=normals, offsets=offsets)
    if kind == "union":
        return Union(pieces=tuple(target_from_dict(p) for p in data["pieces"]))
    raise ValueError(f"unknown target type: {kind!r}")


def target_to_dict(target: TargetSet) -> dict:
    if isinstance(target, Ball):
        return {"type": "ball", "center": target.center.tolist(), "radius": target.radius}
    if isinstance(target, Box):
        return {"type": "box", "lower": target.lower.tolist(), "upper": target.upper.tolist()}
    if isinstance(target, HalfspaceIntersection):
        return {
            "type": "halfspaces",
            "rows": [
                {"normal": n.tolist(), "offset": float(b)}
                for n, b in zip(target.normals, target.offsets)
            ],
        }
    if isinstance(target, Union):
        return {"type": "union", "pieces": [target_to_dict(p) for p in target.pieces]}
    raise TypeError(f"unknown target class: {type(target)!r}")


def load_target(path: str | Path) -> TargetSet:
    with open(path) as fh:
        return target_from_dict(json.load(fh))
