"""Finite samples of metric spaces and ball-shaped cozero functions.

A :class:`SampledSpace` holds a finite point set together with its pairwise
distances, either computed from ambient coordinates or supplied directly as a
matrix. Open sets over the sample are represented extensionally by
:class:`CozeroFunction`: a vector of values in [0, 1], one per sample point,
whose strict-positivity locus is the open set. Balls come with two canonical
cozero representations, one for the ball itself and one for the complement of
its formal closure.

Points are identified by their index in the sample. Ball centers may be
point indices or ambient coordinate vectors (the latter only when the space
carries coordinates).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InputError

# Metric validation tolerance for the triangle inequality. Distance
# comparisons elsewhere are exact on the computed float values.
DISTANCE_TOL = 1e-9

Center = Union[int, np.ndarray]


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SampledSpace:
    """A finite metric sample with an explicit mesh (sampling fineness).

    Invariants, checked at construction: the distance matrix is symmetric,
    exactly zero on the diagonal, strictly positive off it, and satisfies the
    triangle inequality up to ``DISTANCE_TOL``; the sample is nonempty and
    ``mesh`` is positive.
    """

    dist: np.ndarray
    coords: np.ndarray | None
    mesh: float

    def __post_init__(self) -> None:
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise InputError("distance matrix must be square and nonempty")
        if not np.isfinite(d).all():
            raise InputError("distances must be finite")
        if (d.diagonal() != 0.0).any():
            i = int(np.nonzero(d.diagonal())[0][0])
            raise InputError(f"distance matrix diagonal must be exactly zero (point {i})")
        if not (d == d.T).all():
            i, j = np.argwhere(d != d.T)[0]
            raise InputError(f"distance matrix must be symmetric (points {i}, {j})")
        off = d + np.eye(d.shape[0])
        if (off <= 0.0).any():
            i, j = np.argwhere(off <= 0.0)[0]
            raise InputError(f"distinct points must have positive distance (points {i}, {j})")
        # d(i,k) <= d(i,j) + d(j,k) for all triples, up to tolerance.
        slack = (d[:, :, None] + d[None, :, :]).min(axis=1) - d
        if (slack < -DISTANCE_TOL).any():
            i, k = np.argwhere(slack < -DISTANCE_TOL)[0]
            raise InputError(f"triangle inequality violated at points {i}, {k}")
        if not (isinstance(self.mesh, (int, float)) and math.isfinite(self.mesh) and self.mesh > 0):
            raise InputError("mesh must be a positive real")
        object.__setattr__(self, "dist", _as_readonly(d))
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim != 2 or c.shape[0] != d.shape[0]:
                raise InputError("coordinates must be one row per sample point")
            object.__setattr__(self, "coords", _as_readonly(c))
        object.__setattr__(self, "mesh", float(self.mesh))

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]], mesh: float) -> "SampledSpace":
        c = np.asarray(points, dtype=float)
        if c.ndim != 2 or c.shape[0] == 0:
            raise InputError("points must be a nonempty list of coordinate rows")
        diff = c[:, None, :] - c[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=-1))
        np.fill_diagonal(d, 0.0)
        return cls(dist=d, coords=c, mesh=mesh)

    @classmethod
    def from_distance_matrix(cls, dist: Sequence[Sequence[float]], mesh: float) -> "SampledSpace":
        return cls(dist=np.asarray(dist, dtype=float), coords=None, mesh=mesh)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SampledSpace":
        if not isinstance(obj, dict):
            raise InputError("space document must be a JSON object")
        points = obj.get("points")
        matrix = obj.get("distance_matrix")
        if (points is None) == (matrix is None):
            raise InputError("exactly one of points/distance_matrix must be present")
        if "mesh" not in obj:
            raise InputError("space document must carry a mesh")
        mesh = obj["mesh"]
        if points is not None:
            return cls.from_points(points, mesh)
        return cls.from_distance_matrix(matrix, mesh)

    @classmethod
    def from_json(cls, text: str) -> "SampledSpace":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"space document is not valid JSON: {exc}") from exc
        return cls.from_json_dict(obj)

    def to_json_dict(self) -> dict:
        if self.coords is not None:
            return {
                "points": [[float(v) for v in row] for row in self.coords],
                "distance_matrix": None,
                "mesh": self.mesh,
            }
        return {
            "points": None,
            "distance_matrix": [[float(v) for v in row] for row in self.dist],
            "mesh": self.mesh,
        }

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def check_point(self, i: int) -> int:
        if not isinstance(i, (int, np.integer)) or not 0 <= int(i) < self.size:
            raise InputError(f"unknown point identifier: {i!r}")
        return int(i)

    def distances_from(self, center: Center) -> np.ndarray:
        """Distances from every sample point to ``center``."""
        if isinstance(center, (int, np.integer)):
            return self.dist[self.check_point(center)]
        c = np.asarray(center, dtype=float)
        if self.coords is None:
            raise InputError("ambient-vector centers require a space with coordinates")
        if c.shape != (self.coords.shape[1],):
            raise InputError(
                f"center has dimension {c.shape}, expected ({self.coords.shape[1]},)"
            )
        diff = self.coords - c[None, :]
        return np.sqrt((diff * diff).sum(axis=-1))


@dataclass(frozen=True, eq=False)
class Ball:
    """An open metric ball, given by a center and a positive radius."""

    center: Center
    radius: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InputError(f"ball radius must be positive, got {self.radius!r}")
        if not isinstance(self.center, (int, np.integer)):
            object.__setattr__(self, "center", _as_readonly(np.atleast_1d(self.center)))
        else:
            object.__setattr__(self, "center", int(self.center))


def center_distance(b1: Ball, b2: Ball, space: SampledSpace | None = None) -> float:
    """Distance between two ball centers, using ``space`` for point ids."""
    c1, c2 = b1.center, b2.center
    if isinstance(c1, int) or isinstance(c2, int):
        if space is None:
            raise InputError("point-id centers require the sampled space")
        if isinstance(c1, int) and isinstance(c2, int):
            return float(space.dist[space.check_point(c1), space.check_point(c2)])
        if isinstance(c1, int):
            return float(space.distances_from(c2)[space.check_point(c1)])
        return float(space.distances_from(c1)[space.check_point(c2)])
    if c1.shape != c2.shape:
        raise InputError("ball centers live in different ambient dimensions")
    return float(np.sqrt(((c1 - c2) ** 2).sum()))


@dataclass(frozen=True, eq=False)
class CozeroFunction:
    """A [0, 1]-valued function on the sample; its open set is {x : u(x) > 0}."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] == 0:
            raise InputError("cozero values must form a nonempty vector")
        if not np.isfinite(v).all():
            raise InputError("cozero values must be finite")
        if (v < 0.0).any() or (v > 1.0).any():
            i = int(np.nonzero((v < 0.0) | (v > 1.0))[0][0])
            raise InputError(f"cozero value out of [0, 1] at point {i}")
        object.__setattr__(self, "values", _as_readonly(v))

    def __call__(self, i: int) -> float:
        return float(self.values[i])

    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.nonzero(self.values > 0.0)[0])

    def is_empty(self) -> bool:
        return not (self.values > 0.0).any()

    def to_sparse_dict(self) -> dict[str, float]:
        nz = np.nonzero(self.values != 0.0)[0]
        return {str(int(i)): float(self.values[i]) for i in nz}

    @classmethod
    def from_sparse_dict(cls, obj: dict, size: int) -> "CozeroFunction":
        v = np.zeros(size, dtype=float)
        for key, value in obj.items():
            try:
                i = int(key)
            except (TypeError, ValueError) as exc:
                raise InputError(f"bad point index {key!r} in cover values") from exc
            if not 0 <= i < size:
                raise InputError(f"unknown point identifier: {i}")
            v[i] = float(value)
        return cls(v)


def ball_cozero(space: SampledSpace, ball: Ball) -> CozeroFunction:
    """Normalized linear ramp vanishing exactly where the ball does.

    u(x) = min(1, max(0, (r - d(x, c)) / r)); u(x) > 0 iff d(x, c) < r.
    """
    d = space.distances_from(ball.center)
    return CozeroFunction(np.minimum(1.0, np.maximum(0.0, (ball.radius - d) / ball.radius)))


def complement_cozero(space: SampledSpace, ball: Ball) -> CozeroFunction:
    """Cozero function of the complement of the ball's formal closure.

    u(x) = min(1, max(0, d(x, c) - r)); u(x) > 0 iff d(x, c) > r.
    """
    d = space.distances_from(ball.center)
    return CozeroFunction(np.minimum(1.0, np.maximum(0.0, d - ball.radius)))


def formally_included(b1: Ball, b2: Ball, space: SampledSpace | None = None) -> bool:
    """Center-distance test d(c1, c2) <= r2 - r1.

    It implies that the formal closure of ``b1`` sits inside the formal
    closure of ``b2``, by the triangle inequality.
    """
    return center_distance(b1, b2, space) <= b2.radius - b1.radius


def strictly_included(b1: Ball, b2: Ball, space: SampledSpace | None = None) -> bool:
    """Strict center-distance test d(c1, c2) < r2 - r1.

    Strict inclusion puts the formal closure of ``b1`` inside the open ball
    ``b2``, which is what the two-member separating covers below need.
    """
    return center_distance(b1, b2, space) < b2.radius - b1.radius


def enumerate_balls(space: SampledSpace, radii_depth: int) -> list[Ball]:
    """Deterministic ball enumeration: dyadic radii, then point index.

    Radii are diameter * 2**(-k) for 0 <= k <= radii_depth, so the list has
    size (radii_depth + 1) * size and the ball with index k * size + i is
    centered at point i. A one-point sample has diameter zero; its radii fall
    back to the mesh so that every ball stays a genuine ball.
    """
    if not (isinstance(radii_depth, int) and radii_depth >= 1):
        raise InputError("radii_depth must be an integer >= 1")
    base = space.diameter if space.diameter > 0 else space.mesh
    out = []
    for k in range(radii_depth + 1):
        r = base * 2.0 ** (-k)
        for i in range(space.size):
            out.append(Ball(center=i, radius=r))
    return out
