"""Stagewise construction of sample maps into the cube I^(2n+1).

Each stage t consumes a map f_t and a scale delta_t and produces f_{t+1}
within 3*delta_t of f_t, so the maps form a Cauchy sequence with explicit
tail bound sum_{s>t} 3*delta_s <= (9/2)*delta_{t+1}. A stage:

  1. takes the t-th pair of enumerated balls (inner strictly inside outer)
     and forms the two-member cover {outer, complement of closed inner};
  2. meets it with the cover of delta_t-ball preimages under f_t taken
     over a uniform grid of the cube;
  3. reduces the meet to order <= n, star-refines, reduces again;
  4. picks one sample point per member, perturbs the image points (plus
     n+1 anchor points kept exactly on the stage's rational hyperplane)
     into general position inside the cube;
  5. maps each sample point to the weight-averaged vertex combination
     (the kappa map) and measures the separation quantities eta (between
     disjoint vertex spans) and eta' (vertex spans to the hyperplane).

delta_{t+1} = min(delta_t, eta/8, eta'/4)/3 makes all later wobble small
against both separations, which is what the final certificates cash in:
images stay farther than eta'/2 from each handled hyperplane, and small
image balls have preimages inside single members of the stage-1 covers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Iterator, Sequence

import numpy as np

from .covers import (
    Cover,
    dedupe_by_support,
    drop_empty_members,
    is_point_star_refinement,
    meet,
    order_of,
    star_refinement,
)
from .dimension import Oracle, reduce_order, separator_oracle
from .errors import CertificateError, GeneralPositionError, InputError
from .metric import (
    Ball,
    CozeroFunction,
    SampledSpace,
    _as_readonly,
    ball_cozero,
    complement_cozero,
    enumerate_balls,
    strictly_included,
)

RANK_TOL = 1e-9
HULL_TOL = 1e-9
CUBE_TOL = 1e-12
DELTA0 = 0.25


# ---------------------------------------------------------------------------
# rational hyperplanes


def stern_brocot_rationals(max_denominator: int) -> list[Fraction]:
    """All fractions in [0,1] with denominator <= max_denominator.

    Ordered by height: 0, 1 first, then breadth-first down the mediant
    tree between them (1/2; 1/3, 2/3; 1/4, 2/5, 3/5, 3/4; ...). Children
    have strictly larger denominators than their parents, so pruning at
    max_denominator is exact and the relative order matches the untruncated
    enumeration.
    """
    if max_denominator < 1:
        raise InputError("denominator bound must be at least 1")
    out = [Fraction(0), Fraction(1)]
    level = [(Fraction(0), Fraction(1))]
    while level:
        next_level = []
        for lo, hi in level:
            med = Fraction(lo.numerator + hi.numerator, lo.denominator + hi.denominator)
            if med.denominator <= max_denominator:
                out.append(med)
                next_level.append((lo, med))
                next_level.append((med, hi))
        level = next_level
    return out


@dataclass(frozen=True)
class Hyperplane:
    """Affine subspace of I^(2n+1) fixing n+1 coordinates at rationals.

    ``coords`` are the fixed coordinate indices (distinct, sorted, drawn
    from 0..2n) and ``values`` the corresponding rational values in [0,1].
    The ambient dimension is implied: 2*len(coords) - 1.
    """

    coords: tuple[int, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        coords = tuple(int(c) for c in self.coords)
        values = tuple(Fraction(v) for v in self.values)
        if len(coords) != len(set(coords)) or list(coords) != sorted(coords):
            raise InputError("fixed coordinates must be distinct and sorted")
        if len(values) != len(coords) or not coords:
            raise InputError("need one value per fixed coordinate")
        d = 2 * len(coords) - 1
        if min(coords) < 0 or max(coords) >= d:
            raise InputError(f"coordinate indices must lie in 0..{d - 1}")
        if any(v < 0 or v > 1 for v in values):
            raise InputError("hyperplane values must lie in [0,1]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)

    @property
    def ambient_dim(self) -> int:
        return 2 * len(self.coords) - 1

    @property
    def free_coords(self) -> tuple[int, ...]:
        fixed = set(self.coords)
        return tuple(i for i in range(self.ambient_dim) if i not in fixed)

    def base_point(self) -> np.ndarray:
        x = np.full(self.ambient_dim, 0.5)
        for c, v in zip(self.coords, self.values):
            x[c] = float(v)
        return x

    def basis(self) -> np.ndarray:
        """Orthonormal direction basis: the unit vectors of the free axes."""
        b = np.zeros((len(self.free_coords), self.ambient_dim))
        for row, c in enumerate(self.free_coords):
            b[row, c] = 1.0
        return b

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return all(abs(x[c] - float(v)) <= tol for c, v in zip(self.coords, self.values))

    def distance_to_point(self, x: np.ndarray) -> float:
        """Euclidean distance; only the fixed coordinates contribute."""
        x = np.asarray(x, dtype=float)
        diffs = [x[c] - float(v) for c, v in zip(self.coords, self.values)]
        return float(math.sqrt(sum(dd * dd for dd in diffs)))

    def equation_violation(self, x: np.ndarray) -> float:
        """Largest single-equation violation max_i |x_{c_i} - r_i|."""
        x = np.asarray(x, dtype=float)
        return float(max(abs(x[c] - float(v)) for c, v in zip(self.coords, self.values)))

    def to_json_dict(self) -> dict:
        return {
            "coords": list(self.coords),
            "values": [[v.numerator, v.denominator] for v in self.values],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Hyperplane":
        try:
            coords = tuple(int(c) for c in obj["coords"])
            values = tuple(Fraction(int(p), int(q)) for p, q in obj["values"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"not a hyperplane document: {exc}") from exc
        return cls(coords, values)


def enumerate_hyperplanes(n: int, T: int) -> list[Hyperplane]:
    """First T hyperplanes of I^(2n+1) that fix n+1 coordinates at rationals.

    Ordering: primarily by the largest denominator appearing in the value
    tuple, then by the fixed coordinate set (lexicographic), then by the
    value tuple compared rank-wise in the height order of
    :func:`stern_brocot_rationals`. Deterministic and duplicate-free.
    """
    if T < 1:
        raise InputError("need at least one hyperplane")
    if n < 0:
        raise InputError("n must be nonnegative")
    coord_sets = list(combinations(range(2 * n + 1), n + 1))
    out: list[Hyperplane] = []
    max_den = 1
    while len(out) < T:
        ranked = stern_brocot_rationals(max_den)
        rank = {v: i for i, v in enumerate(ranked)}
        fresh = sorted(
            (v for v in ranked if v.denominator == max_den), key=lambda v: rank[v]
        )
        if fresh:
            for coords in coord_sets:
                width = len(coords)
                for tup in _value_tuples(ranked, fresh, rank, width):
                    out.append(Hyperplane(coords, tup))
                    if len(out) == T:
                        return out
        max_den += 1
    return out


def _value_tuples(
    ranked: list[Fraction],
    fresh: list[Fraction],
    rank: dict[Fraction, int],
    width: int,
) -> Iterator[tuple[Fraction, ...]]:
    """Width-tuples over ``ranked`` containing a ``fresh`` value, rank-lex order."""
    ordered = sorted(ranked, key=lambda v: rank[v])
    fresh_set = set(fresh)
    for tup in product(ordered, repeat=width):
        if any(v in fresh_set for v in tup):
            yield tup


# ---------------------------------------------------------------------------
# general position


@dataclass(frozen=True, eq=False)
class AffineConstraint:
    """Affine subspace given by a point and an orthonormal direction basis."""

    point: np.ndarray
    basis: np.ndarray

    def __post_init__(self) -> None:
        point = _as_readonly(np.asarray(self.point, dtype=float))
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.size == 0:
            basis = basis.reshape(0, point.shape[0])
        if basis.shape[1] != point.shape[0]:
            raise InputError("constraint basis and point disagree on dimension")
        if basis.shape[0]:
            gram = basis @ basis.T
            if not np.allclose(gram, np.eye(basis.shape[0]), atol=1e-12):
                # orthonormalize arbitrary spanning rows
                q, r = np.linalg.qr(basis.T)
                keep = np.abs(np.diag(r)) > 1e-12
                basis = q.T[keep]
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "basis", _as_readonly(basis))

    @classmethod
    def on_hyperplane(cls, target: np.ndarray, plane: Hyperplane) -> "AffineConstraint":
        return cls(np.asarray(target, dtype=float), plane.basis())

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.basis.shape[0] == 0:
            return self.point.copy()
        return self.point + self.basis.T @ (self.basis @ (x - self.point))


def _dependent_subset(
    points: np.ndarray, tol: float, max_size: int
) -> tuple[int, ...] | None:
    """First affinely dependent subset of size <= max_size, or None.

    A subset of size s is independent iff the s-1 difference vectors from
    its first point have all singular values above tol. Checks are batched
    per subset size.
    """
    k = len(points)
    for s in range(2, min(k, max_size) + 1):
        subs = list(combinations(range(k), s))
        base = points[[c[0] for c in subs]]
        rest = points[np.array(subs)[:, 1:]]
        diffs = rest - base[:, None, :]
        sigma = np.linalg.svd(diffs, compute_uv=False)
        bad = np.nonzero(sigma.min(axis=1) <= tol)[0]
        if bad.size:
            return subs[int(bad[0])]
    return None


def general_position(
    targets: Sequence[np.ndarray] | np.ndarray,
    eps: float,
    constraints: Sequence[AffineConstraint | None] | None = None,
    box: tuple[np.ndarray, np.ndarray] | None = None,
    seed: int | tuple = 0,
    rounds: int = 64,
    tol: float = RANK_TOL,
) -> np.ndarray:
    """Move each target at most eps so no m+2 outputs sit in an m-flat.

    Affine independence is required of every subset of size up to d+1
    (singular values above ``tol``). Constrained points stay exactly on
    their subspaces; if ``box`` is given, unconstrained points are clipped
    into it (constrained points must land inside on their own). Round 0
    tries the projected targets unperturbed; later rounds redraw uniform
    perturbations of Euclidean size <= eps/2 from a generator seeded by
    ``seed``, so results are reproducible. Exhausting the round budget
    raises and names the last violating subset.
    """
    pts = np.array([np.asarray(t, dtype=float) for t in targets], dtype=float)
    if pts.ndim != 2:
        raise InputError("targets must be points of a common dimension")
    k, d = pts.shape
    if not (eps > 0):
        raise InputError("perturbation budget must be positive")
    cons: list[AffineConstraint | None] = list(constraints) if constraints else [None] * k
    if len(cons) != k:
        raise InputError("need one constraint entry (possibly None) per target")
    projected = pts.copy()
    for i, c in enumerate(cons):
        if c is None:
            continue
        projected[i] = c.project(pts[i])
        gap = float(np.linalg.norm(projected[i] - pts[i]))
        if gap > eps:
            raise InputError(
                f"target {i} lies {gap:.3g} from its constraint subspace, beyond eps"
            )
    if box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    rng = np.random.default_rng(seed)
    violation: tuple[int, ...] | None = None
    for round_no in range(rounds):
        candidate = projected.copy()
        if round_no > 0:
            for i, c in enumerate(cons):
                if c is None:
                    noise = rng.uniform(-1.0, 1.0, d)
                    candidate[i] = projected[i] + noise * (eps / (2.0 * math.sqrt(d)))
                elif c.basis.shape[0]:
                    kdim = c.basis.shape[0]
                    noise = rng.uniform(-1.0, 1.0, kdim)
                    candidate[i] = projected[i] + c.basis.T @ noise * (
                        eps / (2.0 * math.sqrt(kdim))
                    )
        if box is not None:
            # clipping a constrained point could leave its subspace, so a
            # constrained point outside the box invalidates the round
            escaped = False
            for i, c in enumerate(cons):
                if c is None:
                    candidate[i] = np.clip(candidate[i], lo, hi)
                elif ((candidate[i] < lo) | (candidate[i] > hi)).any():
                    escaped = True
                    break
            if escaped:
                continue
        shift = np.linalg.norm(candidate - pts, axis=1)
        if round_no > 0 and (shift >= eps).any():
            continue
        violation = _dependent_subset(candidate, tol, d + 1)
        if violation is None:
            return candidate
    raise GeneralPositionError(
        f"no general-position perturbation found in {rounds} rounds; "
        f"last violating subset: {violation}"
    )


# ---------------------------------------------------------------------------
# kappa maps and separation quantities


def active_indices(cozeros: Cover, x: int) -> frozenset[int]:
    """Indices of the members positive at sample point x."""
    col = cozeros.matrix[:, x]
    return frozenset(int(i) for i in np.nonzero(col > 0.0)[0])


@dataclass(frozen=True, eq=False)
class KappaMap:
    """Values and barycentric weights of a kappa map, one row per point."""

    values: np.ndarray
    weights: np.ndarray


def kappa_map(cozeros: Cover, vertices: np.ndarray | Sequence[np.ndarray]) -> KappaMap:
    """Weighted vertex average kappa(x) = sum_i u_i(x) z_i / sum_j u_j(x).

    Returns the images together with the weight rows lambda(x); each row
    sums to 1 and is supported exactly on the active members at x.
    """
    z = np.array([np.asarray(v, dtype=float) for v in vertices], dtype=float)
    if z.ndim != 2 or z.shape[0] != cozeros.size:
        raise InputError("need one vertex per cover member")
    u = cozeros.matrix
    denom = u.sum(axis=0)
    if (denom <= 0.0).any():
        x = int(np.nonzero(denom <= 0.0)[0][0])
        raise InputError(f"cover does not cover the sample: point {x} uncovered")
    weights = (u / denom).T
    return KappaMap(values=weights @ z, weights=weights)


def affine_distance(a: np.ndarray, b: "np.ndarray | Hyperplane") -> float:
    """Euclidean distance between affine hulls (or a hull and a hyperplane).

    Parametrizing both hulls from their first point, the distance is the
    least-squares residual of matching the difference of base points by a
    combination of edge directions.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        raise InputError("first hull needs at least one point")
    if isinstance(b, Hyperplane):
        if a.shape[1] != b.ambient_dim:
            raise InputError("points and hyperplane disagree on ambient dimension")
        b_point = b.base_point()
        b_dirs = b.basis()
    else:
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if b.shape[1] != a.shape[1]:
            raise InputError("hulls disagree on ambient dimension")
        b_point = b[0]
        b_dirs = b[1:] - b[0]
    a_dirs = a[1:] - a[0]
    m = np.vstack([a_dirs, b_dirs]).T
    rhs = b_point - a[0]
    if m.shape[1] == 0:
        return float(np.linalg.norm(rhs))
    resid = rhs - m @ np.linalg.lstsq(m, rhs, rcond=None)[0]
    return float(np.linalg.norm(resid))


def _span_distances(vertices: np.ndarray, subsets_a, subsets_b, b_extra=None) -> np.ndarray:
    """Batched hull-to-hull (or hull-to-plane) distances.

    Every (A, B) pair is reduced to one least-squares system; systems are
    padded with zero columns to a common width and solved through batched
    pseudo-inverses: dist^2 = |r|^2 - r^T M (M^T M)^+ M^T r with M the
    stacked edge directions and r the base-point difference.
    """
    d = vertices.shape[1]
    systems = []
    rhs = []
    for sa, sb in zip(subsets_a, subsets_b):
        pa = vertices[list(sa)]
        if b_extra is None:
            pb = vertices[list(sb)]
            b_point, b_dirs = pb[0], pb[1:] - pb[0]
        else:
            b_point, b_dirs = b_extra
        cols = [pa[1:] - pa[0], b_dirs]
        systems.append(np.vstack(cols).T)
        rhs.append(b_point - pa[0])
    width = max(s.shape[1] for s in systems)
    m = np.zeros((len(systems), d, width))
    for i, s in enumerate(systems):
        m[i, :, : s.shape[1]] = s
    r = np.asarray(rhs)
    proj = np.einsum("nij,nj->ni", m @ np.linalg.pinv(m), r)
    sq = np.einsum("ni,ni->n", r, r) - np.einsum("ni,ni->n", proj, r)
    return np.sqrt(np.maximum(sq, 0.0))


def eta(vertices: np.ndarray | Sequence[np.ndarray], n: int) -> float:
    """Least distance between affine spans of disjoint vertex subsets.

    Subsets range over sizes 1..n+1. In general position every pair of
    index-disjoint spans is disjoint; a pair closer than the degeneracy
    threshold therefore reports a violation. Returns +inf when no disjoint
    pair exists (fewer than two vertices).
    """
    z = np.array([np.asarray(v, dtype=float) for v in vertices], dtype=float)
    s = z.shape[0]
    pairs_a = []
    pairs_b = []
    for a_size in range(1, min(n + 1, s) + 1):
        for b_size in range(a_size, min(n + 1, s) + 1):
            for sa in combinations(range(s), a_size):
                rest = [i for i in range(s) if i not in sa]
                for sb in combinations(rest, b_size):
                    if a_size == b_size and sb < sa:
                        continue
                    pairs_a.append(sa)
                    pairs_b.append(sb)
    if not pairs_a:
        return math.inf
    dists = _span_distances(z, pairs_a, pairs_b)
    worst = int(dists.argmin())
    if dists[worst] <= HULL_TOL:
        raise GeneralPositionError(
            f"spans of {pairs_a[worst]} and {pairs_b[worst]} meet "
            f"(distance {dists[worst]:.3g})"
        )
    return float(dists.min())


def eta_prime(
    vertices: np.ndarray | Sequence[np.ndarray], plane: Hyperplane, n: int
) -> float:
    """Least distance from spans of <= n+1 vertices to the hyperplane."""
    z = np.array([np.asarray(v, dtype=float) for v in vertices], dtype=float)
    s = z.shape[0]
    if z.shape[1] != plane.ambient_dim:
        raise InputError("vertices and hyperplane disagree on ambient dimension")
    subsets = [
        sa
        for a_size in range(1, min(n + 1, s) + 1)
        for sa in combinations(range(s), a_size)
    ]
    dists = _span_distances(z, subsets, subsets, b_extra=(plane.base_point(), plane.basis()))
    worst = int(dists.argmin())
    if dists[worst] <= HULL_TOL:
        raise GeneralPositionError(
            f"span of {subsets[worst]} touches the hyperplane "
            f"(distance {dists[worst]:.3g})"
        )
    return float(dists.min())


# ---------------------------------------------------------------------------
# stage machinery


def stage_pairs(space: SampledSpace, balls: Sequence[Ball]) -> list[tuple[int, int]]:
    """Strict-inclusion pairs (inner, outer) in ball-production order.

    Each newly produced ball is paired against all earlier ones, first as
    the inner part of pairs (earlier, new), then of pairs (new, earlier).
    The list for a longer ball enumeration extends the list for a prefix,
    so the t-th pair does not depend on the enumeration depth used.
    """
    pairs: list[tuple[int, int]] = []
    for m in range(len(balls)):
        for q in range(m):
            if strictly_included(balls[q], balls[m], space):
                pairs.append((q, m))
        for q in range(m):
            if strictly_included(balls[m], balls[q], space):
                pairs.append((m, q))
    return pairs


def pair_schedule(space: SampledSpace, T: int) -> tuple[list[Ball], list[tuple[int, int]], int]:
    """Balls, first T strict-inclusion pairs, and the depth that sufficed."""
    depth = 1
    while True:
        balls = enumerate_balls(space, depth)
        pairs = stage_pairs(space, balls)
        if len(pairs) >= T:
            return balls, pairs[:T], depth
        depth += 1


def ball_preimage_cover(space: SampledSpace, f: np.ndarray, delta: float) -> Cover:
    """Cover of the sample by preimages of delta-balls around grid points.

    The grid is the uniform lattice with m+1 points per axis where
    m = ceil(sqrt(d)/delta), so its spacing is at most delta/sqrt(d) and
    every image point has a lattice point within delta/2. Only lattice
    points within delta of some image are enumerated (there are at most
    (2 sqrt(d) + 3)^d per image point); members are the cozero ramps
    max(0, (delta - |f(x) - g|)/delta), deduplicated by support.
    """
    f = np.asarray(f, dtype=float)
    p, d = f.shape
    m = max(1, math.ceil(math.sqrt(d) / delta))
    cells: set[tuple[int, ...]] = set()
    for row in f:
        axes = []
        for c in row:
            lo = max(0, math.floor((c - delta) * m))
            hi = min(m, math.ceil((c + delta) * m))
            axes.append(range(lo, hi + 1))
        cells.update(product(*axes))
    members = []
    for cell in sorted(cells):
        g = np.array(cell, dtype=float) / m
        dist = np.linalg.norm(f - g, axis=1)
        vals = np.maximum(0.0, (delta - dist) / delta)
        if (vals > 0.0).any():
            members.append(CozeroFunction(np.minimum(1.0, vals)))
    if not members:
        raise CertificateError("no grid ball meets the image; grid construction failed")
    cover = dedupe_by_support(Cover(tuple(members)))
    bad = cover.uncovered_point()
    if bad is not None:
        raise CertificateError(f"grid-ball preimages miss sample point {bad}")
    return cover


@dataclass(frozen=True, eq=False)
class StageState:
    """Record of one stage: inputs (t, f, delta) plus everything built.

    A fresh state carries only t, f and delta; running a stage fills the
    artifact fields and the successor data f_next, delta_next.
    """

    t: int
    f: np.ndarray
    delta: float
    pair_code: tuple[int, int] | None = None
    hyperplane: Hyperplane | None = None
    cover_u: Cover | None = None
    vertices: np.ndarray | None = None
    anchors: np.ndarray | None = None
    eta: float | None = None
    eta_prime: float | None = None
    f_next: np.ndarray | None = None
    delta_next: float | None = None
    contraction: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", _as_readonly(np.asarray(self.f, dtype=float)))
        if self.delta <= 0:
            raise InputError("stage scale must be positive")
        for name in ("vertices", "anchors", "f_next"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _as_readonly(np.asarray(val, dtype=float)))


@dataclass(frozen=True, eq=False)
class AvoidedHyperplane:
    """A handled hyperplane with the final map's clearances from it."""

    hyperplane: Hyperplane
    eta_prime: float
    distance_margin: float
    equation_margin: float


@dataclass(frozen=True, eq=False)
class EmbeddingResult:
    """Final map with all per-stage data needed for re-verification."""

    n: int
    seed: int
    delta0: float
    radii_depth: int
    f: np.ndarray
    stages: tuple[StageState, ...]
    avoided: tuple[AvoidedHyperplane, ...]
    injectivity_margin: float | None

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", _as_readonly(np.asarray(self.f, dtype=float)))

    @property
    def stage_count(self) -> int:
        return len(self.stages)


def _require_in_cube(points: np.ndarray, what: str) -> None:
    points = np.asarray(points, dtype=float)
    if (points < -CUBE_TOL).any() or (points > 1.0 + CUBE_TOL).any():
        idx = np.argwhere((points < -CUBE_TOL) | (points > 1.0 + CUBE_TOL))[0]
        raise CertificateError(f"{what} leaves the cube at index {tuple(int(v) for v in idx)}")


def _anchor_targets(plane: Hyperplane, n: int) -> np.ndarray:
    """n+1 spread-out points exactly on the hyperplane."""
    base = plane.base_point()
    free = plane.free_coords
    anchors = [base.copy()]
    for j in range(n):
        q = base.copy()
        q[free[j]] = 0.75
        anchors.append(q)
    return np.asarray(anchors)


def _stage_vertices(cover: Cover) -> list[int]:
    """Least-index sample point of each member."""
    picks = []
    for m in cover.members:
        sup = np.nonzero(m.values > 0.0)[0]
        picks.append(int(sup[0]))
    return picks


def embedding_stage(
    state: StageState,
    space: SampledSpace,
    balls: Sequence[Ball],
    n: int,
    oracle: Oracle = separator_oracle,
    seed: int = 0,
    pair: tuple[int, int] | None = None,
) -> StageState:
    """Run stage t, returning the fully populated stage record.

    ``pair`` defaults to the t-th strict-inclusion pair of ``balls``; the
    stage's hyperplane is the t-th of the fixed enumeration. Raises a
    certificate error naming the failing claim if any stage inequality
    fails.
    """
    t, f_t, delta = state.t, state.f, state.delta
    d = 2 * n + 1
    if f_t.shape[1] != d:
        raise InputError(f"map must land in dimension {d}")
    _require_in_cube(f_t, f"stage {t} map")
    if pair is None:
        all_pairs = stage_pairs(space, balls)
        if t >= len(all_pairs):
            raise InputError(f"ball enumeration has no stage-{t} pair; deepen it")
        pair = all_pairs[t]
    inner, outer = pair
    plane = enumerate_hyperplanes(n, t + 1)[t]

    cover_v = Cover(
        (ball_cozero(space, balls[outer]), complement_cozero(space, balls[inner]))
    )
    bad = cover_v.uncovered_point()
    if bad is not None:
        raise CertificateError(f"stage {t}: ball pair cover misses point {bad}")
    cover_w = ball_preimage_cover(space, f_t, delta)
    met = dedupe_by_support(drop_empty_members(meet(cover_v, cover_w)))

    reduced = drop_empty_members(reduce_order(space, met, n, oracle))
    starred, _ = star_refinement(reduced)
    starred = dedupe_by_support(drop_empty_members(starred))
    cover_u = drop_empty_members(reduce_order(space, starred, n, oracle))
    if order_of(cover_u) > n:
        raise CertificateError(f"stage {t}: cover order exceeds {n}")
    if not is_point_star_refinement(cover_u, met):
        raise CertificateError(f"stage {t}: output stars do not fit the met cover")

    picks = _stage_vertices(cover_u)
    s = cover_u.size
    targets = np.vstack([f_t[picks], _anchor_targets(plane, n)])
    constraints: list[AffineConstraint | None] = [None] * s + [
        AffineConstraint.on_hyperplane(row, plane) for row in targets[s:]
    ]
    placed = general_position(
        targets,
        eps=delta,
        constraints=constraints,
        box=(np.zeros(d), np.ones(d)),
        seed=(seed, t),
    )
    z, anchors = placed[:s], placed[s:]
    _require_in_cube(placed, f"stage {t} vertices")
    prox = np.linalg.norm(z - f_t[picks], axis=1)
    if (prox >= delta).any():
        raise CertificateError(f"stage {t}: a vertex strayed a full delta from its image")
    for row in anchors:
        if not plane.contains(row):
            raise CertificateError(f"stage {t}: an anchor left its hyperplane")

    kappa = kappa_map(cover_u, z)
    f_next = kappa.values
    _require_in_cube(f_next, f"stage {t} kappa image")
    contraction = float(np.linalg.norm(f_next - f_t, axis=1).max())
    if not contraction < 3.0 * delta:
        raise CertificateError(
            f"stage {t}: map moved {contraction:.3g}, not under {3 * delta:.3g}"
        )
    eta_t = eta(z, n)
    etap_t = eta_prime(z, plane, n)
    clearance = min(plane.distance_to_point(row) for row in f_next)
    if clearance < etap_t - HULL_TOL:
        raise CertificateError(
            f"stage {t}: image clearance {clearance:.3g} under eta' {etap_t:.3g}"
        )
    delta_next = min(delta, eta_t / 8.0, etap_t / 4.0) / 3.0
    return StageState(
        t=t,
        f=f_t,
        delta=delta,
        pair_code=(inner, outer),
        hyperplane=plane,
        cover_u=cover_u,
        vertices=z,
        anchors=anchors,
        eta=eta_t,
        eta_prime=etap_t,
        f_next=f_next,
        delta_next=delta_next,
        contraction=contraction,
    )


def initial_map(space: SampledSpace, n: int) -> np.ndarray:
    """Starting map into I^(2n+1).

    Coordinate inputs are normalized per axis into [0,1] and padded with
    constant 1/2 axes. Distance-only inputs get classical double-centering
    coordinates (eigencoordinates of -J D^2 J / 2) before the same
    normalization; eigenvector signs are fixed by making each coordinate's
    largest-magnitude entry positive.
    """
    d = 2 * n + 1
    p = space.size
    if space.coords is not None and space.coords.shape[1] <= d:
        raw = np.asarray(space.coords, dtype=float)
    else:
        dist2 = space.dist**2
        j = np.eye(p) - np.full((p, p), 1.0 / p)
        gram = -0.5 * j @ dist2 @ j
        vals, vecs = np.linalg.eigh(gram)
        order = np.argsort(vals)[::-1][: min(d, p)]
        vals = np.maximum(vals[order], 0.0)
        raw = vecs[:, order] * np.sqrt(vals)
        for c in range(raw.shape[1]):
            col = raw[:, c]
            if col[np.abs(col).argmax()] < 0:
                raw[:, c] = -col
    out = np.full((p, d), 0.5)
    for c in range(min(raw.shape[1], d)):
        col = raw[:, c]
        span = col.max() - col.min()
        if span > 0:
            out[:, c] = (col - col.min()) / span
    return out


def nobeling_embed(
    space: SampledSpace,
    n: int,
    T: int,
    oracle: Oracle = separator_oracle,
    seed: int = 0,
) -> EmbeddingResult:
    """Run T stages and assemble the certified result.

    Starting from :func:`initial_map` at scale delta_0 = 1/4, each stage
    handles one hyperplane and one ball pair. The result records, per
    handled hyperplane, the final map's worst Euclidean clearance (required
    above eta'_t/2) and worst single-equation clearance, plus the least
    pairwise image distance (required positive; None for one sample point).
    """
    if T < 1:
        raise InputError("need at least one stage")
    if space.size < 1:
        raise InputError("sample must be nonempty")
    if n < 0:
        raise InputError("n must be nonnegative")
    balls, pairs, depth = pair_schedule(space, T)
    state = StageState(t=0, f=initial_map(space, n), delta=DELTA0)
    stages: list[StageState] = []
    for t in range(T):
        done = embedding_stage(state, space, balls, n, oracle, seed, pair=pairs[t])
        stages.append(done)
        state = StageState(t=t + 1, f=done.f_next, delta=done.delta_next)
    f_final = stages[-1].f_next
    avoided = []
    for st in stages:
        dist_margin = min(st.hyperplane.distance_to_point(row) for row in f_final)
        eq_margin = min(st.hyperplane.equation_violation(row) for row in f_final)
        if not dist_margin > st.eta_prime / 2.0:
            raise CertificateError(
                f"final map within eta'/2 of the stage-{st.t} hyperplane "
                f"({dist_margin:.3g} vs {st.eta_prime / 2.0:.3g})"
            )
        avoided.append(
            AvoidedHyperplane(st.hyperplane, st.eta_prime, dist_margin, eq_margin)
        )
    if space.size > 1:
        diffs = f_final[:, None, :] - f_final[None, :, :]
        gaps = np.linalg.norm(diffs, axis=2)
        iu = np.triu_indices(space.size, k=1)
        margin = float(gaps[iu].min())
        if not margin > 0.0:
            flat = int(gaps[iu].argmin())
            x, y = iu[0][flat], iu[1][flat]
            raise CertificateError(f"final map merges sample points {x} and {y}")
        injectivity: float | None = margin
    else:
        injectivity = None
    return EmbeddingResult(
        n=n,
        seed=seed,
        delta0=DELTA0,
        radii_depth=depth,
        f=f_final,
        stages=tuple(stages),
        avoided=tuple(avoided),
        injectivity_margin=injectivity,
    )


# ---------------------------------------------------------------------------
# serialization

# +inf has no standard JSON form; optional-infinite fields travel as null.


def _num(x: float | None) -> float | None:
    if x is None or math.isinf(x):
        return None
    return float(x)


def _denum(x) -> float | None:
    return math.inf if x is None else float(x)


def stage_to_json_dict(st: StageState) -> dict:
    doc: dict = {
        "t": st.t,
        "delta": st.delta,
        "f": [[float(v) for v in row] for row in st.f],
    }
    if st.pair_code is not None:
        doc["pair_code"] = list(st.pair_code)
        doc["hyperplane"] = st.hyperplane.to_json_dict()
        doc["cover_u"] = st.cover_u.to_json_dict()
        doc["vertices"] = [[float(v) for v in row] for row in st.vertices]
        doc["anchors"] = [[float(v) for v in row] for row in st.anchors]
        doc["eta"] = _num(st.eta)
        doc["eta_prime"] = _num(st.eta_prime)
        doc["f_next"] = [[float(v) for v in row] for row in st.f_next]
        doc["delta_next"] = st.delta_next
        doc["contraction"] = st.contraction
    return doc


def stage_from_json_dict(doc: dict, sample_size: int) -> StageState:
    try:
        base = {
            "t": int(doc["t"]),
            "delta": float(doc["delta"]),
            "f": np.array(doc["f"], dtype=float),
        }
        if "pair_code" in doc:
            base.update(
                pair_code=tuple(int(v) for v in doc["pair_code"]),
                hyperplane=Hyperplane.from_json_dict(doc["hyperplane"]),
                cover_u=Cover.from_json_dict(doc["cover_u"], sample_size),
                vertices=np.array(doc["vertices"], dtype=float),
                anchors=np.array(doc["anchors"], dtype=float),
                eta=_denum(doc["eta"]),
                eta_prime=_denum(doc["eta_prime"]),
                f_next=np.array(doc["f_next"], dtype=float),
                delta_next=float(doc["delta_next"]),
                contraction=float(doc["contraction"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a stage document: {exc}") from exc
    return StageState(**base)


def result_to_json_dict(r: EmbeddingResult) -> dict:
    return {
        "n": r.n,
        "seed": r.seed,
        "delta0": r.delta0,
        "radii_depth": r.radii_depth,
        "f": [[float(v) for v in row] for row in r.f],
        "stages": [stage_to_json_dict(st) for st in r.stages],
        "avoided": [
            {
                "hyperplane": av.hyperplane.to_json_dict(),
                "eta_prime": _num(av.eta_prime),
                "distance_margin": av.distance_margin,
                "equation_margin": av.equation_margin,
            }
            for av in r.avoided
        ],
        "injectivity_margin": _num(r.injectivity_margin),
    }


def result_from_json_dict(doc: dict) -> EmbeddingResult:
    try:
        f = np.array(doc["f"], dtype=float)
        stages = tuple(stage_from_json_dict(sd, f.shape[0]) for sd in doc["stages"])
        avoided = tuple(
            AvoidedHyperplane(
                Hyperplane.from_json_dict(av["hyperplane"]),
                _denum(av["eta_prime"]),
                float(av["distance_margin"]),
                float(av["equation_margin"]),
            )
            for av in doc["avoided"]
        )
        return EmbeddingResult(
            n=int(doc["n"]),
            seed=int(doc["seed"]),
            delta0=float(doc["delta0"]),
            radii_depth=int(doc["radii_depth"]),
            f=f,
            stages=stages,
            avoided=avoided,
            injectivity_margin=(
                None
                if doc["injectivity_margin"] is None
                else float(doc["injectivity_margin"])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a result document: {exc}") from exc


def result_to_json_bytes(r: EmbeddingResult) -> bytes:
    return json.dumps(result_to_json_dict(r), separators=(",", ":"), allow_nan=False).encode(
        "utf-8"
    )


def result_from_json_bytes(data: bytes) -> EmbeddingResult:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"not a result document: {exc}") from exc
    return result_from_json_dict(doc)
