"""Re-verification of embedding results and open-image certificates.

Everything here recomputes from raw stage data; stored margins and
booleans are treated as claims to be checked, never as evidence. Each
failing check carries a location (stage, point, or pair) sufficient to
reproduce it in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .covers import Cover, dedupe_by_support, drop_empty_members, is_point_star_refinement, meet, order_of
from .embedding import (
    CUBE_TOL,
    HULL_TOL,
    RANK_TOL,
    EmbeddingResult,
    StageState,
    ball_preimage_cover,
    enumerate_hyperplanes,
    eta,
    eta_prime,
    kappa_map,
    stage_pairs,
    _stage_vertices,
)
from .errors import CertificateError, GeneralPositionError, InputError
from .metric import (
    Ball,
    SampledSpace,
    ball_cozero,
    complement_cozero,
    enumerate_balls,
    formally_included,
)


@dataclass(frozen=True)
class CertificateCheck:
    """One verified claim: signed margin, negative means violated."""

    name: str
    passed: bool
    margin: float
    location: str


@dataclass(frozen=True)
class CertificateReport:
    checks: tuple[CertificateCheck, ...]

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CertificateCheck]:
        return [c for c in self.checks if not c.passed]

    def to_json_dict(self) -> dict:
        return {
            "overall": self.overall,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "margin": None if math.isinf(c.margin) else c.margin,
                    "location": c.location,
                }
                for c in self.checks
            ],
        }


def _cube_excess(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    return float(max(0.0, (-points).max(initial=0.0), (points - 1.0).max(initial=0.0)))


def _min_subset_sigma(points: np.ndarray, max_size: int) -> tuple[float, tuple[int, ...]]:
    """Smallest singular value over all difference systems of subsets."""
    k = len(points)
    best = math.inf
    best_sub: tuple[int, ...] = ()
    for s in range(2, min(k, max_size) + 1):
        subs = list(combinations(range(k), s))
        base = points[[c[0] for c in subs]]
        rest = points[np.array(subs)[:, 1:]]
        sigma = np.linalg.svd(rest - base[:, None, :], compute_uv=False).min(axis=1)
        i = int(sigma.argmin())
        if sigma[i] < best:
            best = float(sigma[i])
            best_sub = subs[i]
    return best, best_sub


def _stage_meet(space: SampledSpace, st: StageState, balls: Sequence[Ball]) -> tuple[Cover, Cover]:
    inner, outer = st.pair_code
    cover_v = Cover(
        (ball_cozero(space, balls[outer]), complement_cozero(space, balls[inner]))
    )
    cover_w = ball_preimage_cover(space, st.f, st.delta)
    return cover_v, dedupe_by_support(drop_empty_members(meet(cover_v, cover_w)))


def verify_result(r: EmbeddingResult, space: SampledSpace, n: int) -> CertificateReport:
    """Recheck every stage and final invariant of an embedding result.

    Raises on malformed input (wrong n, missing stage artifacts); returns
    a report whose checks, in deterministic order, cover the stage chain,
    ball-pair and hyperplane schedules, cover properties, vertex placement
    and general position, the kappa recomputation, the delta schedule, the
    contraction and clearance bounds, the small-ball (V-mapping) property
    of the final map, hyperplane avoidance, and injectivity.
    """
    if r.n != n:
        raise InputError(f"result was built for n={r.n}, not n={n}")
    if not r.stages:
        raise InputError("result has no stages")
    for st in r.stages:
        if st.pair_code is None or st.cover_u is None or st.f_next is None:
            raise InputError(f"stage {st.t} record is incomplete")
    if r.f.shape != (space.size, 2 * n + 1):
        raise InputError("final map shape does not match the sample")
    d = 2 * n + 1
    balls = enumerate_balls(space, r.radii_depth)
    pairs = stage_pairs(space, balls)
    planes = enumerate_hyperplanes(n, len(r.stages))
    checks: list[CertificateCheck] = []

    def add(name: str, passed: bool, margin: float, location: str) -> None:
        checks.append(CertificateCheck(name, bool(passed), float(margin), location))

    prev: StageState | None = None
    for st in r.stages:
        loc = f"stage {st.t}"
        if prev is not None:
            ok = bool(np.array_equal(prev.f_next, st.f)) and prev.delta_next == st.delta
            add("chain", ok, 0.0 if ok else -1.0, loc)
        ok = st.t < len(pairs) and tuple(st.pair_code) == pairs[st.t]
        add("pair-schedule", ok, 0.0 if ok else -1.0, loc)
        ok = st.hyperplane == planes[st.t]
        add("hyperplane-schedule", ok, 0.0 if ok else -1.0, loc)

        excess = max(
            _cube_excess(st.f),
            _cube_excess(st.f_next),
            _cube_excess(st.vertices),
            _cube_excess(st.anchors),
        )
        add("in-cube", excess <= CUBE_TOL, CUBE_TOL - excess, loc)

        bad = st.cover_u.uncovered_point()
        add("covering", bad is None, 0.0 if bad is None else -1.0,
            loc if bad is None else f"{loc}, point {bad}")
        if bad is None:
            add("order", order_of(st.cover_u) <= n, float(n - order_of(st.cover_u)), loc)
        else:
            add("order", False, -1.0, loc)
        cover_v, met = _stage_meet(space, st, balls)
        ok = is_point_star_refinement(st.cover_u, met)
        add("star-refinement", ok, 0.0 if ok else -1.0, loc)

        picks = _stage_vertices(st.cover_u)
        if st.vertices.shape[0] != st.cover_u.size:
            raise InputError(f"stage {st.t} has {st.vertices.shape[0]} vertices "
                             f"for {st.cover_u.size} members")
        prox = float(np.linalg.norm(st.vertices - st.f[picks], axis=1).max())
        add("vertex-proximity", prox < st.delta, st.delta - prox, loc)
        anchor_err = max(
            st.hyperplane.equation_violation(row) for row in st.anchors
        ) if len(st.anchors) else 0.0
        add("anchors-on-plane", anchor_err == 0.0, -anchor_err, loc)

        sigma, subset = _min_subset_sigma(np.vstack([st.vertices, st.anchors]), d + 1)
        add("general-position", sigma > RANK_TOL, sigma - RANK_TOL,
            f"{loc}, subset {subset}" if sigma <= RANK_TOL else loc)

        kap = kappa_map(st.cover_u, st.vertices)
        kdiff = float(np.abs(kap.values - st.f_next).max())
        add("kappa-values", kdiff <= CUBE_TOL, CUBE_TOL - kdiff, loc)
        wsum = float(np.abs(kap.weights.sum(axis=1) - 1.0).max())
        wneg = float((-kap.weights).max())
        add("kappa-weights", wsum <= 1e-12 and wneg <= 0.0,
            1e-12 - max(wsum, wneg), loc)

        try:
            eta_re = eta(st.vertices, n)
            etap_re = eta_prime(st.vertices, st.hyperplane, n)
            add("eta", eta_re == st.eta, -abs(eta_re - st.eta), loc)
            add("eta-prime", etap_re == st.eta_prime, -abs(etap_re - st.eta_prime), loc)
        except GeneralPositionError:
            add("eta", False, -1.0, loc)
            add("eta-prime", False, -1.0, loc)

        want = min(st.delta, st.eta / 8.0, st.eta_prime / 4.0) / 3.0
        ok = st.delta_next == want and st.delta_next <= st.delta / 3.0
        add("delta-schedule", ok, st.delta / 3.0 - st.delta_next, loc)

        contraction = float(np.linalg.norm(st.f_next - st.f, axis=1).max())
        add("contraction", contraction < 3.0 * st.delta and contraction == st.contraction,
            3.0 * st.delta - contraction, loc)
        clearance = min(st.hyperplane.distance_to_point(row) for row in st.f_next)
        add("stage-clearance", clearance >= st.eta_prime - HULL_TOL,
            clearance - st.eta_prime, loc)

        # small image balls pull back into one member of the stage pair cover
        vm_margin = math.inf
        vm_loc = loc
        vm_ok = True
        supports = cover_v.supports()
        for x in range(space.size):
            pre = np.linalg.norm(r.f - r.f[x], axis=1) < st.eta / 4.0
            inside = supports[:, pre].all(axis=1)
            if not inside.any():
                vm_ok = False
                vm_loc = f"{loc}, point {x}"
                vm_margin = 0.0
                break
            best = max(
                float(cover_v.matrix[i, pre].min()) for i in np.nonzero(inside)[0]
            )
            vm_margin = min(vm_margin, best)
        add("v-mapping", vm_ok, vm_margin if vm_ok else 0.0, vm_loc)
        prev = st

    ok = bool(np.array_equal(r.stages[-1].f_next, r.f))
    add("final-chain", ok, 0.0 if ok else -1.0, f"stage {r.stages[-1].t}")

    if len(r.avoided) != len(r.stages):
        raise InputError("result must record one avoided hyperplane per stage")
    for st, av in zip(r.stages, r.avoided):
        loc = f"stage {st.t}"
        ok = av.hyperplane == st.hyperplane
        add("avoided-schedule", ok, 0.0 if ok else -1.0, loc)
        dists = [av.hyperplane.distance_to_point(row) for row in r.f]
        worst = int(np.argmin(dists))
        margin = float(dists[worst]) - st.eta_prime / 2.0
        add("line-avoiding", margin > 0.0 and float(dists[worst]) == av.distance_margin,
            margin, f"{loc}, point {worst}")
        eqs = [av.hyperplane.equation_violation(row) for row in r.f]
        eq_worst = int(np.argmin(eqs))
        add("equation-margin",
            float(eqs[eq_worst]) > 0.0 and float(eqs[eq_worst]) == av.equation_margin,
            float(eqs[eq_worst]), f"{loc}, point {eq_worst}")

    if space.size > 1:
        diffs = np.linalg.norm(r.f[:, None, :] - r.f[None, :, :], axis=2)
        iu = np.triu_indices(space.size, k=1)
        flat = int(diffs[iu].argmin())
        x, y = int(iu[0][flat]), int(iu[1][flat])
        margin = float(diffs[iu].min())
        stored_ok = r.injectivity_margin == margin
        add("injectivity", margin > 0.0 and stored_ok, margin, f"points ({x},{y})")
    else:
        add("injectivity", r.injectivity_margin is None
            or math.isinf(r.injectivity_margin), math.inf, "single point")
    return CertificateReport(tuple(checks))


def verify_nobeling_membership(r: EmbeddingResult, T: int | None = None) -> CertificateReport:
    """Check every image point clears every handled hyperplane's equations.

    For each avoided hyperplane, every point must violate at least one of
    its defining equations, by at least the recorded per-plane margin.
    """
    count = len(r.avoided) if T is None else min(T, len(r.avoided))
    checks: list[CertificateCheck] = []
    for t in range(count):
        av = r.avoided[t]
        eqs = [av.hyperplane.equation_violation(row) for row in r.f]
        worst = int(np.argmin(eqs))
        margin = float(eqs[worst])
        passed = margin > 0.0 and margin >= av.equation_margin
        checks.append(
            CertificateCheck(
                "rational-avoidance", passed, margin, f"stage {t}, point {worst}"
            )
        )
    return CertificateReport(tuple(checks))


def _resolve_ball_indices(
    u: Sequence, balls: Sequence[Ball], space: SampledSpace
) -> list[int]:
    indices = []
    for item in u:
        if isinstance(item, (int, np.integer)):
            if not 0 <= int(item) < len(balls):
                raise InputError(f"ball index {int(item)} outside the enumeration")
            indices.append(int(item))
            continue
        if isinstance(item, Ball):
            for i, b in enumerate(balls):
                if b.radius == item.radius and (
                    isinstance(b.center, (int, np.integer))
                    and isinstance(item.center, (int, np.integer))
                    and int(b.center) == int(item.center)
                ):
                    indices.append(i)
                    break
            else:
                raise InputError("ball is not part of the enumerated list")
            continue
        raise InputError("open sets must be given as enumerated ball indices")
    return indices


def open_image_certificate(
    r: EmbeddingResult,
    u: Sequence,
    balls: Sequence[Ball],
    space: SampledSpace,
) -> list[Ball]:
    """Image-side balls whose union equals f[u] on the sample.

    ``u`` is a union of enumerated balls (by index or Ball). Candidates
    come from stages whose outer ball is a component of u: grid points
    within eta_t/4 of a sample image, radius eta_t/4. A candidate is kept
    iff some enumerated ball with nonempty sample support maps entirely
    into it and is formally included in the stage's inner ball; the
    stage-pair property then pins the candidate's whole preimage inside
    the outer component. The kept list is verified extensionally: the
    sample points of u must be exactly those mapped into the union.
    """
    comp = _resolve_ball_indices(u, balls, space)
    if not comp:
        return []
    in_u = np.zeros(space.size, dtype=bool)
    for e in comp:
        in_u |= ball_cozero(space, balls[e]).values > 0.0

    ball_supports = []
    for b in balls:
        ball_supports.append(space.distances_from(b.center) < b.radius)

    f = r.f
    d = f.shape[1]
    kept: list[Ball] = []
    seen: set[tuple] = set()
    for st in r.stages:
        inner, outer = st.pair_code
        if outer not in comp:
            continue
        rho = st.eta / 4.0
        if math.isinf(rho):
            continue
        included = [
            k
            for k, b in enumerate(balls)
            if ball_supports[k].any() and formally_included(b, balls[inner], space)
        ]
        if not included:
            continue
        m = max(1, math.ceil(8.0 * math.sqrt(d) / st.eta))
        cells: set[tuple[int, ...]] = set()
        for row in f:
            axes = []
            for c in row:
                lo = max(0, math.floor((c - rho) * m))
                hi = min(m, math.ceil((c + rho) * m))
                axes.append(range(lo, hi + 1))
            cells.update(product(*axes))
        for cell in sorted(cells):
            y = np.array(cell, dtype=float) / m
            pre = np.linalg.norm(f - y, axis=1) < rho
            if not pre.any():
                continue
            if any((ball_supports[k] & ~pre).sum() == 0 for k in included):
                key = (cell, rho)
                if key not in seen:
                    seen.add(key)
                    kept.append(Ball(center=y, radius=rho))

    covered = np.zeros(space.size, dtype=bool)
    for j in kept:
        covered |= np.linalg.norm(f - np.asarray(j.center), axis=1) < j.radius
    for x in range(space.size):
        if in_u[x] and not covered[x]:
            raise CertificateError(
                f"image of point {x} is not certified open (no kept ball reaches it)"
            )
        if covered[x] and not in_u[x]:
            raise CertificateError(
                f"kept balls leak outside the open set at point {x}"
            )
    return kept
