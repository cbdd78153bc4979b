"""Indexed open covers of a finite sample and their combinatorial calculus.

A cover is an indexed family of cozero functions (g_i)_{i<k} whose
positivity loci jointly cover the sample. The operations here are the
standard desk-scale cover tools:

order
    order(U) = max over sample points x of |{i : g_i(x) > 0}| - 1.

closed shrinking
    Rescale each member against its neighbours,

        gt_i(x) = g_i(x) / (g_i(x) + max({gp_s(x) : s < i} | {g_t(x) : i < t < k})),
        gp_i(x) = max(0, gt_i(x) - 1/2),

    with the empty max read as 0. Writing W_i = {gt_i > 1/2} (the open
    shrinking, the cozero set of gp_i) and F_i = {gt_i >= 1/2} (the closed
    shrinking), one gets W_i inside F_i inside U_i pointwise, and both
    (W_i) and (F_i) cover whenever the input does. Comparisons against 1/2
    are exact on the computed float values; a tie goes to F_i.

star refinement
    From the shrinking, form the two-member covers

        V_i = { complement of F_i, U_i },

    where the complement of F_i is realized exactly as the cozero set of
    max(0, 1/2 - gt_i). The meet of the open shrinking (W_l) with all the
    V_i is a cover whose member W_l * ... has star contained in U_l.

meet
    Pairwise pointwise minima of two covers, empty members dropped.

All operations are pure: inputs are immutable and outputs are fresh.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .metric import CozeroFunction, _as_readonly


@dataclass(frozen=True, eq=False)
class Cover:
    """An indexed family of cozero functions over one sample.

    The covering property (every point has a positive member) is an
    invariant of covers-as-used; operations that rely on it check it and
    raise, naming an uncovered point, rather than assuming it.
    """

    members: tuple[CozeroFunction, ...]

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise InputError("a cover needs at least one member")
        sizes = {m.values.shape[0] for m in members}
        if len(sizes) != 1:
            raise InputError("cover members disagree on the sample size")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "_matrix", _as_readonly(np.vstack([m.values for m in members])))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Cover":
        return cls(tuple(CozeroFunction(row) for row in np.asarray(matrix, dtype=float)))

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix  # type: ignore[attr-defined]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def sample_size(self) -> int:
        return self.matrix.shape[1]

    def supports(self) -> np.ndarray:
        """Boolean (k, p) matrix of member positivity."""
        return self.matrix > 0.0

    def uncovered_point(self) -> int | None:
        covered = self.supports().any(axis=0)
        if covered.all():
            return None
        return int(np.nonzero(~covered)[0][0])

    def is_covering(self) -> bool:
        return self.uncovered_point() is None

    def to_json_dict(self) -> dict:
        return {"members": [{"values": m.to_sparse_dict()} for m in self.members]}

    @classmethod
    def from_json_dict(cls, obj: dict, sample_size: int) -> "Cover":
        if not isinstance(obj, dict) or "members" not in obj:
            raise InputError("cover document must be an object with a members list")
        members = []
        for entry in obj["members"]:
            if not isinstance(entry, dict) or "values" not in entry:
                raise InputError("each cover member must be an object with values")
            members.append(CozeroFunction.from_sparse_dict(entry["values"], sample_size))
        return cls(tuple(members))


@dataclass(frozen=True, eq=False)
class ShrinkResult:
    """Output of :func:`closed_shrinking`.

    ``open_shrink`` carries the functions gp_i (cozero sets W_i),
    ``closed_shrink`` the point sets F_i, and ``tilde`` the rescaled
    functions gt_i that define both.
    """

    open_shrink: Cover
    closed_shrink: tuple[frozenset[int], ...]
    tilde: tuple[CozeroFunction, ...]


def _require_covering(c: Cover) -> None:
    bad = c.uncovered_point()
    if bad is not None:
        raise InputError(f"cover does not cover the sample: point {bad} uncovered")


def order_of(c: Cover) -> int:
    """Largest n such that some n+1 members share a point, i.e. max multiplicity - 1."""
    _require_covering(c)
    return int(c.supports().sum(axis=0).max()) - 1


def is_refinement(v: Cover, u: Cover) -> tuple[bool, tuple[int, ...] | None]:
    """Whether every member of ``v`` sits inside some member of ``u``.

    On success the witness maps each index j of ``v`` to the least index i
    with support(v_j) inside support(u_i). Empty members of ``v`` refine
    everything and map to index 0.
    """
    vs = v.supports()
    us = u.supports()
    # containment[j, i] is true when v_j subset u_i on the sample
    containment = ~(vs[:, None, :] & ~us[None, :, :]).any(axis=2)
    ok = containment.any(axis=1)
    if not ok.all():
        return False, None
    return True, tuple(int(containment[j].argmax()) for j in range(v.size))


def closed_shrinking(c: Cover) -> ShrinkResult:
    """Simultaneous open/closed shrinking of a covering family.

    See the module docstring for the formulas. Raises when the input does
    not cover, naming an uncovered point; on covering input the rescaled
    denominators are provably positive everywhere.
    """
    _require_covering(c)
    g = c.matrix
    k, p = g.shape
    # suffix_max[i] = max over t > i of g_t, with the empty max equal to 0
    suffix_max = np.zeros((k, p))
    for i in range(k - 2, -1, -1):
        suffix_max[i] = np.maximum(suffix_max[i + 1], g[i + 1])
    gt = np.zeros((k, p))
    gp = np.zeros((k, p))
    prefix_gp = np.zeros(p)
    for i in range(k):
        denom = g[i] + np.maximum(prefix_gp, suffix_max[i])
        if (denom <= 0.0).any():
            x = int(np.nonzero(denom <= 0.0)[0][0])
            raise InputError(f"cover does not cover the sample: point {x} uncovered")
        gt[i] = g[i] / denom
        gp[i] = np.maximum(0.0, gt[i] - 0.5)
        prefix_gp = np.maximum(prefix_gp, gp[i])
    closed = tuple(
        frozenset(int(x) for x in np.nonzero(gt[i] >= 0.5)[0]) for i in range(k)
    )
    return ShrinkResult(
        open_shrink=Cover.from_matrix(gp),
        closed_shrink=closed,
        tilde=tuple(CozeroFunction(row) for row in gt),
    )


def star(s: Iterable[int] | frozenset[int], c: Cover) -> frozenset[int]:
    """Union of the members of ``c`` that meet the point set ``s``."""
    pts = sorted({int(i) for i in s})
    sup = c.supports()
    if pts and (min(pts) < 0 or max(pts) >= c.sample_size):
        raise InputError(f"unknown point identifier in star argument: {pts!r}")
    if not pts:
        return frozenset()
    meets = sup[:, pts].any(axis=1)
    if not meets.any():
        return frozenset()
    return frozenset(int(x) for x in np.nonzero(sup[meets].any(axis=0))[0])


def star_of_member(i: int, c: Cover) -> frozenset[int]:
    if not 0 <= i < c.size:
        raise InputError(f"cover has no member {i}")
    return star(c.members[i].support(), c)


def meet(a: Cover, b: Cover) -> Cover:
    """Pairwise pointwise-minimum cover, nonempty members only, a-major order."""
    if a.sample_size != b.sample_size:
        raise InputError("covers live over different samples")
    members = []
    for ua in a.members:
        low = np.minimum(ua.values[None, :], b.matrix)
        for row in low:
            if (row > 0.0).any():
                members.append(CozeroFunction(row))
    if not members:
        raise InputError("meet produced no nonempty member; inputs do not overlap")
    return Cover(tuple(members))


def star_refinement(c: Cover) -> tuple[Cover, tuple[int, ...]]:
    """A cover refining ``c`` whose member stars land in single members of ``c``.

    The construction follows the shrinking route described in the module
    docstring. Only nonempty members are materialized: a member is the meet
    of one open-shrinking member W_l with one choice, per index i, of either
    U_i or the complement of F_i, and the nonempty choices are found by
    scanning sample points. Members are ordered by (l, choice vector) with
    the complement choice sorting before U_i. The witness maps each output
    member to its l; the star of that member is contained in U_l.
    """
    _require_covering(c)
    shrink = closed_shrinking(c)
    g = c.matrix
    gp = shrink.open_shrink.matrix
    gt = np.vstack([t.values for t in shrink.tilde])
    k, p = g.shape
    comp = np.maximum(0.0, 0.5 - gt)  # exact complement of F_i on the sample

    signatures: set[tuple[int, tuple[int, ...]]] = set()
    for x in range(p):
        ls = np.nonzero(gp[:, x] > 0.0)[0]
        if ls.size == 0:
            # cannot happen on covering input: the open shrinking covers
            raise InputError(f"open shrinking misses point {x}")
        options = []
        for i in range(k):
            opts = []
            if comp[i, x] > 0.0:
                opts.append(0)
            if g[i, x] > 0.0:
                opts.append(1)
            options.append(opts)
        for l in ls:
            for choice in product(*options):
                signatures.add((int(l), choice))

    members = []
    witness = []
    for l, choice in sorted(signatures):
        stack = [gp[l]]
        for i, pick in enumerate(choice):
            stack.append(g[i] if pick == 1 else comp[i])
        member = np.min(np.vstack(stack), axis=0)
        if (member > 0.0).any():
            members.append(CozeroFunction(member))
            witness.append(l)
    return Cover(tuple(members)), tuple(witness)


def is_point_star_refinement(v: Cover, u: Cover) -> bool:
    """Whether the star of every point of ``v`` lies in one member of ``u``."""
    us = u.supports()
    for x in range(v.sample_size):
        st = star([x], v)
        if not st:
            continue  # a point no member touches has an empty, vacuous star
        pts = sorted(st)
        inside = us[:, pts].all(axis=1)
        if not inside.any():
            return False
    return True


def drop_empty_members(c: Cover) -> Cover:
    """The subfamily of nonempty members, in the original order."""
    kept = [m for m in c.members if not m.is_empty()]
    if not kept:
        raise InputError("cover has no nonempty member")
    return Cover(tuple(kept))


def dedupe_by_support(c: Cover) -> Cover:
    """Keep the first member for each distinct support, preserving order.

    A subfamily with the same supports covers the same points, refines the
    same covers and star-refines whatever the full family star-refines, so
    this is a safe normalization between pipeline steps.
    """
    seen: set[frozenset[int]] = set()
    kept = []
    for m in c.members:
        s = m.support()
        if s not in seen:
            seen.add(s)
            kept.append(m)
    return Cover(tuple(kept))
