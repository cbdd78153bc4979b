"""Order reduction for covers via inessentiality witnesses.

The central fact used here: if every family of n+1 disjoint closed pairs
(A_i, B_i) admits disjoint open (U_i, V_i) with A_i in U_i, B_i in V_i and
the union of all U_i, V_i covering, then any covering family of n+2 cozero
sets can be shrunk to one with empty total intersection, and any covering
family at all can be shrunk to one of order at most n by sweeping all
(n+2)-element index subsets.

Witness suppliers ("oracles") are callables (space, pairs) -> witness. Two
are provided: :func:`separator_oracle`, which splits each pair by nearest
distance and works on every finite sample, and
:func:`inessential_witness_from_map`, which reads a witness off a supplied
map into the boundary of the (n+1)-cube.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .covers import Cover, closed_shrinking
from .errors import CertificateError, InputError
from .metric import CozeroFunction, SampledSpace

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class DisjointPairFamily:
    """Indexed disjoint pairs (A_i, B_i) of closed point sets."""

    pairs: tuple[tuple[frozenset[int], frozenset[int]], ...]

    def __post_init__(self) -> None:
        pairs = tuple((frozenset(a), frozenset(b)) for a, b in self.pairs)
        for i, (a, b) in enumerate(pairs):
            if a & b:
                raise InputError(f"pair {i} is not disjoint: {sorted(a & b)} shared")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True, eq=False)
class InessentialWitness:
    """Disjoint open pairs (U_i, V_i) separating a DisjointPairFamily.

    Invariants (checked by :meth:`validate`): cozero(U_i) and cozero(V_i)
    are disjoint for each i, A_i lies in cozero(U_i), B_i in cozero(V_i),
    and the union of all the cozero sets is the whole sample.
    """

    opens: tuple[tuple[CozeroFunction, CozeroFunction], ...]

    def validate(self, pairs: DisjointPairFamily, sample_size: int) -> None:
        if len(self.opens) != len(pairs):
            raise InputError(
                f"witness has {len(self.opens)} pairs, family has {len(pairs)}"
            )
        union = np.zeros(sample_size, dtype=bool)
        for i, ((u, v), (a, b)) in enumerate(zip(self.opens, pairs.pairs)):
            u_sup = u.values > 0.0
            v_sup = v.values > 0.0
            if (u_sup & v_sup).any():
                x = int(np.nonzero(u_sup & v_sup)[0][0])
                raise InputError(f"witness pair {i} overlaps at point {x}")
            for x in a:
                if not u_sup[x]:
                    raise InputError(f"witness pair {i} misses A point {x}")
            for x in b:
                if not v_sup[x]:
                    raise InputError(f"witness pair {i} misses B point {x}")
            union |= u_sup | v_sup
        if not union.all():
            x = int(np.nonzero(~union)[0][0])
            raise InputError(f"witness does not cover the sample: point {x}")


Oracle = Callable[[SampledSpace, DisjointPairFamily], InessentialWitness]


def separator_oracle(
    space: SampledSpace, pairs: DisjointPairFamily, tol: float = BOUNDARY_TOL
) -> InessentialWitness:
    """Nearest-set separator: U_i = {d(x, A_i) < d(x, B_i)}, V_i the reverse.

    Ties go to U_i with value ``tol``; the distance to an empty set is
    +infinity, so an empty A_i yields U_i empty and V_i the whole sample.
    Every finite metric sample admits this witness for any number of pairs.
    """
    p = space.size
    opens = []
    for a, b in pairs.pairs:
        da = space.dist[:, sorted(a)].min(axis=1) if a else np.full(p, np.inf)
        db = space.dist[:, sorted(b)].min(axis=1) if b else np.full(p, np.inf)
        u = np.zeros(p)
        v = np.zeros(p)
        less = da < db
        greater = da > db
        tie = ~less & ~greater
        u[less] = np.minimum(1.0, db[less] - da[less])
        u[tie] = tol
        v[greater] = np.minimum(1.0, da[greater] - db[greater])
        opens.append((CozeroFunction(u), CozeroFunction(v)))
    witness = InessentialWitness(tuple(opens))
    witness.validate(pairs, p)
    return witness


def inessential_witness_from_map(
    g: np.ndarray, pairs: DisjointPairFamily, tol: float = BOUNDARY_TOL
) -> InessentialWitness:
    """Witness read off a map g into the boundary of the (n+1)-cube.

    ``g`` is one row per sample point and one column per pair. Required,
    up to ``tol``: every row touches {0, 1} in some coordinate, column i
    vanishes on A_i and equals 1 on B_i. The witness pairs are the ramps

        U_i = max(0, 1/2 - g_i),   V_i = max(0, g_i - 1/2).
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2:
        raise InputError("boundary map must be a 2-d array")
    p, width = g.shape
    if width != len(pairs):
        raise InputError(f"boundary map has {width} coordinates, family has {len(pairs)}")
    if (g < -tol).any() or (g > 1.0 + tol).any():
        x, i = np.argwhere((g < -tol) | (g > 1.0 + tol))[0]
        raise InputError(f"map value outside the cube at point {x}, coordinate {i}")
    on_boundary = (np.abs(g) <= tol) | (np.abs(1.0 - g) <= tol)
    if not on_boundary.any(axis=1).all():
        x = int(np.nonzero(~on_boundary.any(axis=1))[0][0])
        raise InputError(f"point {x} does not land on the cube boundary")
    for i, (a, b) in enumerate(pairs.pairs):
        for x in a:
            if abs(g[x, i]) > tol:
                raise InputError(f"map is not 0 on A at point {x}, coordinate {i}")
        for x in b:
            if abs(1.0 - g[x, i]) > tol:
                raise InputError(f"map is not 1 on B at point {x}, coordinate {i}")
    clipped = np.clip(g, 0.0, 1.0)
    opens = tuple(
        (
            CozeroFunction(np.maximum(0.0, 0.5 - clipped[:, i])),
            CozeroFunction(np.maximum(0.0, clipped[:, i] - 0.5)),
        )
        for i in range(width)
    )
    witness = InessentialWitness(opens)
    witness.validate(pairs, p)
    return witness


def map_oracle(g: np.ndarray) -> Oracle:
    """Wrap a fixed boundary map as an oracle; it validates per call."""

    def oracle(space: SampledSpace, pairs: DisjointPairFamily) -> InessentialWitness:
        return inessential_witness_from_map(g, pairs)

    return oracle


def shrink_to_empty_intersection(
    space: SampledSpace, cover: Cover, oracle: Oracle
) -> Cover:
    """Shrink an (n+2)-member covering family to empty total intersection.

    The closed shrinking supplies disjoint closed pairs (F_i, complement of
    U_i) for i < n+1; the oracle separates them with opens (U'_i, V'_i).
    The output members are

        W_i = U'_i * U_i (i < n+1),
        W_last = U_last * (V_0 + ... + V_n),

    where V_i = V'_i * (complement of F_i). The result covers, refines the
    input member by member, and has empty total intersection.
    """
    k = cover.size
    if k < 2:
        raise InputError("need at least two members to shrink an intersection away")
    bad = cover.uncovered_point()
    if bad is not None:
        raise InputError(f"cover does not cover the sample: point {bad} uncovered")
    g = cover.matrix
    shrink = closed_shrinking(cover)
    gt = np.vstack([t.values for t in shrink.tilde])
    comp_f = np.maximum(0.0, 0.5 - gt)
    all_points = frozenset(range(cover.sample_size))
    pairs = DisjointPairFamily(
        tuple(
            (shrink.closed_shrink[i], all_points - cover.members[i].support())
            for i in range(k - 1)
        )
    )
    witness = oracle(space, pairs)
    witness.validate(pairs, cover.sample_size)

    new_rows = []
    v_rows = []
    for i in range(k - 1):
        u_prime, v_prime = witness.opens[i]
        new_rows.append(np.minimum(u_prime.values, g[i]))
        v_rows.append(np.minimum(v_prime.values, comp_f[i]))
    last = np.minimum(g[k - 1], np.max(np.vstack(v_rows), axis=0))
    new_rows.append(last)
    out = Cover.from_matrix(np.vstack(new_rows))

    bad = out.uncovered_point()
    if bad is not None:
        raise CertificateError(f"shrinking lost covering at point {bad}")
    common = out.supports().all(axis=0)
    if common.any():
        x = int(np.nonzero(common)[0][0])
        raise CertificateError(f"total intersection still contains point {x}")
    return out


def reduce_order(
    space: SampledSpace,
    cover: Cover,
    n: int,
    oracle: Oracle,
    trace: list | None = None,
) -> Cover:
    """Shrink a covering family to order at most n.

    Sweeps the (n+2)-element index subsets D_e in lexicographic order. For
    each, the members indexed by D_e are shrunk to empty intersection (the
    remaining members are lumped into the last D_e member so that the
    auxiliary family covers, then the shrunk members are intersected back),
    and the whole cover is replaced by its open shrinking. Subsets whose
    members already fail to intersect are skipped; every step only shrinks
    members, so earlier empty intersections persist and the final cover has
    order at most n. Pass ``trace`` to record each sweep step.
    """
    if not (isinstance(n, int) and n >= 0):
        raise InputError("target order must be an integer >= 0")
    bad = cover.uncovered_point()
    if bad is not None:
        raise InputError(f"cover does not cover the sample: point {bad} uncovered")
    s = cover.size
    if s < n + 2:
        return cover
    g = cover.matrix.copy()
    for subset in combinations(range(s), n + 2):
        live = (g[list(subset)] > 0.0).all(axis=0)
        if not live.any():
            if trace is not None:
                trace.append({"subset": subset, "changed": False, "matrix": g.copy()})
            continue
        rest = [j for j in range(s) if j not in subset]
        aux_rows = [g[d] for d in subset[:-1]]
        lump = g[subset[-1]]
        if rest:
            lump = np.maximum(lump, np.max(g[rest], axis=0))
        aux_rows.append(lump)
        shrunk = shrink_to_empty_intersection(space, Cover.from_matrix(np.vstack(aux_rows)), oracle)
        for m, d in enumerate(subset[:-1]):
            g[d] = shrunk.matrix[m]
        g[subset[-1]] = np.minimum(shrunk.matrix[-1], g[subset[-1]])
        # interleave: keep the open shrinking of the whole updated family
        g = closed_shrinking(Cover.from_matrix(g)).open_shrink.matrix.copy()
        if trace is not None:
            trace.append({"subset": subset, "changed": True, "matrix": g.copy()})
    out = Cover.from_matrix(g)
    bad = out.uncovered_point()
    if bad is not None:
        raise CertificateError(f"order reduction lost covering at point {bad}")
    counts = out.supports().sum(axis=0)
    if counts.max() > n + 1:
        x = int(counts.argmax())
        raise CertificateError(f"order reduction left point {x} in {int(counts[x])} members")
    return out
