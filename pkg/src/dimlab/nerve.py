"""Nerve complexes of covers.

The nerve has one vertex per cover member and a simplex for every index
set whose members share a sample point. Its dimension therefore equals
the order of the cover; tests lean on that identity, so the construction
here stays exhaustive and obviously correct rather than clever.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .covers import Cover
from .errors import InputError
from .metric import _as_readonly


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """Abstract simplicial complex on vertices 0..vertex_count-1.

    ``simplices`` holds every nonempty face (downward closure is part of
    the data, not reconstructed). ``realization`` optionally places each
    vertex in an ambient space, one row per vertex.
    """

    vertex_count: int
    simplices: frozenset[frozenset[int]]
    realization: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.vertex_count < 0:
            raise InputError("vertex count must be nonnegative")
        faces = frozenset(frozenset(s) for s in self.simplices)
        for s in faces:
            if not s:
                raise InputError("the empty face is not stored")
            if min(s) < 0 or max(s) >= self.vertex_count:
                raise InputError(f"face {sorted(s)} uses vertices outside range")
            for v in s:
                if s - {v} and s - {v} not in faces:
                    raise InputError(f"face {sorted(s)} is missing a boundary face")
            if len(s) > 1 and not all(frozenset([v]) in faces for v in s):
                raise InputError(f"face {sorted(s)} has an unlisted vertex")
        object.__setattr__(self, "simplices", faces)
        if self.realization is not None:
            r = _as_readonly(np.atleast_2d(np.asarray(self.realization, dtype=float)))
            if r.shape[0] != self.vertex_count:
                raise InputError("realization must place every vertex")
            object.__setattr__(self, "realization", r)

    @property
    def dim(self) -> int:
        """Dimension: largest face size minus one; -1 when empty."""
        if not self.simplices:
            return -1
        return max(len(s) for s in self.simplices) - 1

    def has_face(self, indices) -> bool:
        return frozenset(indices) in self.simplices

    def sorted_faces(self) -> list[list[int]]:
        return sorted((sorted(s) for s in self.simplices), key=lambda f: (len(f), f))


def nerve_of(cover: Cover) -> SimplicialComplex:
    """Nerve of a cover: a face per index set with a common sample point.

    A set of indices shares a point iff it sits inside some point's set of
    active members, so faces are enumerated from those active sets; the
    result is downward closed by construction.
    """
    if cover.size == 0:
        raise InputError("nerve of an empty family is not defined")
    supports = cover.supports()
    faces: set[frozenset[int]] = set()
    for x in range(cover.sample_size):
        active = tuple(int(i) for i in np.nonzero(supports[:, x])[0])
        for r in range(1, len(active) + 1):
            for combo in combinations(active, r):
                faces.add(frozenset(combo))
    return SimplicialComplex(cover.size, frozenset(faces))


def export_complex(
    complex: SimplicialComplex, realization: np.ndarray | None = None
) -> bytes:
    """Serialize to canonical JSON bytes; identical input, identical bytes.

    Faces are sorted by (size, lexicographic). Coordinates appear only
    when a realization is supplied here or stored on the complex.
    """
    coords = realization if realization is not None else complex.realization
    doc: dict = {
        "vertices": complex.vertex_count,
        "simplices": complex.sorted_faces(),
    }
    if coords is not None:
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if coords.shape[0] != complex.vertex_count:
            raise InputError("realization must place every vertex")
        doc["coords"] = [[repr(float(v)) for v in row] for row in coords]
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def import_complex(data: bytes) -> SimplicialComplex:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"not a complex document: {exc}") from exc
    for key in ("vertices", "simplices"):
        if key not in doc:
            raise InputError(f"complex document is missing {key!r}")
    realization = None
    if "coords" in doc:
        realization = np.array([[float(v) for v in row] for row in doc["coords"]])
    return SimplicialComplex(
        int(doc["vertices"]),
        frozenset(frozenset(int(v) for v in s) for s in doc["simplices"]),
        realization,
    )
