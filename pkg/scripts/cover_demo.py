"""Walk a random ball cover of the square through the cover calculus.

Shows the closed shrinking, a star refinement, and order reduction, and
checks at each step that the nerve dimension tracks the cover order.
"""

import argparse
import sys

import numpy as np

from dimlab import (
    Ball,
    Cover,
    SampledSpace,
    ball_cozero,
    closed_shrinking,
    nerve_of,
    order_of,
    reduce_order,
    separator_oracle,
    star_refinement,
)


def random_cover(space: SampledSpace, k: int, rng: np.random.Generator) -> Cover:
    owners = np.concatenate([np.arange(k), rng.integers(0, k, space.size - k)])
    rng.shuffle(owners)
    members = []
    for i in range(k):
        mine = np.nonzero(owners == i)[0]
        center = int(rng.choice(mine))
        reach = float(space.dist[center, mine].max())
        radius = reach + rng.uniform(0.05, 0.3) * (space.diameter + 1.0)
        members.append(ball_cozero(space, Ball(center, radius)))
    return Cover(tuple(members))


def describe(label: str, cover: Cover) -> None:
    order = order_of(cover)
    print(f"{label}: {cover.size} members, order {order}, nerve dim {nerve_of(cover).dim}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--members", type=int, default=5)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pts = rng.uniform(0.0, 1.0, size=(args.points, 2))
    space = SampledSpace.from_points(pts, mesh=0.5)
    cover = random_cover(space, args.members, rng)
    describe("input", cover)

    shrunk = closed_shrinking(cover)
    covered = sorted(set().union(*shrunk.closed_shrink))
    print(f"closed shrinking: F covers {len(covered)}/{space.size} points (must be all)")

    refined, absorbed = star_refinement(cover)
    describe("star refinement", refined)
    print(f"  member stars absorbed into inputs {sorted(set(absorbed))}")

    reduced = reduce_order(space, cover, args.n, separator_oracle)
    describe(f"order reduced to <= {args.n}", reduced)
    return 0


if __name__ == "__main__":
    sys.exit(main())
