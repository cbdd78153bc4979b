"""Embed a grid sample of the unit square and report the certificates.

A 4x3 grid keeps every pair of sample points farther apart than the
stage-0 merge threshold, so the run stays injective. Coarser or random
samples may legitimately abort when two points share every cover member.
"""

import argparse
import sys

import numpy as np

from dimlab import CertificateError, SampledSpace, nobeling_embed, verify_result


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=4)
    ap.add_argument("--ny", type=int, default=3)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--stages", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    gx, gy = np.meshgrid(np.linspace(0.0, 1.0, args.nx), np.linspace(0.0, 1.0, args.ny))
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    space = SampledSpace.from_points(pts, mesh=1.0 / (min(args.nx, args.ny) - 1))
    print(f"{space.size} grid points, target dimension {2 * args.n + 1}")

    try:
        result = nobeling_embed(space, n=args.n, T=args.stages, seed=args.seed)
    except CertificateError as exc:
        print(f"aborted honestly: {exc}")
        return 1

    for st in result.stages:
        print(f"stage {st.t}: pair {st.pair_code}  delta {st.delta:.3e}  moved {st.contraction:.3e}")
    print(f"injectivity margin: {result.injectivity_margin:.6e}")
    report = verify_result(result, space, n=args.n)
    print(f"verification: {'ok' if report.overall else 'FAILED'} ({len(report.checks)} checks)")
    return 0 if report.overall else 1


if __name__ == "__main__":
    sys.exit(main())
