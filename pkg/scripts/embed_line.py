"""Run the staged embedding on an evenly spaced line sample and verify it.

Prints one line per stage (ball pair, scales, contraction) followed by the
final clearances and the full certificate verdict. Writes the result JSON
when --out is given.
"""

import argparse
import sys

import numpy as np

from dimlab import SampledSpace, nobeling_embed, result_to_json_bytes, verify_result


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--stages", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write result JSON here")
    args = ap.parse_args()

    pts = np.linspace(0.0, 1.0, args.points)[:, None]
    space = SampledSpace.from_points(pts, mesh=1.0 / max(args.points - 1, 1))
    result = nobeling_embed(space, n=args.n, T=args.stages, seed=args.seed)

    for st in result.stages:
        print(
            f"stage {st.t}: pair {st.pair_code}  delta {st.delta:.3e}  "
            f"eta {st.eta:.3e}  eta' {st.eta_prime:.3e}  moved {st.contraction:.3e}"
        )
    print(f"injectivity margin: {result.injectivity_margin:.6e}")
    worst = min(a.distance_margin for a in result.avoided)
    print(f"worst hyperplane clearance: {worst:.6e}")

    report = verify_result(result, space, n=args.n)
    print(f"verification: {'ok' if report.overall else 'FAILED'} ({len(report.checks)} checks)")
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(result_to_json_bytes(result))
        print(f"wrote {args.out}")
    return 0 if report.overall else 1


if __name__ == "__main__":
    sys.exit(main())
