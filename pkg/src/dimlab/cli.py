"""Command-line entry point.

Exit codes: 0 success, 1 a certificate or mathematical check failed,
2 bad input (malformed files, unknown flags, schema violations). All
output is deterministic for a fixed seed; the seed defaults to the
DIMLAB_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .covers import Cover, closed_shrinking, meet, order_of, star_of_member
from .dimension import map_oracle, reduce_order, separator_oracle
from .embedding import (
    general_position,
    nobeling_embed,
    result_from_json_bytes,
    result_to_json_bytes,
)
from .errors import CertificateError, DimlabError, InputError
from .harness import verify_nobeling_membership, verify_result
from .metric import SampledSpace
from .nerve import export_complex, nerve_of


def _default_seed() -> int:
    try:
        return int(os.environ.get("DIMLAB_SEED", "0"))
    except ValueError:
        return 0


def _load_json(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _load_space(path: str) -> SampledSpace:
    return SampledSpace.from_json_dict(_load_json(path))


def _load_cover(path: str, space: SampledSpace) -> Cover:
    return Cover.from_json_dict(_load_json(path), space.size)


def _emit(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.write(data.decode("utf-8") + "\n")
    else:
        with open(out, "wb") as fh:
            fh.write(data)


def _dump(doc) -> bytes:
    return json.dumps(doc, separators=(",", ":"), allow_nan=False).encode("utf-8")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimlab")
    parser.add_argument("--version", action="version", version=f"dimlab {__version__}")
    # shared flags live on every subcommand so they can follow it on the line
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed (default: DIMLAB_SEED or 0)")
    common.add_argument("--tolerance", type=float, default=1e-9)
    sub = parser.add_subparsers(dest="command", required=True)

    cover = sub.add_parser("cover", help="cover calculus")
    cover_sub = cover.add_subparsers(dest="cover_command", required=True)

    p = cover_sub.add_parser("shrink", parents=[common], help="closed shrinking of a cover")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--out")

    p = cover_sub.add_parser("star", parents=[common], help="star of one member")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--member", type=int, required=True)

    p = cover_sub.add_parser("meet", parents=[common], help="common refinement of two covers")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--other", required=True)
    p.add_argument("--out")

    p = cover_sub.add_parser("order", parents=[common], help="order of a cover")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)

    p = cover_sub.add_parser("reduce-order", parents=[common], help="shrink to order at most n")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--oracle", default="separator",
                   help="witness supplier: separator, or map:G.json for a fixed boundary map")
    p.add_argument("--out")

    p = sub.add_parser("nerve", parents=[common], help="nerve complex of a cover")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--out")

    p = sub.add_parser("genpos", parents=[common], help="general-position perturbation")
    p.add_argument("--targets", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("embed", parents=[common], help="run the staged embedding")
    p.add_argument("--space", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("verify", parents=[common], help="re-verify an embedding result")
    p.add_argument("--result", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--membership", action="store_true",
                   help="also check per-hyperplane equation clearances")
    return parser


def _resolve_oracle(name: str):
    if name == "separator":
        return separator_oracle
    if name.startswith("map:"):
        doc = _load_json(name[len("map:"):])
        if not isinstance(doc, dict) or "g" not in doc:
            raise InputError("map oracle file must contain a g matrix")
        return map_oracle(np.array(doc["g"], dtype=float))
    raise InputError(f"unknown oracle {name!r}; use separator or map:G.json")


def _run(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.command == "cover":
        space = _load_space(args.space)
        cov = _load_cover(args.cover, space)
        if args.cover_command == "shrink":
            res = closed_shrinking(cov)
            doc = {
                "open_shrink": res.open_shrink.to_json_dict(),
                "closed_shrink": [sorted(s) for s in res.closed_shrink],
            }
            _emit(_dump(doc), args.out)
        elif args.cover_command == "star":
            if not 0 <= args.member < cov.size:
                raise InputError(f"member {args.member} outside 0..{cov.size - 1}")
            sys.stdout.write(_dump(sorted(star_of_member(args.member, cov))).decode() + "\n")
        elif args.cover_command == "meet":
            other = _load_cover(args.other, space)
            _emit(_dump(meet(cov, other).to_json_dict()), args.out)
        elif args.cover_command == "order":
            sys.stdout.write(f"{order_of(cov)}\n")
        elif args.cover_command == "reduce-order":
            out = reduce_order(space, cov, args.n, _resolve_oracle(args.oracle))
            _emit(_dump(out.to_json_dict()), args.out)
        return 0
    if args.command == "nerve":
        space = _load_space(args.space)
        cov = _load_cover(args.cover, space)
        _emit(export_complex(nerve_of(cov)), args.out)
        return 0
    if args.command == "genpos":
        doc = _load_json(args.targets)
        if "targets" not in doc:
            raise InputError("targets file must contain a targets list")
        targets = np.array(doc["targets"], dtype=float)
        placed = general_position(targets, args.eps, seed=seed, tol=args.tolerance)
        _emit(_dump({"points": [[float(v) for v in row] for row in placed]}), args.out)
        return 0
    if args.command == "embed":
        space = _load_space(args.space)
        result = nobeling_embed(space, args.n, args.stages, seed=seed)
        _emit(result_to_json_bytes(result), args.out)
        return 0
    if args.command == "verify":
        space = _load_space(args.space)
        with open(args.result, "rb") as fh:
            result = result_from_json_bytes(fh.read())
        report = verify_result(result, space, args.n)
        checks = list(report.checks)
        if args.membership:
            checks.extend(verify_nobeling_membership(result).checks)
        overall = all(c.passed for c in checks)
        doc = {
            "overall": overall,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "margin": None if c.margin in (float("inf"), float("-inf")) else c.margin,
                    "location": c.location,
                }
                for c in checks
            ],
        }
        sys.stdout.write(_dump(doc).decode("utf-8") + "\n")
        return 0 if overall else 1
    raise InputError(f"unknown command {args.command!r}")


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except InputError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except CertificateError as exc:
        sys.stderr.write(f"certificate failure: {exc}\n")
        return 1
    except DimlabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
