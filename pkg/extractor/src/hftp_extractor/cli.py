"""Command line for the extractor: extract | shuffle."""

from __future__ import annotations

import argparse
import sys

from .corpus import BoundaryAlignmentError, shuffle_control
from .extract import extract_activations
from .manifest import load_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hftp-extract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ext = sub.add_parser("extract", help="dump activations per the manifest")
    p_ext.add_argument("--manifest", required=True, help="JSON extraction manifest")

    p_shf = sub.add_parser("shuffle", help="write a word-order-randomized control corpus")
    p_shf.add_argument("--corpus", required=True)
    p_shf.add_argument("--out", required=True)
    p_shf.add_argument("--seed", type=int, default=0)
    p_shf.add_argument("--boundary", choices=("word", "syllable"), required=True)
    p_shf.add_argument("--mode", choices=("within", "global"), default="within")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            out = extract_activations(load_manifest(args.manifest))
            print(out)
        else:
            shuffle_control(args.corpus, args.seed, args.out, args.boundary, args.mode)
            print(args.out)
        return 0
    except BoundaryAlignmentError as exc:
        print(f"boundary alignment error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
