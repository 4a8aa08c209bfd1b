#!/usr/bin/env python3
"""Generate a synthetic portrait corpus (images + binary hair masks) for
smoke runs and benchmarks.

Usage:
    python scripts/make_synthetic_corpus.py --out data/synthetic --n 64
"""

import argparse
import sys

from hairsynth.synthetic import write_corpus


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus root directory")
    parser.add_argument("--n", type=int, default=64, help="number of portraits")
    parser.add_argument("--size", type=int, default=128, help="source resolution")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    image_dir, mask_dir = write_corpus(args.out, args.n, size=args.size, seed=args.seed)
    print(f"wrote {args.n} pairs under {image_dir} and {mask_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
