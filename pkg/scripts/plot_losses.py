#!/usr/bin/env python3
"""Plot loss-vs-step curves from a training loss log (JSON lines).

Usage:
    python scripts/plot_losses.py --log runs/default/losses.jsonl --out curves.png
"""

import argparse
import json
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--log", required=True, help="losses.jsonl from a training run")
    parser.add_argument("--out", required=True, help="output image (png/pdf)")
    parser.add_argument("--fields", nargs="+",
                        default=["pixel", "style", "perceptual", "adv_g", "adv_d", "total_g"])
    args = parser.parse_args(argv)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    entries = [json.loads(line) for line in open(args.log)]
    if not entries:
        print("empty loss log", file=sys.stderr)
        return 2
    steps = [e["step"] for e in entries]

    fig, ax = plt.subplots(figsize=(9, 5))
    for field in args.fields:
        ax.plot(steps, [e[field] for e in entries], label=field, linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
