#!/usr/bin/env python3
"""Train the online flowing window: sweep f_w and report the MI maximizer."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mercuryflow import evaluation as ev
from mercuryflow import scenario as scn


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--j", type=int, default=40)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--ts", type=float, default=0.01)
    p.add_argument("--energy", type=float, default=5.0)
    p.add_argument("--block-len", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    s = scn.generate(
        n=args.n, k=args.k, ts=args.ts, j=args.j, total_energy=args.energy,
        constellations=("bpsk", "4pam", "16pam", "32pam")[: args.k],
        gain_model="block_random", block_len=args.block_len, seed=args.seed,
    )
    best, scores = ev.best_window(s)
    print(" f_w   mi_bits")
    for f_w in sorted(scores):
        mark = "  <-- best" if f_w == best else ""
        print(f"{f_w:4d} {scores[f_w]:9.4f}{mark}")
    print(f"\nbest flowing window: {best} ({scores[best]:.4f} bits)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
