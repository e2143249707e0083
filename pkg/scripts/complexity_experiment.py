#!/usr/bin/env python3
"""Call-count complexity of the two offline algorithms over seeded ensembles.

For each number of energy arrivals J, runs both solvers on seeded random
scenarios, records how many times each one invokes the per-epoch routine,
and fits the average-case models E{C_nda} = J(q+1) - q and
E{C_fsa} = (J^2/2 + J/2 - 1) p + 1.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mercuryflow import evaluation as ev


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--j-grid", type=int, nargs="+", default=[10, 20, 40, 60, 80])
    p.add_argument("--runs", type=int, default=40, help="runs per J")
    p.add_argument("--base-seed", type=int, default=2024)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()

    ens = ev.complexity_ensemble(args.j_grid, runs=args.runs,
                                 base_seed=args.base_seed, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "complexity.csv"
    ev.complexity_csv(ens, path)

    print("   J   mean_nda  [best worst]   mean_fsa  [best worst]")
    for j in ens.j_values:
        mn = float(np.mean(ens.nda_calls[j]))
        mf = float(np.mean(ens.fsa_calls[j]))
        print(f"{j:4d} {mn:10.2f}  [{j:4d} {2 * j - 1:5d}] {mf:10.2f}  [   1 {j * (j + 1) // 2:5d}]")
    print(f"\nfitted q = {ens.fitted_q:.4f}   fitted p = {ens.fitted_p:.4f}")
    print(f"all samples within analytic bounds: {ens.bounds_ok()}")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
