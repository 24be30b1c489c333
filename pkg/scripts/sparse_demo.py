#!/usr/bin/env python3
"""Select a sparse family for a random pair and report its invariants."""

import argparse

from bifrac.dyadic import DyadicGrid
from bifrac.signal import make_test_family
from bifrac.sparse import check_invariants, cz_select
from bifrac.young import LLogL


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1, choices=(1, 2))
    ap.add_argument("--L", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--shift", type=int, default=0, help="index into the 2^n shifted grids")
    args = ap.parse_args()

    f, g = make_test_family("random-nonnegative", {"count": 2, "decades": 3, "zero_fraction": 0.3, "block": 2},
                            seed=args.seed, n=args.n, L0=1, L=args.L)
    a = 2.0 ** (2 * args.n + 4)
    fam = cz_select(f, g, LLogL(1), LLogL(1), a, DyadicGrid.all_shifts(args.n)[args.shift])
    for k, cubes in sorted(fam.to_dict()["levels"].items(), key=lambda kv: int(kv[0])):
        ratios = [c["E_over_Q"] for c in cubes]
        print(f"k={k:>3}: {len(cubes):3d} cubes, min |E|/|Q| = {min(ratios):.3f}")
    bad = check_invariants(fam)
    print("invariants:", ", ".join(f"{k}={v}" for k, v in bad.items()))


if __name__ == "__main__":
    main()
