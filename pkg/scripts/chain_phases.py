"""Odd index triple of the non-hermitian chiral chain across the intra/inter ratio."""

import argparse

import numpy as np

from nhloc.errors import GapClosedError
from nhloc.invariants import chiral_winding
from nhloc.model import build_chiral_chain, estimate_line_gap


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=40)
    ap.add_argument("--disorder", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    inter = 1.0 - 0.2j
    for r in np.linspace(0.2, 1.8, 9):
        chain = build_chiral_chain(args.cells, r * (0.8 + 0.6j), inter, args.disorder, args.seed)
        try:
            g = estimate_line_gap(chain.H)
            w = chiral_winding(chain.H, chain.J, chain.geometry)
        except GapClosedError:
            print(f"|intra|/|inter|={r / abs(inter):.2f}  gap closed")
            continue
        print(f"|intra|/|inter|={r / abs(inter):.2f}  gap={g:.3f}  (A, B, V)={w.as_tuple()}")


if __name__ == "__main__":
    main()
