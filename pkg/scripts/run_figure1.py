"""Regenerate the heterostructure data set: index map, gap map, LDOS, flow and spectra.

    python scripts/run_figure1.py [--config configs/fig1.toml] [--out DIR] [--plots]
"""

import argparse
import sys
from pathlib import Path

from nhloc.cli import main as nhloc

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "fig1.toml"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    common = ["--config", args.config]
    if args.out:
        common += ["--out", args.out]
    if args.plots:
        common.append("--plots")
    if args.threads:
        common += ["--threads", str(args.threads)]
    steps = [
        ["index-map"],
        ["gap-map"],
        ["ldos"],
        ["flow"],
        ["spectrum", "--target", "hamiltonian"],
        ["spectrum", "--target", "localizer", "--probe", "0", "0"],
        ["certify"],
    ]
    for step in steps:
        print("nhloc", " ".join(step), flush=True)
        code = nhloc(step + common)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
