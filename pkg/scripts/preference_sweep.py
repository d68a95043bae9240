#!/usr/bin/env python3
"""Bifurcation sweep: equilibrium counts as one preference strength varies.

Defaults sweep the W group's strength across the corner-existence threshold
for the contrarian configuration, where the stable count jumps by one.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from roylab.model import make_params
from roylab.policy import sweep_rows


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--param", default="c_w")
    ap.add_argument("--lo", type=float, default=0.7)
    ap.add_argument("--hi", type=float, default=1.0)
    ap.add_argument("--count", type=int, default=16)
    args = ap.parse_args()

    params = make_params(c_w=args.lo, c_m=0.4, beta=1.0, re_w=0.7, re_m=0.5)
    rows = sweep_rows(params, args.param, np.linspace(args.lo, args.hi, args.count))
    print("value,n_equilibria,n_stable,settled_r_w,settled_r_m,tipped")
    for r in rows:
        print(
            f"{r['value']:.6f},{r['n_equilibria']},{r['n_stable']},"
            f"{r['settled_r_w']:.6f},{r['settled_r_m']:.6f},{str(r['tipped']).lower()}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
