#!/usr/bin/env python3
"""Emit a phase portrait (CSV + SVG) for a bundled or custom config.

Usage:
    python scripts/phase_diagram.py --config configs/fig4-rescaled.json --out /tmp/portrait
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from roylab.dynamics import phase_portrait
from roylab.model import ModelParams
from roylab.render import portrait_csv, portrait_svg


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="portrait")
    ap.add_argument("--resolution", type=int, default=24)
    args = ap.parse_args()

    with open(args.config) as fh:
        cfg = json.load(fh)
    params = ModelParams.from_dict(cfg["params"])
    pp = phase_portrait(params, args.resolution)
    Path(args.out + ".csv").write_text(portrait_csv(pp))
    Path(args.out + ".svg").write_text(portrait_svg(pp))
    stable = sum(1 for e in pp.equilibria if e.stability in ("stable", "boundary-stable"))
    print(
        f"{len(pp.equilibria)} equilibria ({stable} stable) -> "
        f"{args.out}.csv, {args.out}.svg"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
