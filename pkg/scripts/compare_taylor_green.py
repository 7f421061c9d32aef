#!/usr/bin/env python3
"""Taylor-Green comparison: evolve the displacement/virtual-velocity system
and the classical solver side by side, print the relative velocity
difference over time.

Usage: python scripts/compare_taylor_green.py [--dim 2|3] [--out DIR]
"""
import argparse
import tempfile

from elflow.config import preset
from elflow.runner import execute


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, choices=(2, 3), default=2)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    cfg = preset("desk-2d" if args.dim == 2 else "desk-3d")
    outdir = args.out or tempfile.mkdtemp(prefix="elflow-compare-")
    code = execute(cfg, outdir, command="compare")

    import json
    from pathlib import Path
    rep = json.loads((Path(outdir) / "report_compare.json").read_text())
    print(f"artifacts: {outdir}")
    print(f"{'t':>8} {'rel L2':>12} {'rel sup':>12}")
    for t, l2, li in zip(rep["times"], rep["rel_l2"], rep["rel_linf"]):
        print(f"{t:8.3f} {l2:12.3e} {li:12.3e}")
    print(f"max rel L2 = {rep['max_rel_l2']:.3e}")
    raise SystemExit(code)


if __name__ == "__main__":
    main()
