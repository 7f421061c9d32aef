#!/usr/bin/env python3
"""Certify the operator identities numerically on the fixed random corpus
and print a residual table, plus the observed convergence orders of the
time-differenced checks.

Usage: python scripts/identity_suite.py [--dim 2|3]
"""
import argparse

from elflow.config import GridConfig, RunConfig
from elflow.runner import identity_suite_with_orders


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, choices=(2, 3), default=2)
    args = parser.parse_args()

    n = 64 if args.dim == 2 else 48
    cfg = RunConfig(grid=GridConfig(dim=args.dim, n=n)).validate()
    payload = identity_suite_with_orders(cfg)
    print(f"{'identity':46s} {'residual':>12} {'tolerance':>10} {'status':>8}")
    for r in payload["reports"]:
        print(f"{r.name:46s} {r.residual:12.3e} {r.tolerance:10.1e} "
              f"{'pass' if r.passed else 'FAIL':>8}")
    for name, o in payload["orders"].items():
        print(f"order[{name}]: observed {o['observed']:.2f} "
              f"(nominal {o['nominal']:.0f})")
    raise SystemExit(0 if all(r.passed for r in payload["reports"])
                     and payload["orders_pass"] else 3)


if __name__ == "__main__":
    main()
