"""Run every check of the worked example and print a timing table.

    python scripts/reproduce_example.py [--data-dir DIR] [--tol 1e-8]
"""

import argparse
import sys

from sosconvex.reproduce import run_checks


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", default=None)
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--samples", type=int, default=1000)
    args = ap.parse_args()
    checks = run_checks(args.data_dir, tol=args.tol, samples=args.samples)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.seconds:7.2f} s  {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
