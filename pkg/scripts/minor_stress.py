"""Stress the SOS test on principal minors of random M^T M matrices.

Every principal minor of such a matrix is a sum of squares, so any
"not SOS" verdict is a solver or basis bug. Reports counts and timings.

    python scripts/minor_stress.py --trials 300 --seed 0
"""

from __future__ import annotations

import argparse
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from sosconvex.convexcert import cauchy_binet_det, bareiss_det, principal_minors
from sosconvex.grambasis import sos_blocks
from sosconvex.polycore import PolyMatrix, random_polynomial
from sosconvex.sdpsolve import sos_feasibility


@dataclass
class StressConfig:
    trials: int = 100
    seed: int = 0
    nvars: int = 3
    max_dim: int = 3
    entry_degree: int = 2
    entry_terms: int = 3


def run(cfg: StressConfig) -> Counter:
    rng = np.random.default_rng(cfg.seed)
    tally: Counter = Counter()
    for trial in range(cfg.trials):
        m = int(rng.integers(1, cfg.max_dim + 1))
        k = int(rng.integers(1, cfg.max_dim + 1))
        M = PolyMatrix([[random_polynomial(rng, cfg.nvars, cfg.entry_degree, cfg.entry_terms)
                         for _ in range(m)] for _ in range(k)], symmetric=False)
        P = M.transpose().matmul(M, symmetric=True)
        if cauchy_binet_det(M) != bareiss_det([list(r) for r in P.rows()]):
            tally["det-mismatch"] += 1
        for idx, minor in principal_minors(P):
            if minor.is_zero():
                tally["zero"] += 1
                continue
            res = sos_feasibility(minor, sos_blocks(minor))
            tally[res.solution.status] += 1
            if not res.is_sos:
                tally["not-sos"] += 1
                print(f"trial {trial} minor {idx}: t = {res.t:.3e} ({res.solution.message})")
    return tally


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=StressConfig.trials)
    ap.add_argument("--seed", type=int, default=StressConfig.seed)
    ap.add_argument("--max-dim", type=int, default=StressConfig.max_dim)
    args = ap.parse_args()
    cfg = StressConfig(trials=args.trials, seed=args.seed, max_dim=args.max_dim)
    t0 = time.perf_counter()
    tally = run(cfg)
    print(dict(tally))
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
