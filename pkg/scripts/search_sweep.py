"""Sweep the counterexample search over margins and multiplier exponents.

Each configuration runs in its own process. Results are written as one JSON
line per run, so partial sweeps are still usable.

    python scripts/search_sweep.py --margins 0.5 1 2 --r 1 2 --out sweep.jsonl
"""

from __future__ import annotations

import argparse
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from sosconvex.discover import SearchConfig, search_counterexample, search_psd_not_sos
from sosconvex.polycore import format_polynomial


@dataclass
class SweepConfig:
    margins: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    multiplier_r: list[int] = field(default_factory=lambda: [1])
    mode: str = "convex"
    workers: int = 2
    out: str = "sweep.jsonl"


def run_one(margin: float, r: int, mode: str) -> dict:
    t0 = time.perf_counter()
    degree = 8 if mode == "convex" else 6
    cfg = SearchConfig(degree=degree, strictness_margin=margin, multiplier_r=r, max_r=r, mode=mode)
    if mode == "psd":
        res = search_psd_not_sos(cfg)
        form = res.form
        verdict = "psd-not-sos" if res.success else None
    else:
        res = search_counterexample(cfg)
        form = res.final
        verdict = res.certified.verdict if res.certified else None
    return {
        "margin": margin,
        "r": r,
        "mode": mode,
        "success": res.success,
        "verdict": verdict,
        "form": format_polynomial(form) if form is not None else None,
        "terms": len(form) if form is not None else None,
        "seconds": round(time.perf_counter() - t0, 3),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--margins", type=float, nargs="+")
    ap.add_argument("--r", type=int, nargs="+", dest="multiplier_r")
    ap.add_argument("--mode", choices=["convex", "psd"])
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out")
    given = {k: v for k, v in vars(ap.parse_args()).items() if v is not None}
    cfg = SweepConfig(**given)
    print(json.dumps(asdict(cfg)))
    jobs = [(m, r, cfg.mode) for m in cfg.margins for r in cfg.multiplier_r]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool, open(cfg.out, "w") as fh:
        for row in pool.map(run_one, *zip(*jobs)):
            fh.write(json.dumps(row) + "\n")
            fh.flush()
            print(f"margin {row['margin']:<6g} r {row['r']}  {row['verdict'] or 'FAILED':<24} "
                  f"{row['terms'] or '-':>3} terms  {row['seconds']:.1f} s")


if __name__ == "__main__":
    main()
