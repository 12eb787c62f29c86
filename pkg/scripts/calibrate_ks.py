"""Calibrate the Gaussian-case KS threshold used by the acceptance suite.

Runs the baseline experiment (gaussian increments, classical statistic,
n = 10^5, R = 2000) five times with independent master seeds for each
dimension and reports mean, spread, and the pinned threshold mean + 3 * std
of the one-sample KS distance against the standard Gumbel limit.

The resulting numbers are frozen as constants in tests/test_acceptance.py;
rerun this script to re-derive them.

Usage: python3 scripts/calibrate_ks.py [--quick]
"""

import argparse
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from lilmax.harness import ECDF, ExperimentConfig, ks_one_sample, run_experiment
from lilmax.limits import GumbelLaw
from lilmax.models import gaussian_iso


def calibrate(d: int, n: int, replications: int, seeds, threads: int = 4):
    distances = []
    for seed in seeds:
        cfg = ExperimentConfig(
            name=f"calibrate_d{d}",
            law=gaussian_iso(d),
            scheme=None,
            mode="classical",
            n=n,
            replications=replications,
            master_seed=seed,
        )
        t0 = time.perf_counter()
        records = run_experiment(cfg, threads=threads)
        ks = ks_one_sample(ECDF.from_records(records), GumbelLaw())
        distances.append(ks)
        print(
            f"  d={d} seed={seed}: ks_gumbel={ks:.5f} "
            f"({time.perf_counter() - t0:.1f}s)"
        )
    arr = np.array(distances)
    mean, std = float(arr.mean()), float(arr.std(ddof=1))
    print(
        f"d={d}: mean={mean:.5f} std={std:.5f} min={arr.min():.5f} "
        f"max={arr.max():.5f} threshold(mean + 3 std)={mean + 3 * std:.5f}"
    )
    return mean, std


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="R=200 smoke run")
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    replications = 200 if args.quick else 2000
    print(f"calibrating at n=100000, R={replications}, 5 seeds per dimension")
    calibrate(1, 100_000, replications, seeds=(1001, 1002, 1003, 1004, 1005),
              threads=args.threads)
    calibrate(2, 100_000, replications, seeds=(2001, 2002, 2003, 2004, 2005),
              threads=args.threads)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
