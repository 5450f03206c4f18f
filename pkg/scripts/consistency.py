"""Median absolute error of the empirical CVaR against the exact value.

    python3 scripts/consistency.py --law normal --alpha 0.96 --reps 20
"""

import argparse

from shortfall.distributions import ChiSquareLaw, NormalLaw
from shortfall.montecarlo import ContaminationScenario, consistency_experiment, error_law

LAWS = {"normal": NormalLaw(), "chi2": ChiSquareLaw(1)}

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--law", choices=sorted(LAWS), default="normal")
    ap.add_argument("--alpha", type=float, default=0.96)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--sizes", default="1000,10000,100000,1000000")
    args = ap.parse_args()

    scn = ContaminationScenario(LAWS[args.law], error_law("gaussian"), 0.0, 10, seed=args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    tab = consistency_experiment(scn, args.alpha, sizes, args.reps)
    print(f"reference CVaR = {tab.reference:.6f}")
    print("n,median_abs_error")
    for row in tab.rows:
        print(f"{row.n},{row.median_abs_error:.6f}")
    print(f"nonincreasing: {tab.nonincreasing}")
