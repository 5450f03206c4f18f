"""Empirical CVaR of contaminated normal samples against the expansion member.

    python3 scripts/sensitivity_sweep.py --v-law uniform --n 1000000 --reps 5
"""

import argparse

from shortfall.distributions import NormalLaw
from shortfall.measurement_error import V_LAWS
from shortfall.montecarlo import error_law, error_sensitivity_sweep, sweep_medians

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--v-law", choices=V_LAWS, default="gaussian")
    ap.add_argument("--alpha", type=float, default=0.96)
    ap.add_argument("--n", type=int, default=10**6)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--deltas", default="0,0.05,0.1,0.15,0.2")
    args = ap.parse_args()

    deltas = [float(d) for d in args.deltas.split(",")]
    rows = error_sensitivity_sweep(NormalLaw(), error_law(args.v_law), deltas, args.alpha, args.n,
                                   seed=1, repetitions=args.reps)
    members = {r.delta: r.member for r in rows}
    print("delta,median_empirical_cvar,member_cvar")
    for d, med in sweep_medians(rows).items():
        print(f"{d:g},{med:.5f},{members[d]:.5f}")
