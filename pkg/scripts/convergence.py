"""WMMSE convergence from random, SVD and SVD-WF starting points.

    python scripts/convergence.py --trials 50 --out convergence.csv
"""

import argparse

from raca.harness import DESK_T_MAX, run_convergence_study
from raca.sysmodel import SystemConfig
from raca.wmmse import WmmseSettings


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=int, default=DESK_T_MAX)
    p.add_argument("--out", default="convergence.csv")
    args = p.parse_args()
    study = run_convergence_study(SystemConfig(), args.trials, args.seed, WmmseSettings(t_max=args.t_max))
    with open(args.out, "w") as f:
        f.write(study.to_csv())
    for init in study.curves:
        print(f"{init:>6}: final {study.final_rate(init):.4f} bits, "
              f"99% after {study.iterations_to(init, 0.99)} it, 98% after {study.iterations_to(init, 0.98)} it")
    ratio = study.iterations_to("svdwf", 0.99) / study.iterations_to("random", 0.99)
    print(f"SVD-WF / random iterations to 99%: {ratio:.3f}")
    print(f"start order SVD-WF >= SVD >= random on {study.start_order_fraction():.0%} of trials")


if __name__ == "__main__":
    main()
