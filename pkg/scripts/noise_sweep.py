"""Rate, streams and energy efficiency of every system across noise levels.

    python scripts/noise_sweep.py --trials 200 --out results/noise.csv
"""

import argparse
import logging

from raca.harness import DESK_T_MAX, SYSTEMS, ExperimentSpec, run_experiment
from raca.sysmodel import SystemConfig
from raca.wmmse import WmmseSettings


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--t-max", type=int, default=DESK_T_MAX)
    p.add_argument("--config", help="JSON config")
    p.add_argument("--out", default="noise_sweep.csv")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    config = SystemConfig.from_json(args.config) if args.config else SystemConfig()
    spec = ExperimentSpec("rate_vs_noise", base_config=config, n_trials=args.trials, seed=args.seed,
                          systems=SYSTEMS, output_path=args.out, threads=args.threads,
                          settings=WmmseSettings(t_max=args.t_max))
    result = run_experiment(spec)
    at_90 = {r.system: r for r in result.rows if r.sweep_value == -90.0}
    if at_90:
        raca = at_90["RACA-WMMSE"]
        for other in ("CA-SVD-WF", "RA-WMMSE", "RACA-SVD-WF"):
            print(f"-90 dBm  RACA-WMMSE / {other}: {raca.mean_rate / at_90[other].mean_rate:.3f}")
        print(f"-90 dBm  EE_u RACA / CA: {raca.mean_EE_u / at_90['CA-SVD-WF'].mean_EE_u:.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
