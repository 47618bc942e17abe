"""Power-split sweeps: UE vs relay at three total powers, and f_L vs f_H.

    python scripts/ratio_sweeps.py --trials 50 --out-dir results
"""

import argparse
from pathlib import Path

import numpy as np

from raca.harness import DESK_T_MAX, ExperimentSpec, run_experiment
from raca.sysmodel import SystemConfig
from raca.wmmse import WmmseSettings

SYSTEMS = ("RACA-WMMSE", "RACA-SVD-WF")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--t-max", type=int, default=DESK_T_MAX)
    p.add_argument("--levels-db", type=float, nargs="+", default=[-3.0, 0.0, 3.0],
                   help="offsets of P_ur + P_r from the default total")
    p.add_argument("--out-dir", default=".")
    args = p.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = SystemConfig()
    settings = WmmseSettings(t_max=args.t_max)

    def sweep(experiment, config, name):
        spec = ExperimentSpec(experiment, base_config=config, n_trials=args.trials, seed=args.seed,
                              systems=SYSTEMS, output_path=str(out / name), threads=args.threads,
                              settings=settings)
        result = run_experiment(spec)
        x, rate = result.sweep("RACA-WMMSE"), result.column("RACA-WMMSE")
        print(f"{name}: RACA-WMMSE peak {rate.max():.3f} bits at ratio {x[np.argmax(rate)]:.2f}; "
              f"endpoints {rate[0]:.3f}, {rate[-1]:.3f}")

    for db in args.levels_db:
        scale = 10 ** (db / 10)
        config = base.replace(p_ur=base.p_ur * scale, p_r=base.p_r * scale)
        sweep("ratio_ue_relay", config, f"ratio_ue_relay_{db:+.0f}dB.csv")
    sweep("ratio_fl_fh", base, "ratio_fl_fh.csv")


if __name__ == "__main__":
    main()
