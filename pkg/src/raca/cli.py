"""Command line entry point: ``raca run|convergence|overhead|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from raca.harness import (
    DESK_T_MAX,
    EXPERIMENTS,
    SYSTEMS,
    ExperimentSpec,
    run_convergence_study,
    run_experiment,
    trial_seed,
)
from raca.channel import generate_channels, stack_channels
from raca.protocol import overhead
from raca.sysmodel import SystemConfig, validate_solution
from raca.wmmse import MonotonicityError, WmmseSettings, solve_wmmse_batch


def _config(path: str | None) -> SystemConfig:
    return SystemConfig.from_json(path) if path else SystemConfig()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    systems = tuple(s.strip() for s in args.systems.split(",")) if args.systems else SYSTEMS
    spec = ExperimentSpec(
        experiment=args.experiment, base_config=_config(args.config),
        sweep_values=tuple(args.values) if args.values else None,
        n_trials=args.trials, seed=args.seed, systems=systems, output_path=args.out,
        threads=args.threads, settings=WmmseSettings(t_max=args.t_max),
    )
    result = run_experiment(spec)
    if not args.out:
        sys.stdout.write(result.to_csv())
    failed = sum(r.failures for r in result.rows)
    if failed:
        print(f"warning: {failed} trial failures", file=sys.stderr)
    return 0


def cmd_convergence(args) -> int:
    study = run_convergence_study(_config(args.config), args.trials, args.seed,
                                  WmmseSettings(t_max=args.t_max))
    _emit(study.to_csv(), args.out)
    for init in study.curves:
        print(f"{init:>6}: final {study.final_rate(init):.4f} bits, 99% after "
              f"{study.iterations_to(init, 0.99)} it, 98% after {study.iterations_to(init, 0.98)} it",
              file=sys.stderr)
    return 0


def cmd_overhead(args) -> int:
    report = overhead(_config(args.config))
    if args.out:
        Path(args.out).write_text(report.csv_header() + "\n" + report.csv_row() + "\n")
    print(report.table())
    return 0


def cmd_validate(args) -> int:
    """Short WMMSE run with every sub-step checked; exit status 1 on any violation."""
    config = _config(args.config)
    batch = stack_channels([generate_channels(config, trial_seed(args.seed, t)) for t in range(args.trials)])
    try:
        sol, traces = solve_wmmse_batch(batch, config, WmmseSettings(t_max=args.t_max), check=True)
    except MonotonicityError as exc:
        print(f"FAIL monotonicity: {exc}")
        return 1
    report = validate_solution(batch, sol, config)
    rates = np.array([t.rates[-1] for t in traces])
    print(f"config ok: {config}")
    print(f"{'PASS' if report.feasible else 'FAIL'} feasibility on {args.trials} trials")
    print(f"PASS monotone objective and rate; mean rate {rates.mean():.4f} bits")
    return 0 if report.feasible else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="raca", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=200):
        sp.add_argument("--config", help="JSON config (dBm powers, GHz carriers)")
        sp.add_argument("--trials", type=int, default=trials)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output CSV path (stdout if omitted)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--t-max", type=int, default=DESK_T_MAX, help="WMMSE iteration cap")

    run = sub.add_parser("run", help="Monte Carlo sweep")
    run.add_argument("experiment", choices=[e for e in EXPERIMENTS if e != "convergence"])
    run.add_argument("--systems", help=f"comma list from {','.join(SYSTEMS)}")
    run.add_argument("--values", type=float, nargs="+", help="override the sweep grid")
    common(run)
    run.set_defaults(func=cmd_run)

    conv = sub.add_parser("convergence", help="WMMSE convergence from three starting points")
    common(conv, trials=50)
    conv.set_defaults(func=cmd_convergence)

    ov = sub.add_parser("overhead", help="control-link entry counts")
    ov.add_argument("--config")
    ov.add_argument("--out")
    ov.set_defaults(func=cmd_overhead)

    val = sub.add_parser("validate", help="check a config and run a guarded WMMSE smoke test")
    common(val, trials=5)
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
