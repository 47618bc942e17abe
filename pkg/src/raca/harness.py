"""Monte Carlo sweeps over noise, carrier, and power splits.

Trials are independent.  Each trial's channels come from a seed derived from
``(seed, trial)`` only, so every sweep point sees the same small-scale fading
and results do not depend on how trials are chunked across workers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from raca import matops
from raca.baselines import (
    BaselineKind,
    CaSolution,
    MimoSolution,
    RaSolution,
    ra_channel,
    ra_rate,
    solve_ca,
    solve_mimo,
    solve_ra_batch,
)
from raca.channel import ChannelSet, generate_channels, stack_channels
from raca.metrics import RACA, PowerModel, energy_report
from raca.svdwf import solve_svd, solve_svdwf
from raca.sysmodel import (
    BeamformerSolution,
    SystemConfig,
    achievable_rate,
    dbm_to_watt,
    effective_channel,
    noise_covariance,
    power_usage,
)
from raca.wmmse import WmmseSettings, initial_solution, solve_wmmse_batch

__all__ = [
    "EXPERIMENTS",
    "SYSTEMS",
    "DEFAULT_GRIDS",
    "STREAM_THRESHOLD_BITS",
    "ExperimentSpec",
    "ResultRow",
    "ExperimentResult",
    "TrialOutcome",
    "ConvergenceStudy",
    "trial_seed",
    "split_total",
    "configure",
    "count_streams",
    "streams_of",
    "solve_trials",
    "canonical_form",
    "run_experiment",
    "run_convergence_study",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("convergence", "rate_vs_noise", "streams_vs_noise", "energy", "freq_sweep",
               "ratio_ue_relay", "ratio_fl_fh")
SYSTEMS = ("RACA-WMMSE", "RACA-SVD-WF", "RACA-SVD", "CA-SVD-WF", "RA-WMMSE", "MIMO-SVD-WF")
STREAM_THRESHOLD_BITS = 0.05
DESK_T_MAX = 3000

_NOISE_GRID = tuple(float(v) for v in range(-110, -65, 5))
_RATIO_GRID = tuple(round(0.05 * i, 2) for i in range(21))
DEFAULT_GRIDS = {
    "convergence": (-90.0,),
    "rate_vs_noise": _NOISE_GRID,
    "streams_vs_noise": _NOISE_GRID,
    "energy": _NOISE_GRID,
    "freq_sweep": (10.0, 20.0, 28.0, 40.0, 60.0, 80.0, 100.0),
    "ratio_ue_relay": _RATIO_GRID,
    "ratio_fl_fh": _RATIO_GRID,
}


def trial_seed(seed: int, trial: int) -> int:
    """Channel seed of one trial, shared by all sweep points."""
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1, np.uint64)[0])


def split_total(total: float, ratio: float) -> tuple[float, float]:
    """``(ratio * total, rest)`` whose floating-point sum is exactly ``total``."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    # the larger share lies in [total / 2, total], so total - larger is exact
    # (Sterbenz) and the two shares add up to total with no rounding
    larger = min(max(ratio, 1.0 - ratio) * total, total)
    smaller = total - larger
    return (larger, smaller) if ratio >= 0.5 else (smaller, larger)


def configure(base: SystemConfig, experiment: str, value: float) -> SystemConfig:
    """Apply one sweep value to the base configuration."""
    if experiment in ("rate_vs_noise", "streams_vs_noise", "energy", "convergence"):
        noise = dbm_to_watt(value)
        return base.replace(sigma_r2=noise, sigma_a2=noise)
    if experiment == "freq_sweep":
        return base.replace(f_h=float(value))
    if experiment == "ratio_ue_relay":
        p_ur, p_r = split_total(base.p_ur + base.p_r, value)
        return base.replace(p_ur=p_ur, p_r=p_r)
    if experiment == "ratio_fl_fh":
        p_ua, p_ur = split_total(base.p_ua + base.p_ur, value)
        return base.replace(p_ua=p_ua, p_ur=p_ur)
    raise ValueError(f"unknown experiment {experiment!r}")


# -- stream counting ----------------------------------------------------------


def streams_of(h: np.ndarray, j: np.ndarray, threshold: float = STREAM_THRESHOLD_BITS) -> int:
    """Modes of the whitened channel ``J^{-1/2} H`` carrying more than ``threshold`` bits."""
    if not np.any(h):
        return 0
    gram = matops.hermitian_part(matops.ct(h) @ matops.hermitian_solve(j, h))
    lam = np.linalg.eigvalsh(gram)
    return int(np.count_nonzero(np.log2(1.0 + np.maximum(lam, 0.0)) > threshold))


def count_streams(ch: ChannelSet, sol, config: SystemConfig,
                  threshold: float = STREAM_THRESHOLD_BITS) -> int:
    """Effective number of data streams delivered by a solution of any system."""
    white = config.sigma_a2 * np.eye(config.n_a)
    if isinstance(sol, BeamformerSolution):
        return streams_of(effective_channel(ch, sol), noise_covariance(ch, sol, config), threshold)
    if isinstance(sol, RaSolution):
        return streams_of(*ra_channel(ch, sol, config), threshold)
    if isinstance(sol, CaSolution):
        return (streams_of(ch.H_ua_fL @ sol.w_fl, white, threshold)
                + streams_of(ch.H_ua_fH @ sol.w_fh, white, threshold))
    if isinstance(sol, MimoSolution):
        return streams_of(ch.H_ua_fL @ sol.w, white, threshold)
    raise TypeError(f"unsupported solution type {type(sol).__name__}")


# -- solving one batch of trials --------------------------------------------------


@dataclass(frozen=True)
class TrialOutcome:
    rate: float
    streams: int
    ee_sys: float
    ee_u: float
    power: float


def _outcome(kind, rate, powers, ch, sol, config, model) -> TrialOutcome:
    rep = energy_report(kind, rate, powers, model)
    return TrialOutcome(float(rate), count_streams(ch, sol, config), rep.ee_sys, rep.ee_u,
                        float(sum(powers)))


def _raca_outcome(ch, sol, config, model):
    rate = achievable_rate(ch, sol, config)
    powers = tuple(float(p) for p in power_usage(ch, sol, config))
    return _outcome(RACA, rate, powers, ch, sol, config, model)


def _one(system: str, ch: ChannelSet, config: SystemConfig, settings: WmmseSettings,
         model: PowerModel) -> TrialOutcome:
    if system in ITERATIVE:
        return _solve_iterative(system, [(ch, config)], settings, model)[0]
    if system == "RACA-SVD-WF":
        return _raca_outcome(ch, solve_svdwf(ch, config)[0], config, model)
    if system == "RACA-SVD":
        return _raca_outcome(ch, solve_svd(ch, config)[0], config, model)
    if system == "CA-SVD-WF":
        rate, sol = solve_ca(ch, config)
        return _outcome(BaselineKind.CA_SVD_WF, rate, sol.transmit_powers(), ch, sol, config, model)
    if system == "MIMO-SVD-WF":
        rate, sol = solve_mimo(ch, config)
        return _outcome(BaselineKind.MIMO_SVD_WF, rate, sol.transmit_powers(), ch, sol, config, model)
    raise ValueError(f"unknown system {system!r}")


ITERATIVE = ("RACA-WMMSE", "RA-WMMSE")


def canonical_form(system: str, ch: ChannelSet, config: SystemConfig):
    """Equivalent problem with unit budgets and unit noise for an iterative system.

    Each budget and noise level is folded into the channel it multiplies, so
    realizations from different sweep points share one configuration and can
    be solved as a single batch.  Every block update is an exact minimization
    and the change of variables rescales each block on its own, so the
    iterates correspond one to one.  Returns the scaled channels, the shared
    configuration and the factors mapping the solution back.
    """
    ra, rr = math.sqrt(config.sigma_a2), math.sqrt(config.sigma_r2)
    relay = math.sqrt(config.p_r)
    dims = dict(n_u=config.n_u, n_r=config.n_r, n_a=config.n_a, n_s=config.n_s, sigma_r2=1.0, sigma_a2=1.0)
    if system == "RACA-WMMSE":
        ua, ur = math.sqrt(config.p_ua), math.sqrt(config.p_ur)
        scaled = ch.scaled(H_ua_fL=ua / ra, H_ur_fH=ur / rr, H_ra_fL=relay / ra)
        return scaled, SystemConfig(p_ua=1.0, p_ur=1.0, p_r=1.0, **dims), (ua, ur, relay / rr)
    if system == "RA-WMMSE":
        ue = math.sqrt(config.p_ua + config.p_ur)
        scaled = ch.scaled(H_ua_fL=ue / ra, H_ur_fL=ue / rr, H_ra_fL=relay / ra)
        return scaled, SystemConfig(p_ua=0.5, p_ur=0.5, p_r=1.0, **dims), (ue, relay / rr)
    raise ValueError(f"{system!r} has no canonical form")


def _solve_iterative(system, pairs, settings, model):
    forms = [canonical_form(system, c, cfg) for c, cfg in pairs]
    unit = forms[0][1]
    if any(f[1] != unit for f in forms):
        raise ValueError("realizations in one batch must share antenna dimensions")
    batch = stack_channels([f[0] for f in forms])
    out = []
    if system == "RACA-WMMSE":
        sol, _ = solve_wmmse_batch(batch, unit, settings)
        for k, ((c, cfg), (_, _, (a, b, r))) in enumerate(zip(pairs, forms)):
            one = BeamformerSolution(a * sol.w_ua[k], b * sol.w_ur[k], r * sol.psi[k])
            out.append(_raca_outcome(c, one, cfg, model))
        return out
    _, sol, _ = solve_ra_batch(batch, unit, settings)
    for k, ((c, cfg), (_, _, (a, r))) in enumerate(zip(pairs, forms)):
        one = RaSolution(a * sol.w_u[k], r * sol.psi[k])
        out.append(_outcome(BaselineKind.RA_WMMSE, ra_rate(c, one, cfg), one.transmit_powers(c, cfg),
                            c, one, cfg, model))
    return out


_FAILURES = (ArithmeticError, ValueError, np.linalg.LinAlgError)


def _solve_pairs(system: str, pairs: list[tuple[ChannelSet, SystemConfig]], settings: WmmseSettings,
                 model: PowerModel) -> list[TrialOutcome | Exception]:
    if system in ITERATIVE and len(pairs) > 1:
        try:
            return _solve_iterative(system, pairs, settings, model)
        except _FAILURES as exc:
            log.warning("%s batch failed (%s); retrying trials individually", system, exc)
    out = []
    for c, cfg in pairs:
        try:
            out.append(_one(system, c, cfg, settings, model))
        except _FAILURES as exc:
            log.warning("%s failed on channel seed %s: %s", system, c.seed, exc)
            out.append(exc)
    return out


def solve_trials(system: str, channels: list[ChannelSet], config: SystemConfig,
                 settings: WmmseSettings | None = None,
                 model: PowerModel | None = None) -> list[TrialOutcome | Exception]:
    """Solve ``system`` on each realization; failures are returned, not raised.

    Iterative systems run the whole list as one batch in canonical form; if
    that batch fails the trials are retried one by one so a single bad
    realization is isolated.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; choose from {SYSTEMS}")
    return _solve_pairs(system, [(c, config) for c in channels],
                        settings or WmmseSettings(t_max=DESK_T_MAX), model or PowerModel())


# -- experiments ----------------------------------------------------------------


@dataclass
class ExperimentSpec:
    experiment: str
    base_config: SystemConfig = field(default_factory=SystemConfig)
    sweep_values: tuple[float, ...] | None = None
    n_trials: int = 200
    seed: int = 0
    systems: tuple[str, ...] = SYSTEMS
    output_path: str | None = None
    threads: int = 1
    settings: WmmseSettings = field(default_factory=lambda: WmmseSettings(t_max=DESK_T_MAX))
    power_model: PowerModel = field(default_factory=PowerModel)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS or self.experiment == "convergence":
            raise ValueError(f"experiment must be one of {EXPERIMENTS[1:]}, got {self.experiment!r}")
        if self.sweep_values is None:
            self.sweep_values = DEFAULT_GRIDS[self.experiment]
        self.sweep_values = tuple(float(v) for v in self.sweep_values)
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if list(self.sweep_values) != sorted(self.sweep_values):
            raise ValueError("sweep_values must be sorted")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.systems = tuple(self.systems)
        for s in self.systems:
            if s not in SYSTEMS:
                raise ValueError(f"unknown system {s!r}; choose from {SYSTEMS}")


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    system: str
    mean_rate: float
    stderr: float
    mean_streams: float
    mean_EE_sys: float
    mean_EE_u: float
    mean_powers: float
    failures: int


COLUMNS = tuple(ResultRow.__dataclass_fields__)


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[ResultRow]
    outcomes: dict[tuple[float, str], list[TrialOutcome | Exception]] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([f"{r.sweep_value:.10g}", r.system]
                       + [f"{getattr(r, c):.10g}" for c in COLUMNS[2:-1]] + [r.failures])
        return buf.getvalue()

    def column(self, system: str, name: str = "mean_rate") -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows if r.system == system])

    def sweep(self, system: str) -> np.ndarray:
        return np.array([r.sweep_value for r in self.rows if r.system == system])


def aggregate(value: float, system: str, outcomes: list[TrialOutcome | Exception]) -> ResultRow:
    ok = [o for o in outcomes if isinstance(o, TrialOutcome)]
    failures = len(outcomes) - len(ok)
    if not ok:
        nan = float("nan")
        return ResultRow(value, system, nan, nan, nan, nan, nan, nan, failures)
    rates = np.array([o.rate for o in ok])
    stderr = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0

    def mean(name):
        return float(np.mean([getattr(o, name) for o in ok]))

    return ResultRow(value, system, float(rates.mean()), stderr, mean("streams"), mean("ee_sys"),
                     mean("ee_u"), mean("power"), failures)


def _chunks(n: int, parts: int) -> list[range]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Sweep ``spec.sweep_values``; one row per (value, system) in that order.

    All sweep points of a system are solved together, so iterative systems
    get one large batch instead of one per point.
    """
    seeds = [trial_seed(spec.seed, t) for t in range(spec.n_trials)]
    configs = [configure(spec.base_config, spec.experiment, v) for v in spec.sweep_values]
    pairs = [(generate_channels(cfg, s), cfg) for cfg in configs for s in seeds]
    outcomes = {}
    with ThreadPoolExecutor(max_workers=spec.threads) as pool:
        for system in spec.systems:
            parts = pool.map(lambda r: _solve_pairs(system, [pairs[k] for k in r], spec.settings,
                                                    spec.power_model),
                             _chunks(len(pairs), spec.threads))
            merged = [o for part in parts for o in part]
            for i, value in enumerate(spec.sweep_values):
                outcomes[(value, system)] = merged[i * spec.n_trials:(i + 1) * spec.n_trials]
    rows = []
    for value in spec.sweep_values:
        for system in spec.systems:
            rows.append(aggregate(value, system, outcomes[(value, system)]))
            log.info("%s=%g %s: %.4f", spec.experiment, value, system, rows[-1].mean_rate)
    result = ExperimentResult(spec.experiment, rows, outcomes)
    if spec.output_path:
        Path(spec.output_path).write_text(result.to_csv())
    return result


# -- convergence study ------------------------------------------------------------


INITS = ("random", "svd", "svdwf")


@dataclass
class ConvergenceStudy:
    """Rate-versus-iteration curves per initialization (trials x iterations,
    padded with each trial's final rate)."""

    curves: dict[str, np.ndarray]
    iterations: dict[str, np.ndarray]

    def mean_curve(self, init: str) -> np.ndarray:
        return self.curves[init].mean(axis=0)

    def iterations_to(self, init: str, fraction: float) -> int:
        """First iteration where the mean curve reaches ``fraction`` of its final value."""
        c = self.mean_curve(init)
        return int(np.argmax(c >= fraction * c[-1]))

    def final_rate(self, init: str) -> float:
        return float(self.mean_curve(init)[-1])

    def start_order_fraction(self) -> float:
        """Share of trials whose iteration-0 rates satisfy SVD-WF >= SVD >= random."""
        r0 = {k: v[:, 0] for k, v in self.curves.items()}
        ok = (r0["svdwf"] >= r0["svd"]) & (r0["svd"] >= r0["random"])
        return float(np.mean(ok))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration"] + [f"mean_rate_{k}" for k in self.curves])
        means = [self.mean_curve(k) for k in self.curves]
        for t in range(len(means[0])):
            w.writerow([t] + [f"{m[t]:.10g}" for m in means])
        return buf.getvalue()


def run_convergence_study(config: SystemConfig, n_trials: int, seed: int = 0,
                          settings: WmmseSettings | None = None) -> ConvergenceStudy:
    """WMMSE from random, SVD and SVD-WF starting points on the same channels."""
    settings = settings or WmmseSettings(t_max=DESK_T_MAX)
    batch = stack_channels([generate_channels(config, trial_seed(seed, t)) for t in range(n_trials)])
    raw, iters = {}, {}
    for init in INITS:
        start = initial_solution(batch, config, init, settings.seed)
        _, traces = solve_wmmse_batch(batch, config, settings, init=start)
        raw[init] = [t.rates for t in traces]
        iters[init] = np.array([t.iterations for t in traces])
    length = max(len(r) for rates in raw.values() for r in rates)
    curves = {k: np.array([np.pad(r, (0, length - len(r)), mode="edge") for r in v]) for k, v in raw.items()}
    return ConvergenceStudy(curves, iters)
