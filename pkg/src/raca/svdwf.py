"""Separate SVD with water-filling for the direct and relay links.

The direct link is a point-to-point MIMO channel solved by SVD precoding and
classic water-filling.  The relay link is jointly diagonalized through the
SVDs of ``H_ur`` and ``H_ra``; the per-mode powers of UE and relay are then
found by alternating between two concave single-budget allocations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from raca import matops
from raca.channel import ChannelSet
from raca.sysmodel import (
    BeamformerSolution,
    OptimizerTrace,
    SystemConfig,
    TraceRow,
    achievable_rate,
    validate_solution,
)

__all__ = [
    "SubchannelAllocation",
    "SvdwfSettings",
    "RelayLinkResult",
    "waterfill",
    "optimize_direct",
    "subproblem_powers",
    "subproblem_objective",
    "allocate_subproblem",
    "relay_objective",
    "optimize_relaylink",
    "relay_powers_from_tilde",
    "solve_svdwf",
    "solve_svd",
]


@dataclass(frozen=True)
class SubchannelAllocation:
    cnr: np.ndarray
    power: np.ndarray
    budget: float
    water_level: float = 0.0
    status: str = "ok"


@dataclass(frozen=True)
class SvdwfSettings:
    eps_min: float = 1e-7
    t_max: int = 100
    wf_tol: float = 1e-10

    def __post_init__(self):
        if not (self.eps_min > 0 and self.t_max > 0 and self.wf_tol > 0):
            raise ValueError("SvdwfSettings fields must be positive")


def waterfill(cnr, budget: float, tol: float = 1e-10) -> SubchannelAllocation:
    """Maximize ``sum log(1 + cnr_i p_i)`` subject to ``sum p_i <= budget``.

    Solved exactly by scanning active sets from the strongest sub-channel:
    with ``k`` active channels the water level is
    ``(budget + sum_{i<k} 1/cnr_i) / k``.
    """
    cnr = np.asarray(cnr, dtype=float)
    power = np.zeros_like(cnr)
    if budget <= 0.0:
        return SubchannelAllocation(cnr, power, budget, 0.0, "no-budget")
    if not np.any(cnr > 0.0):
        return SubchannelAllocation(cnr, power, budget, 0.0, "no-gain")
    order = np.argsort(-cnr, kind="stable")
    # work with gains relative to the strongest channel so 1/cnr cannot overflow
    # for realistic spreads; the allocation is rescaled to the budget below
    top = cnr[order[0]]
    with np.errstate(over="ignore", divide="ignore"):
        inv = top / cnr[order][cnr[order] > 0.0]
    inv = inv[np.isfinite(inv)]
    scaled = budget * top
    # channel n stays active iff the budget fills every gap up to its floor;
    # powers as sums of differences avoid cancellation at tiny budgets
    k = 1
    for n in range(len(inv), 1, -1):
        if scaled > np.sum(inv[n - 1] - inv[:n]):
            k = n
            break
    gaps = inv[:k, None] - inv[None, :k]
    active = order[:k]
    power[active] = (scaled + gaps.sum(axis=0)) / k
    level = (scaled + inv[:k].sum()) / k
    # the closed form is exact up to rounding; restore the budget sum
    power[active] *= budget / power[active].sum()
    assert abs(power.sum() - budget) <= tol * max(budget, 1.0)
    return SubchannelAllocation(cnr, power, budget, level / top)


def optimize_direct(ch: ChannelSet, config: SystemConfig) -> tuple[np.ndarray, float]:
    """SVD-WF precoder for ``H_ua_fL``; returns ``(W_ua, rate_bits)``."""
    return _svd_wf_link(ch.H_ua_fL, config.n_s, config.p_ua, config.sigma_a2)


def _svd_wf_link(h: np.ndarray, n_s: int, budget: float, sigma2: float,
                 waterfilling: bool = True) -> tuple[np.ndarray, float]:
    dec = matops.svd(h)
    lam = np.zeros(n_s)
    m = min(n_s, len(dec.singular_values))
    lam[:m] = dec.singular_values[:m]
    cnr = lam**2 / sigma2
    if waterfilling:
        p = waterfill(cnr, budget).power
    else:
        p = np.full(n_s, budget / n_s) if budget > 0 else np.zeros(n_s)
    w = dec.V[:, :n_s] * np.sqrt(p)
    return w, float(np.sum(np.log2(1.0 + cnr * p)))


def subproblem_powers(a: np.ndarray, b: np.ndarray, nu: float) -> np.ndarray:
    """Stationary powers of the two-hop sub-problem for multiplier ``nu``."""
    p = np.zeros_like(a)
    on = (a > 0) & (b > 0)
    if nu <= 0:
        p[on] = np.inf
        return p
    ao, bo = a[on], b[on]
    x = 0.5 * ao * (np.sqrt(1.0 + 4.0 * bo / (ao * nu)) - 1.0)
    p[on] = np.maximum(x - 1.0, 0.0) / bo
    return p


def subproblem_objective(a, b, p) -> float:
    """``sum log(1 + a b p / (1 + a + b p))`` in nats."""
    a, b, p = (np.asarray(v, dtype=float) for v in (a, b, p))
    return float(np.sum(np.log1p(a * b * p / (1.0 + a + b * p))))


def allocate_subproblem(a, b, budget: float) -> np.ndarray:
    """Optimal powers for one half-step of the relay-link power allocation.

    The sum of powers is decreasing in the multiplier and every channel is
    switched off once ``nu >= a b / (1 + a)``, which gives the bracket.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("a and b must have the same length")
    on = (a > 0) & (b > 0)
    if budget <= 0.0 or not np.any(on):
        return np.zeros_like(a)
    if np.count_nonzero(on) == 1:
        p = np.zeros_like(a)
        p[on] = budget
        return p
    hi = float(np.max(a[on] * b[on] / (1.0 + a[on])))
    lo = hi
    while np.sum(subproblem_powers(a, b, lo)) <= budget:
        lo *= 0.5
        if lo < 1e-300:
            raise matops.NumericError("allocate_subproblem: bisection failed to bracket")
    nu = brentq(lambda v: np.sum(subproblem_powers(a, b, v)) - budget, lo, hi,
                xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    p = subproblem_powers(a, b, nu)
    return p * (budget / p.sum())


def relay_objective(gamma_ur, gamma_ra, pu_t, ppsi_t) -> float:
    """Relay-link rate in nats as a function of the substituted powers."""
    x = np.asarray(gamma_ur) * pu_t
    y = np.asarray(gamma_ra) * ppsi_t
    return float(np.sum(np.log1p(x * y / (1.0 + x + y))))


def relay_powers_from_tilde(lam_ur, pu_t, ppsi_t, sigma_r2: float) -> tuple[np.ndarray, np.ndarray]:
    """Undo the substitution: ``p_psi = ppsi_t / (lam_ur^2 p_u + sigma_r^2)``."""
    pu = np.asarray(pu_t, dtype=float).copy()
    ppsi = np.asarray(ppsi_t, dtype=float) / (np.asarray(lam_ur) ** 2 * pu + sigma_r2)
    return pu, ppsi


@dataclass
class RelayLinkResult:
    w_ur: np.ndarray
    psi: np.ndarray
    rate: float
    pu: np.ndarray
    ppsi: np.ndarray
    objective_history: list[float]
    power_history: list[tuple[np.ndarray, np.ndarray]]
    iterations: int
    converged: bool


def _relay_svds(ch: ChannelSet, n_s: int):
    d_ur = matops.svd(ch.H_ur_fH)
    d_ra = matops.svd(ch.H_ra_fL)
    lam_ur = np.zeros(n_s)
    lam_ra = np.zeros(n_s)
    lam_ur[: min(n_s, len(d_ur.singular_values))] = d_ur.singular_values[:n_s]
    lam_ra[: min(n_s, len(d_ra.singular_values))] = d_ra.singular_values[:n_s]
    return d_ur, d_ra, lam_ur, lam_ra


def _relay_matrices(d_ur, d_ra, n_s, pu, ppsi):
    w_ur = d_ur.V[:, :n_s] * np.sqrt(pu)
    psi = (d_ra.V[:, :n_s] * np.sqrt(ppsi)) @ d_ur.U[:, :n_s].conj().T
    return w_ur, psi


def _relay_rate_bits(lam_ur, lam_ra, pu, ppsi, config: SystemConfig) -> float:
    num = lam_ra**2 * ppsi * lam_ur**2 * pu
    den = config.sigma_r2 * lam_ra**2 * ppsi + config.sigma_a2
    return float(np.sum(np.log2(1.0 + num / den)))


def optimize_relaylink(ch: ChannelSet, config: SystemConfig,
                       settings: SvdwfSettings | None = None) -> RelayLinkResult:
    """Jointly diagonalizing relay-link design with alternating power allocation.

    Starts from a uniform relay allocation and alternates UE and relay
    half-steps (each using the other's latest powers) until both power
    vectors move less than ``eps_min`` in L1.
    """
    settings = settings or SvdwfSettings()
    n_s = config.n_s
    d_ur, d_ra, lam_ur, lam_ra = _relay_svds(ch, n_s)
    g_ur = lam_ur**2 / config.sigma_r2
    g_ra = lam_ra**2 / config.sigma_a2

    pu_t = np.zeros(n_s)
    ppsi_t = np.full(n_s, config.p_r / n_s)
    history = [relay_objective(g_ur, g_ra, pu_t, ppsi_t)]
    powers = []
    converged = False
    t = 0
    while t < settings.t_max:
        new_pu = allocate_subproblem(g_ra * ppsi_t, g_ur, config.p_ur)
        history.append(relay_objective(g_ur, g_ra, new_pu, ppsi_t))
        new_ppsi = allocate_subproblem(g_ur * new_pu, g_ra, config.p_r)
        history.append(relay_objective(g_ur, g_ra, new_pu, new_ppsi))
        eps1 = np.abs(new_pu - pu_t).sum()
        eps2 = np.abs(new_ppsi - ppsi_t).sum()
        pu_t, ppsi_t = new_pu, new_ppsi
        powers.append((pu_t, ppsi_t))
        t += 1
        if eps1 < settings.eps_min and eps2 < settings.eps_min:
            converged = True
            break

    pu, ppsi = relay_powers_from_tilde(lam_ur, pu_t, ppsi_t, config.sigma_r2)
    w_ur, psi = _relay_matrices(d_ur, d_ra, n_s, pu, ppsi)
    rate = _relay_rate_bits(lam_ur, lam_ra, pu, ppsi, config)
    return RelayLinkResult(w_ur, psi, rate, pu, ppsi, history, powers, t, converged)


def _trace_for(ch, sol, config, objective, iteration) -> OptimizerTrace:
    rep = validate_solution(ch, sol, config)
    trace = OptimizerTrace(converged=True, stop_reason="closed-form")
    trace.append(TraceRow(iteration, achievable_rate(ch, sol, config), objective,
                          rep.slack_ua, rep.slack_ur, rep.slack_r))
    return trace


def solve_svdwf(ch: ChannelSet, config: SystemConfig,
                settings: SvdwfSettings | None = None) -> tuple[BeamformerSolution, OptimizerTrace]:
    """Distributed design: each link optimized on its own, rate evaluated jointly.

    The reported rate accounts for the interference between the two links at
    the AP; it is not the sum of the two decoupled link rates.
    """
    settings = settings or SvdwfSettings()
    w_ua, _ = optimize_direct(ch, config)
    relay = optimize_relaylink(ch, config, settings)
    sol = BeamformerSolution(w_ua, relay.w_ur, relay.psi)

    d_ur, d_ra, lam_ur, _ = _relay_svds(ch, config.n_s)
    trace = OptimizerTrace(converged=relay.converged,
                           stop_reason="converged" if relay.converged else "t_max")
    for t, (pu_t, ppsi_t) in enumerate(relay.power_history, start=1):
        pu, ppsi = relay_powers_from_tilde(lam_ur, pu_t, ppsi_t, config.sigma_r2)
        w_ur, psi = _relay_matrices(d_ur, d_ra, config.n_s, pu, ppsi)
        iterate = BeamformerSolution(w_ua, w_ur, psi)
        rep = validate_solution(ch, iterate, config)
        trace.append(TraceRow(t, achievable_rate(ch, iterate, config),
                              relay.objective_history[2 * t],
                              rep.slack_ua, rep.slack_ur, rep.slack_r))
    return sol, trace


def solve_svd(ch: ChannelSet, config: SystemConfig) -> tuple[BeamformerSolution, OptimizerTrace]:
    """SVD precoding with equal power per sub-channel on both links."""
    n_s = config.n_s
    w_ua, _ = _svd_wf_link(ch.H_ua_fL, n_s, config.p_ua, config.sigma_a2, waterfilling=False)
    d_ur, d_ra, lam_ur, _ = _relay_svds(ch, n_s)
    pu_t = np.full(n_s, config.p_ur / n_s)
    ppsi_t = np.full(n_s, config.p_r / n_s)
    pu, ppsi = relay_powers_from_tilde(lam_ur, pu_t, ppsi_t, config.sigma_r2)
    w_ur, psi = _relay_matrices(d_ur, d_ra, n_s, pu, ppsi)
    sol = BeamformerSolution(w_ua, w_ur, psi)
    return sol, _trace_for(ch, sol, config, float("nan"), 0)
