"""Comparison systems sharing the RACA total transmit power.

* CA-SVD-WF: two independent point-to-point links, ``f_L`` with ``P_ua`` and
  ``f_H`` (over the long UE-AP distance) with ``P_ur + P_r``.
* RA-WMMSE: a same-band AF relay whose output adds coherently to the direct
  path, ``(H_ra Psi H_ur^{f_L} + H_ua^{f_L}) W_u``, optimized by WMMSE.
* MIMO-SVD-WF: the direct ``f_L`` link alone with the pooled budget.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from raca import matops
from raca.channel import ChannelSet, stack_channels
from raca.svdwf import _svd_wf_link
from raca.sysmodel import OptimizerTrace, SystemConfig, mimo_rate
from raca.wmmse import (
    WmmseSettings,
    _take,
    alternate,
    power_quadratic,
    two_constraint_quadratic,
)

__all__ = [
    "BaselineKind",
    "CaSolution",
    "RaSolution",
    "MimoSolution",
    "budget_audit",
    "solve_ca",
    "solve_ra",
    "solve_ra_batch",
    "solve_mimo",
    "ra_channel",
    "ra_rate",
]


class BaselineKind(enum.Enum):
    CA_SVD_WF = "CA-SVD-WF"
    RA_WMMSE = "RA-WMMSE"
    MIMO_SVD_WF = "MIMO-SVD-WF"


def budget_audit(kind: BaselineKind, config: SystemConfig) -> dict[str, float]:
    """Per-node budgets a baseline works with; they always sum to the RACA total."""
    if kind is BaselineKind.CA_SVD_WF:
        return {"ua_fL": config.p_ua, "ua_fH": config.p_ur + config.p_r}
    if kind is BaselineKind.RA_WMMSE:
        return {"u_fL": config.p_ua + config.p_ur, "r": config.p_r}
    if kind is BaselineKind.MIMO_SVD_WF:
        return {"ua": config.p_ua + config.p_ur + config.p_r}
    raise ValueError(f"unknown baseline {kind!r}")


# -- CA and MIMO -----------------------------------------------------------------


@dataclass
class CaSolution:
    w_fl: np.ndarray
    w_fh: np.ndarray
    rate_fl: float
    rate_fh: float

    def transmit_powers(self) -> tuple[float, float]:
        return float(matops.fro2(self.w_fl)), float(matops.fro2(self.w_fh))


@dataclass
class MimoSolution:
    w: np.ndarray

    def transmit_powers(self) -> tuple[float]:
        return (float(matops.fro2(self.w)),)


def solve_ca(ch: ChannelSet, config: SystemConfig) -> tuple[float, CaSolution]:
    """Sum rate of two separately water-filled links, one per carrier."""
    budgets = budget_audit(BaselineKind.CA_SVD_WF, config)
    w_fl, r_fl = _svd_wf_link(ch.H_ua_fL, config.n_s, budgets["ua_fL"], config.sigma_a2)
    w_fh, r_fh = _svd_wf_link(ch.H_ua_fH, config.n_s, budgets["ua_fH"], config.sigma_a2)
    return r_fl + r_fh, CaSolution(w_fl, w_fh, r_fl, r_fh)


def solve_mimo(ch: ChannelSet, config: SystemConfig) -> tuple[float, MimoSolution]:
    """Direct ``f_L`` link with every watt of the RACA budget."""
    budget = budget_audit(BaselineKind.MIMO_SVD_WF, config)["ua"]
    w, rate = _svd_wf_link(ch.H_ua_fL, config.n_s, budget, config.sigma_a2)
    return rate, MimoSolution(w)


# -- RA-WMMSE --------------------------------------------------------------------


@dataclass
class RaSolution:
    w_u: np.ndarray
    psi: np.ndarray
    w_a: np.ndarray | None = None

    def copy(self) -> "RaSolution":
        return RaSolution(self.w_u.copy(), self.psi.copy(),
                          None if self.w_a is None else self.w_a.copy())

    def transmit_powers(self, ch: ChannelSet, config: SystemConfig) -> tuple[float, float]:
        return float(matops.fro2(self.w_u)), float(_ra_relay_power(ch, self, config))


def _ra_relay_power(ch, sol, config):
    return matops.fro2(sol.psi @ (ch.H_ur_fL @ sol.w_u)) + config.sigma_r2 * matops.fro2(sol.psi)


def ra_channel(ch: ChannelSet, sol: RaSolution, config: SystemConfig):
    """Effective channel and AP noise covariance of the same-band relay system."""
    g = ch.H_ra_fL @ sol.psi
    h = (g @ ch.H_ur_fL + ch.H_ua_fL) @ sol.w_u
    j = config.sigma_r2 * (g @ matops.ct(g)) + config.sigma_a2 * np.eye(g.shape[-2])
    return h, j


def ra_rate(ch: ChannelSet, sol: RaSolution, config: SystemConfig):
    rate = mimo_rate(*ra_channel(ch, sol, config))
    return float(rate) if np.ndim(rate) == 0 else rate


class _RaProblem:
    def __init__(self, fix_psi_zero: bool = False):
        self.fix_psi_zero = fix_psi_zero

    def channel(self, ch, sol, config):
        return ra_channel(ch, sol, config)

    def slacks(self, ch, sol, config):
        p_u = config.p_ua + config.p_ur
        return (p_u - matops.fro2(sol.w_u), np.full(sol.w_u.shape[:-2], np.nan),
                config.p_r - _ra_relay_power(ch, sol, config))

    def feasible(self, ch, sol, config, tol: float = 1e-9) -> bool:
        s_u, _, s_r = self.slacks(ch, sol, config)
        return bool(np.all(s_u >= -tol * (config.p_ua + config.p_ur)) and np.all(s_r >= -tol * config.p_r))

    def steps(self):
        def precoder(ch, state, config, settings):
            sol = state.sol
            gm = ch.H_ra_fL @ sol.psi @ ch.H_ur_fL + ch.H_ua_fL
            a = sol.w_a @ gm
            ah = matops.ct(a)
            psi_h = sol.psi @ ch.H_ur_fL
            residual = np.maximum(config.p_r - config.sigma_r2 * matops.fro2(sol.psi), 0.0)
            out = two_constraint_quadratic(ah @ state.z @ a, ah @ state.z, matops.ct(psi_h) @ psi_h,
                                           config.p_ua + config.p_ur, residual,
                                           tol=settings.bisect_tol, max_iter=settings.bisect_max_iter,
                                           nu2_start=state.nu2)
            state.nu2 = out.nu2
            sol.w_u = out.x

        def relay(ch, state, config, settings):
            sol = state.sol
            a = sol.w_a @ ch.H_ra_fL
            ah = matops.ct(a)
            d = ch.H_ur_fL @ sol.w_u
            f = sol.w_a @ ch.H_ua_fL @ sol.w_u - np.eye(config.n_s)
            g = -(ah @ state.z @ f @ matops.ct(d))
            m = matops.hermitian_part(d @ matops.ct(d) + config.sigma_r2 * np.eye(config.n_r))
            sol.psi = power_quadratic(ah @ state.z @ a, g, config.p_r, m=m,
                                      max_iter=settings.bisect_max_iter).x

        steps = [("W_u", precoder)]
        if not self.fix_psi_zero:
            steps.append(("Psi", relay))
        return steps


def _ra_initial(ch: ChannelSet, config: SystemConfig, mode: str, seed: int,
                fix_psi_zero: bool) -> RaSolution:
    """Direct-link SVD-WF precoder (UE-relay link if the direct one is silent);
    relay matched to the ``H_ur``/``H_ra`` modes and scaled to its full budget."""
    p_u = config.p_ua + config.p_ur
    n_s, n_r = config.n_s, config.n_r
    if mode == "random":
        rng = np.random.default_rng([seed, int(ch.seed)])
        w_u = matops.ct(rng.standard_normal((n_s, config.n_u)) + 1j * rng.standard_normal((n_s, config.n_u)))
        psi = rng.standard_normal((n_r, n_r)) + 1j * rng.standard_normal((n_r, n_r))
        w_u *= np.sqrt(p_u / matops.fro2(w_u))
    else:
        w_u, _ = _svd_wf_link(ch.H_ua_fL, n_s, p_u, config.sigma_a2, waterfilling=mode == "svdwf")
        if not np.any(w_u):
            # a silent direct link would pin the iteration at zero; aim at the relay
            w_u, _ = _svd_wf_link(ch.H_ur_fL, n_s, p_u, config.sigma_r2, waterfilling=mode == "svdwf")
        d_ur, d_ra = matops.svd(ch.H_ur_fL), matops.svd(ch.H_ra_fL)
        psi = d_ra.V[:, :n_s] @ matops.ct(d_ur.U[:, :n_s])
    if fix_psi_zero:
        return RaSolution(w_u, np.zeros((n_r, n_r), complex))
    unit = _ra_relay_power(ch, RaSolution(w_u, psi), config)
    psi = psi * np.sqrt(config.p_r / unit)
    return RaSolution(w_u, psi)


def solve_ra_batch(ch: ChannelSet, config: SystemConfig, settings: WmmseSettings | None = None,
                   fix_psi_zero: bool = False) -> tuple[np.ndarray, RaSolution, list[OptimizerTrace]]:
    """RA-WMMSE over a stacked batch of realizations."""
    settings = settings or WmmseSettings()
    inits = [_ra_initial(c, config, settings.init_mode, settings.seed, fix_psi_zero) for c in ch.unstack()]
    init = RaSolution(np.stack([s.w_u for s in inits]), np.stack([s.psi for s in inits]))
    sol, traces = alternate(_RaProblem(fix_psi_zero), ch, config, settings, init)
    return np.asarray(ra_rate(ch, sol, config)), sol, traces


def solve_ra(ch: ChannelSet, config: SystemConfig, settings: WmmseSettings | None = None,
             fix_psi_zero: bool = False) -> tuple[float, RaSolution, OptimizerTrace]:
    """RA-WMMSE for one realization; ``fix_psi_zero`` switches the relay off."""
    rates, sol, traces = solve_ra_batch(stack_channels([ch]), config, settings, fix_psi_zero)
    return float(rates[0]), _take(sol, 0), traces[0]
