import numpy as np
import pytest

from raca.baselines import (
    BaselineKind,
    budget_audit,
    ra_rate,
    solve_ca,
    solve_mimo,
    solve_ra,
)
from raca.channel import ChannelSet
from raca.svdwf import _svd_wf_link, waterfill
from raca.sysmodel import SystemConfig, dbm_to_watt
from raca.wmmse import WmmseSettings


@pytest.mark.parametrize("kind", list(BaselineKind))
def test_budgets_sum_to_raca_total(kind, config):
    assert sum(budget_audit(kind, config).values()) == pytest.approx(config.total_power, rel=1e-15)


def test_ca_identical_carriers_is_joint_waterfilling(channels):
    config = SystemConfig(p_ua=0.02, p_ur=0.01, p_r=0.01)
    same = ChannelSet(channels.H_ua_fL, channels.H_ur_fH, channels.H_ra_fL, channels.H_ua_fL, channels.H_ur_fL)
    rate, sol = solve_ca(same, config)
    cnr = np.linalg.svd(channels.H_ua_fL, compute_uv=False) ** 2 / config.sigma_a2
    joint = waterfill(np.concatenate([cnr, cnr]), config.total_power)
    oracle = np.sum(np.log2(1 + np.concatenate([cnr, cnr]) * joint.power))
    assert rate == pytest.approx(oracle, rel=1e-9)
    assert sum(sol.transmit_powers()) == pytest.approx(config.total_power)


def test_ca_without_high_band_budget_is_mimo(channels):
    config = SystemConfig(p_ur=0.0, p_r=0.0)
    rate, _ = solve_ca(channels, config)
    mimo, _ = solve_mimo(channels, config)
    assert rate == pytest.approx(mimo, rel=1e-12)


def test_mimo_zero_budget_and_rank_one(channels):
    config = SystemConfig(p_ua=0.0, p_ur=0.0, p_r=0.0)
    assert solve_mimo(channels, config)[0] == 0.0
    h = np.outer(np.ones(4), [1.0, 2.0]) * 1e-4
    rank_one = ChannelSet(h, channels.H_ur_fH, channels.H_ra_fL, h, channels.H_ur_fL)
    _, sol = solve_mimo(rank_one, SystemConfig())
    assert np.linalg.norm(sol.w[:, 1]) == 0.0


def test_mimo_high_snr_slope(channels):
    rates = [solve_mimo(channels, SystemConfig(sigma_a2=dbm_to_watt(s), sigma_r2=dbm_to_watt(s)))[0]
             for s in (-130.0, -140.0)]
    # two streams: about 2 log2(10) bits per 10 dB
    assert rates[1] - rates[0] == pytest.approx(2 * np.log2(10), rel=0.02)


def test_ra_psi_zero_matches_direct_waterfilling(channels, config):
    rate, sol, trace = solve_ra(channels, config, WmmseSettings(t_max=20000, eps_min=1e-12),
                                fix_psi_zero=True)
    _, oracle = _svd_wf_link(channels.H_ua_fL, config.n_s, config.p_ua + config.p_ur, config.sigma_a2)
    assert not np.any(sol.psi)
    assert rate == pytest.approx(oracle, abs=1e-6)


def test_ra_blocked_direct_link_obeys_cut_set(channels, config):
    blocked = channels.scaled(H_ua_fL=0.0)
    rate, sol, _ = solve_ra(blocked, config, WmmseSettings(t_max=500))
    _, hop1 = _svd_wf_link(channels.H_ur_fL, config.n_s, config.p_ua + config.p_ur, config.sigma_r2)
    _, hop2 = _svd_wf_link(channels.H_ra_fL, config.n_s, config.p_r, config.sigma_a2)
    assert 0 < rate <= min(hop1, hop2)
    assert rate == pytest.approx(ra_rate(blocked, sol, config))


def test_ra_respects_budgets(channels, config):
    _, sol, trace = solve_ra(channels, config, WmmseSettings(t_max=200))
    p_u, p_r = sol.transmit_powers(channels, config)
    assert p_u <= (config.p_ua + config.p_ur) * (1 + 1e-9)
    assert p_r <= config.p_r * (1 + 1e-9)
    assert np.all(np.diff(trace.rates) >= -1e-9)
