import json

import numpy as np
import pytest

from conftest import crandn
from raca.sysmodel import (
    BeamformerSolution,
    ConfigError,
    SystemConfig,
    achievable_rate,
    dbm_to_watt,
    effective_channel,
    noise_covariance,
    validate_solution,
    watt_to_dbm,
)


def random_solution(config, rng, scale=1e-2):
    return BeamformerSolution(scale * crandn(rng, config.n_u, config.n_s),
                              scale * crandn(rng, config.n_u, config.n_s),
                              crandn(rng, config.n_r, config.n_r))


def test_dbm_round_trip():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert watt_to_dbm(dbm_to_watt(-87.5)) == pytest.approx(-87.5)


@pytest.mark.parametrize("changes", [
    dict(n_s=3), dict(n_a=3), dict(n_u=0), dict(sigma_a2=0.0), dict(p_r=-1.0), dict(f_h=0.0),
])
def test_config_rejects(changes):
    with pytest.raises(ConfigError):
        SystemConfig(**changes)


def test_config_json_round_trip(tmp_path):
    config = SystemConfig(p_r=0.0, f_h=60.0)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config.to_dict()))
    back = SystemConfig.from_json(path)
    assert back.p_r == 0.0 and back.f_h == 60.0
    assert back.p_ua == pytest.approx(config.p_ua, rel=1e-12)
    with pytest.raises(ConfigError):
        SystemConfig.from_dict({"bogus": 1})


def test_effective_channel_blocks(channels, config, rng):
    sol = random_solution(config, rng)
    h = effective_channel(channels, sol)
    assert h.shape == (config.n_a, 2 * config.n_s)
    oracle = np.empty_like(h)
    relay = channels.H_ra_fL @ sol.psi @ channels.H_ur_fH @ sol.w_ur
    direct = channels.H_ua_fL @ sol.w_ua
    for i in range(config.n_a):
        for k in range(config.n_s):
            oracle[i, k] = direct[i, k]
            oracle[i, config.n_s + k] = relay[i, k]
    assert np.allclose(h, oracle, rtol=1e-14, atol=0)
    sol.psi[:] = 0
    assert not np.any(effective_channel(channels, sol)[:, config.n_s:])
    assert not np.any(effective_channel(channels, BeamformerSolution.zeros(config)))


def test_noise_covariance(channels, config, rng):
    zero = BeamformerSolution.zeros(config)
    assert np.allclose(noise_covariance(channels, zero, config), config.sigma_a2 * np.eye(config.n_a))
    sol = random_solution(config, rng, scale=1.0)
    j = noise_covariance(channels, sol, config)
    assert np.abs(j - j.conj().T).max() <= 1e-12 * np.abs(j).max()
    assert np.linalg.eigvalsh(j).min() >= config.sigma_a2 * (1 - 1e-9)


def test_rate_zero_solution(channels, config):
    assert achievable_rate(channels, BeamformerSolution.zeros(config), config) == 0.0


def test_rate_direct_only_matches_singular_values(channels, config, rng):
    sol = BeamformerSolution(1e-2 * crandn(rng, 2, 2), np.zeros((2, 2), complex), np.zeros((4, 4), complex))
    s = np.linalg.svd(channels.H_ua_fL @ sol.w_ua, compute_uv=False)
    oracle = np.sum(np.log2(1 + s**2 / config.sigma_a2))
    assert achievable_rate(channels, sol, config) == pytest.approx(oracle, rel=1e-12)


def test_rate_refuses_infeasible(channels, config, rng):
    with pytest.raises(ValueError):
        achievable_rate(channels, random_solution(config, rng, scale=10.0), config)


def test_validate_zero_and_overpowered(channels, config):
    zero = BeamformerSolution.zeros(config)
    rep = validate_solution(channels, zero, config)
    assert rep.feasible and (rep.slack_ua, rep.slack_ur, rep.slack_r) == (config.p_ua, config.p_ur, config.p_r)
    w = np.zeros((2, 2), complex)
    w[0, 0] = np.sqrt(2 * config.p_ua)
    rep = validate_solution(channels, BeamformerSolution(w, zero.w_ur, zero.psi), config)
    assert not rep.feasible
    assert rep.slack_ua == pytest.approx(-config.p_ua)
