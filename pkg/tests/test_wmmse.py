import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from conftest import crandn, spd
from raca import matops
from raca.channel import generate_channels, stack_channels
from raca.svdwf import solve_svdwf
from raca.sysmodel import (
    SystemConfig,
    achievable_rate,
    effective_channel,
    noise_covariance,
    validate_solution,
)
from raca.wmmse import (
    WmmseSettings,
    WmmseState,
    initial_solution,
    inverse_weight,
    mmse_receiver,
    mse_matrix,
    power_quadratic,
    secular_root,
    solve_wmmse,
    solve_wmmse_batch,
    two_constraint_quadratic,
    update_precoder_direct,
    update_precoder_relaylink,
    update_receiver,
    update_relay_matrix,
    update_weight,
    wmmse_objective,
)


def quad(b, g, x, m=None):
    m = np.eye(x.shape[1]) if m is None else m
    return float(np.real(np.trace(b @ x @ m @ x.conj().T) - 2 * np.trace(x.conj().T @ g)))


def prepared_state(ch, config, sol):
    state = WmmseState(sol=sol.copy(), z=None, e=None)
    state.sol.w_a = update_receiver(ch, state, config)
    state.e = mse_matrix(ch, state.sol, config)
    state.z = update_weight(state)
    return state


# -- secular equation ------------------------------------------------------------


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_secular_root_matches_brentq(seed, n):
    rng = np.random.default_rng(seed)
    lam = rng.exponential(1.0, n) * (rng.random(n) > 0.2)
    y = rng.exponential(1.0, n)
    budget = rng.uniform(0.01, 10.0)
    nu = float(secular_root(lam, y, budget))
    value = lambda v: np.sum(y / (lam + v) ** 2) - budget
    if nu == 0.0:
        assert np.all(lam > 0) and value(0.0) <= 0
    else:
        assert nu == pytest.approx(brentq(value, 1e-150, 1e6, xtol=1e-300, rtol=1e-15), rel=1e-10)


def test_secular_root_edge_cases():
    assert np.isinf(secular_root(np.array([0.0, 1.0]), np.array([1.0, 0.0]), 0.0))
    assert secular_root(np.array([1.0]), np.array([0.0]), 0.0) == 0.0
    # pole at zero: sum y / nu^2 = budget in closed form
    assert secular_root(np.zeros(2), np.array([2.0, 2.0]), 1.0) == pytest.approx(2.0)


# -- quadratic block solvers ---------------------------------------------------


def test_power_quadratic_zero_linear_term(rng):
    out = power_quadratic(spd(rng, 3), np.zeros((3, 2)), 1.0)
    assert not np.any(out.x) and out.nu == 0.0


def test_power_quadratic_inactive_returns_unconstrained(rng):
    b, g = spd(rng, 3, floor=1.0), 0.01 * crandn(rng, 3, 2)
    out = power_quadratic(b, g, 100.0)
    assert out.nu == 0.0
    assert np.allclose(out.x, np.linalg.solve(b, g))


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_power_quadratic_grid_oracle(seed, weighted):
    rng = np.random.default_rng(seed)
    b = crandn(rng, 3, 2) @ crandn(rng, 2, 3)
    b = b @ b.conj().T
    g = crandn(rng, 3, 2)
    m = spd(rng, 2) if weighted else None
    budget = 0.05
    out = power_quadratic(b, g, budget, m=m)
    mm = np.eye(2) if m is None else m
    used = np.real(np.trace(out.x @ mm @ out.x.conj().T))
    assert used == pytest.approx(budget, rel=1e-8)
    best = np.inf
    for nu in np.geomspace(1e-6, 1e3, 4000):
        x = np.linalg.solve(b + nu * np.eye(3), g @ np.linalg.inv(mm))
        if np.real(np.trace(x @ mm @ x.conj().T)) <= budget:
            best = min(best, quad(b, g, x, m))
    assert quad(b, g, out.x, m) <= best + 1e-6


@given(st.integers(0, 2**32 - 1))
def test_two_constraint_kkt(seed):
    rng = np.random.default_rng(seed)
    a = crandn(rng, 4, 2)
    b, g = a.conj().T @ a, crandn(rng, 2, 2)
    t = crandn(rng, 3, 2)
    bt = t.conj().T @ t
    p1, p2 = rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)
    out = two_constraint_quadratic(b, g, bt, p1, p2)
    x, nu1, nu2 = out.x, float(out.nu), float(out.nu2)
    v1, v2 = matops.fro2(x), np.real(np.trace(x.conj().T @ bt @ x))
    scale = np.linalg.norm(g)
    assert v1 <= p1 * (1 + 1e-9) and v2 <= p2 * (1 + 1e-9)
    assert np.linalg.norm((b + nu1 * np.eye(2) + nu2 * bt) @ x - g) <= 1e-6 * scale
    assert nu1 * abs(v1 - p1) <= 1e-6 * scale**2 and nu2 * abs(v2 - p2) <= 1e-6 * scale**2


def test_two_constraint_degenerate(rng):
    a = crandn(rng, 4, 2)
    b, g = a.conj().T @ a, crandn(rng, 2, 2)
    one = power_quadratic(b, g, 0.3)
    two = two_constraint_quadratic(b, g, np.zeros((2, 2)), 0.3, 1.0)
    assert np.allclose(one.x, two.x) and two.nu2 == 0.0
    zero = two_constraint_quadratic(b, np.zeros((2, 2)), np.eye(2), 0.3, 1.0)
    assert not np.any(zero.x) and zero.nu == 0.0 and zero.nu2 == 0.0


# -- receiver, MSE, weight ---------------------------------------------------------


def test_mse_trivial(channels, config):
    sol, _ = solve_svdwf(channels, config)
    sol.w_a = np.zeros((2 * config.n_s, config.n_a), complex)
    assert np.allclose(mse_matrix(channels, sol, config), np.eye(2 * config.n_s))


def test_mse_at_mmse_receiver(channels, config):
    sol, _ = solve_svdwf(channels, config)
    h, j = effective_channel(channels, sol), noise_covariance(channels, sol, config)
    sol.w_a = mmse_receiver(h, j)
    closed = np.linalg.inv(np.eye(h.shape[1]) + h.conj().T @ np.linalg.solve(j, h))
    assert np.abs(mse_matrix(channels, sol, config) - closed).max() <= 1e-10


def test_receiver_trivial():
    assert not np.any(mmse_receiver(np.zeros((2, 1)), np.eye(2)))
    assert mmse_receiver(np.ones((1, 1)), np.eye(1))[0, 0] == pytest.approx(0.5)


def test_perfect_channel_limit():
    for eps in (1e-2, 1e-6):
        w = mmse_receiver(np.eye(2), eps * np.eye(2))
        d = w - np.eye(2)
        e = d @ d.conj().T + eps * w @ w.conj().T
        assert np.abs(e).max() <= 2 * eps


def test_receiver_is_stationary(channels, config, rng):
    sol, _ = solve_svdwf(channels, config)
    h, j = effective_channel(channels, sol), noise_covariance(channels, sol, config)
    z = spd(rng, 2 * config.n_s)
    w = mmse_receiver(h, j)

    def f(wa):
        d = wa @ h - np.eye(h.shape[1])
        return np.real(np.trace(z @ (d @ d.conj().T + wa @ j @ wa.conj().T)))

    scale = np.abs(w).max()
    for k in range(5):
        step = 1e-6 * scale * crandn(np.random.default_rng(k), *w.shape)
        slope = (f(w + step) - f(w - step)) / 2
        assert abs(slope) <= 1e-8 * max(1.0, f(w))


def test_weight_trivial_and_identity(rng):
    assert np.allclose(inverse_weight(np.eye(3)), np.eye(3))
    assert np.allclose(inverse_weight(0.5 * np.eye(2)), 2 * np.eye(2))
    e = spd(rng, 4)
    assert np.abs(inverse_weight(e) @ e - np.eye(4)).max() <= 1e-10


def test_rate_identity_after_receiver_and_weight(channels, config):
    sol, _ = solve_svdwf(channels, config)
    state = prepared_state(channels, config, sol)
    rate = achievable_rate(channels, sol, config)
    assert abs(rate + matops.logdet_hermitian(state.e, base=2.0)) <= 1e-8
    obj = wmmse_objective(state.z, state.e)
    assert obj == pytest.approx(2 * config.n_s - np.log(2) * rate, abs=1e-8)


# -- per-block updates ------------------------------------------------------------


def test_direct_update_zero_receiver(channels, config):
    sol, _ = solve_svdwf(channels, config)
    state = prepared_state(channels, config, sol)
    state.sol.w_a = np.zeros_like(state.sol.w_a)
    assert not np.any(update_precoder_direct(channels, state, config))


def test_direct_update_active_budget(channels, config):
    sol, _ = solve_svdwf(channels, config)
    state = prepared_state(channels, config, sol)
    w = update_precoder_direct(channels, state, config)
    assert matops.fro2(w) == pytest.approx(config.p_ua, rel=1e-8)


def test_relaylink_update_psi_zero_reduces_to_single_constraint(channels, config):
    sol, _ = solve_svdwf(channels, config)
    state = prepared_state(channels, config, sol)
    state.sol.psi = np.zeros_like(sol.psi)
    w = update_precoder_relaylink(channels, state, config)
    # relayed columns see no channel, so the optimum sends nothing there
    assert not np.any(w)


def test_relaylink_update_feasible_and_descends(channels, config):
    sol, _ = solve_svdwf(channels, config)
    state = prepared_state(channels, config, sol)
    before = wmmse_objective(state.z, state.e)
    state.sol.w_ur = update_precoder_relaylink(channels, state, config)
    assert validate_solution(channels, state.sol, config).feasible
    assert wmmse_objective(state.z, mse_matrix(channels, state.sol, config)) <= before + 1e-12


def test_relay_update_active_budget(channels, config):
    sol, _ = solve_svdwf(channels, config)
    state = prepared_state(channels, config, sol)
    state.sol.psi = update_relay_matrix(channels, state, config)
    assert validate_solution(channels, state.sol, config).power_r == pytest.approx(config.p_r, rel=1e-8)
    state.sol.w_a = np.zeros_like(state.sol.w_a)
    assert not np.any(update_relay_matrix(channels, state, config))


# -- full solver -------------------------------------------------------------------


def test_wmmse_improves_on_svdwf(channels, config):
    sol, trace = solve_wmmse(channels, config, WmmseSettings(t_max=400), check=True)
    start = achievable_rate(channels, solve_svdwf(channels, config)[0], config)
    rep = validate_solution(channels, sol, config)
    assert rep.feasible and rep.active(config)
    assert trace.rates[0] == pytest.approx(start)
    assert achievable_rate(channels, sol, config) >= start
    assert np.all(np.diff(trace.rates) >= -1e-9)


def test_wmmse_noise_dominated(channels):
    config = SystemConfig(sigma_r2=1e3, sigma_a2=1e3)
    sol, trace = solve_wmmse(channels, config, WmmseSettings(t_max=50))
    assert achievable_rate(channels, sol, config) < 1e-6
    assert trace.rows


def test_batch_matches_single(config):
    chs = [generate_channels(config, s) for s in (1, 2, 3)]
    settings = WmmseSettings(t_max=60)
    batch, _ = solve_wmmse_batch(stack_channels(chs), config, settings)
    for k, c in enumerate(chs):
        one, _ = solve_wmmse(c, config, settings)
        assert np.array_equal(one.w_ur, batch.w_ur[k])


def test_random_init_is_feasible_and_keyed(config):
    chs = stack_channels([generate_channels(config, s) for s in (5, 6)])
    a = initial_solution(chs, config, "random", seed=3)
    b = initial_solution(chs.take(np.array([1])), config, "random", seed=3)
    assert np.array_equal(a.psi[1], b.psi[0])
    assert validate_solution(chs, a, config).feasible


def test_settings_validation():
    with pytest.raises(ValueError):
        WmmseSettings(init_mode="zeros")
    with pytest.raises(ValueError):
        WmmseSettings(t_max=0)


@given(st.integers(0, 2**32 - 1))
def test_constraint_values_decrease_in_multipliers(seed):
    rng = np.random.default_rng(seed)
    a = crandn(rng, 4, 2)
    b, g = a.conj().T @ a, crandn(rng, 2, 2)
    t = crandn(rng, 3, 2)
    bt = t.conj().T @ t
    nus = np.geomspace(1e-4, 1e2, 25)
    first = [matops.fro2(np.linalg.solve(b + v * np.eye(2), g)) for v in nus]
    second = []
    for v in nus:
        x = power_quadratic(b + v * bt, g, 0.5).x
        second.append(np.real(np.trace(x.conj().T @ bt @ x)))
    assert np.all(np.diff(first) <= 1e-12 * first[0])
    assert np.all(np.diff(second) <= 1e-9 * max(second[0], 1e-300))
