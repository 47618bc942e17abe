"""Joint WMMSE design of the RACA precoders and relay matrix.

The rate maximization is rewritten as minimizing ``tr(Z E) - ln|Z|`` over the
receiver ``W_a``, weight ``Z``, precoders ``W_ua``, ``W_ur`` and relay matrix
``Psi``.  Each block is a convex problem with a closed-form KKT solution; the
power multipliers are located by bracketed root finding on scalar functions
obtained from one eigendecomposition per update.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from raca import matops
from raca.channel import ChannelSet, stack_channels
from raca.svdwf import solve_svd, solve_svdwf
from raca.sysmodel import (
    BeamformerSolution,
    OptimizerTrace,
    SystemConfig,
    TraceRow,
    effective_channel,
    mimo_rate,
    noise_covariance,
    power_usage,
    relay_power,
    validate_solution,
)

__all__ = [
    "MonotonicityError",
    "WmmseSettings",
    "WmmseState",
    "QuadraticSolution",
    "power_quadratic",
    "two_constraint_quadratic",
    "mse_matrix",
    "mmse_receiver",
    "wmmse_objective",
    "update_receiver",
    "update_precoder_direct",
    "update_precoder_relaylink",
    "update_relay_matrix",
    "update_weight",
    "inverse_weight",
    "random_solution",
    "initial_solution",
    "secular_root",
    "stack_solutions",
    "solve_wmmse",
    "solve_wmmse_batch",
    "alternate",
    "RacaProblem",
]

log = logging.getLogger(__name__)

INIT_MODES = ("random", "svd", "svdwf")


class MonotonicityError(matops.NumericError):
    pass


@dataclass(frozen=True)
class WmmseSettings:
    eps_min: float = 1e-7
    t_max: int = 10_000
    bisect_tol: float = 1e-10
    bisect_max_iter: int = 200
    init_mode: str = "svdwf"
    seed: int = 0
    monotone_tol: float = 1e-9

    def __post_init__(self):
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        if not (self.eps_min > 0 and self.t_max > 0 and self.bisect_tol > 0 and self.bisect_max_iter > 0):
            raise ValueError("WmmseSettings fields must be positive")


@dataclass
class WmmseState:
    sol: BeamformerSolution
    z: np.ndarray
    e: np.ndarray
    iteration: int = 0
    rate_history: list[float] = field(default_factory=list)
    nu2: np.ndarray | float | None = None


# -- block solvers -------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticSolution:
    x: np.ndarray
    nu: np.ndarray | float
    nu2: np.ndarray | float = 0.0


_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps


def secular_root(lam: np.ndarray, y: np.ndarray, budget, max_iter: int = 200) -> np.ndarray:
    """Smallest ``nu >= 0`` with ``sum_i y_i / (lam_i + nu)^2 <= budget``.

    Works along the last axis of ``lam`` and ``y`` (both nonnegative).  The
    map ``nu -> (sum_i y_i / (lam_i + nu)^2)^{-1/2}`` is concave and
    increasing, so Newton steps started left of the root approach it
    monotonically from below and converge quadratically.  Zero ``lam`` with
    positive ``y`` makes the sum infinite at zero; the first Newton step from
    that pole is taken in closed form.  A zero budget returns ``inf`` where
    any ``y`` is positive.
    """
    lam = np.maximum(np.asarray(lam, dtype=float), 0.0)
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    shape, n = lam.shape[:-1], lam.shape[-1]
    lam = lam.reshape(-1, n)
    y = y.reshape(-1, n)
    p = np.broadcast_to(np.asarray(budget, dtype=float), shape).reshape(-1)
    nu = np.zeros(lam.shape[0])

    null = lam <= 1e-14 * np.maximum(lam.max(axis=-1, keepdims=True), _TINY)
    y_null = np.where(null, y, 0.0).sum(axis=-1)
    # dead terms (y = 0) contribute nothing; give them a harmless denominator
    lam = np.where(null, np.where(y > 0.0, 0.0, 1.0), lam)
    phi0 = (y / np.where(null, 1.0, lam) ** 2).sum(axis=-1)
    phi0[y_null > 0.0] = np.inf
    todo = phi0 > p
    nu[todo & (p <= 0.0)] = np.inf
    todo &= p > 0.0
    idx = np.flatnonzero(todo)
    if idx.size == 0:
        return nu.reshape(shape)
    lam, y = lam[idx], y[idx]
    target = p[idx] ** -0.5
    v = target * np.sqrt(y_null[idx])
    for _ in range(max_iter):
        s = lam + v[:, None]
        q = y / (s * s)
        phi = q.sum(axis=-1)
        dq = (q / s).sum(axis=-1)
        f = phi**-0.5 - target
        step = np.maximum(-f, 0.0) * phi**1.5 / dq
        v += step
        if not np.any(step > 4.0 * _EPS * v):
            break
    else:
        raise matops.NumericError("power multiplier search did not converge")
    nu[idx] = v
    return nu.reshape(shape)


def _quadratic_parts(b, g, m):
    gm = g if m is None else matops.ct(matops.hermitian_solve(m, matops.ct(g)))
    lam, u = np.linalg.eigh(matops.hermitian_part(b))
    uh = matops.ct(u)
    ug = uh @ gm
    y = np.real(np.sum(ug * np.conj(uh @ g), axis=-1)) if m is not None else np.sum(
        ug.real**2 + ug.imag**2, axis=-1)
    return np.maximum(lam, 0.0), u, ug, np.maximum(y, 0.0)


def power_quadratic(b: np.ndarray, g: np.ndarray, budget, m: np.ndarray | None = None,
                    max_iter: int = 200) -> QuadraticSolution:
    """Minimize ``tr(B X M X^H) - 2 Re tr(X^H G)`` s.t. ``tr(X M X^H) <= budget``.

    ``B`` is Hermitian PSD and ``M`` Hermitian PD (identity when omitted).
    The minimizer is ``X = (B + nu I)^{-1} G M^{-1}``.  With
    ``B = U diag(lam) U^H`` the constraint value is
    ``sum_i Y_ii / (lam_i + nu)^2`` where ``Y = U^H G M^{-1} G^H U``.
    Leading batch axes are allowed everywhere.
    """
    lam, u, ug, y = _quadratic_parts(b, g, m)
    # drop directions that are numerically absent from G
    y = np.where(y <= 1e-14 * np.maximum(y.max(axis=-1, keepdims=True), _TINY), 0.0, y)
    nu = secular_root(lam, y, budget, max_iter)
    with np.errstate(divide="ignore"):
        c = np.where(y > 0.0, 1.0 / (lam + nu[..., None]), 0.0)
    return QuadraticSolution(u @ (c[..., None] * ug), nu)


def _second_value(x, bt):
    return np.real(np.sum(np.conj(x) * (bt @ x), axis=(-2, -1)))


def _h_minus(v, target):
    with np.errstate(divide="ignore"):
        return np.where(v > 0.0, np.maximum(v, _TINY) ** -0.5, np.inf) - target


def _start_nu2(b, bt, nu2_start, shape, idx):
    scale = (np.maximum(np.real(np.trace(b, axis1=-2, axis2=-1)), _TINY)
             / np.maximum(np.real(np.trace(bt, axis1=-2, axis2=-1)), _TINY))
    floor = 1e-12 * scale
    start = floor.copy()
    if nu2_start is not None:
        warm = np.broadcast_to(np.asarray(nu2_start, dtype=float), shape).reshape(-1)[idx]
        ok = np.isfinite(warm) & (warm > floor)
        start[ok] = warm[ok]
    return floor, start


def _search_nu2(b, g, bt, p1, p2, starts, tol, max_iter):
    """Vectorized bracket-and-regula-falsi search for the second multiplier.

    Works on ``F(nu2) = value(nu2)^{-1/2} - p2^{-1/2}``, which is increasing
    and nearly affine; ``F(0) < 0`` is known on entry.
    """
    floor, start = starts
    target = p2 ** -0.5

    def evaluate(sel, v):
        sol = power_quadratic(b[sel] + v[:, None, None] * bt[sel], g[sel], p1[sel], max_iter=max_iter)
        return _h_minus(_second_value(sol.x, bt[sel]), target[sel])

    n = b.shape[0]
    lo, hi = np.zeros(n), start.copy()
    f_lo, f_hi = np.full(n, -np.inf), evaluate(np.arange(n), start)

    # grow infeasible starts upward
    grow = np.flatnonzero(f_hi < 0.0)
    while grow.size:
        lo[grow], f_lo[grow] = hi[grow], f_hi[grow]
        hi[grow] *= 2.0
        if np.any(hi[grow] > 1e300):
            raise matops.NumericError("second multiplier search failed to bracket")
        f_hi[grow] = evaluate(grow, hi[grow])
        grow = grow[f_hi[grow] < 0.0]

    # shrink feasible warm starts downward until the bracket is tight
    shrink = np.flatnonzero((lo == 0.0) & (hi > floor))
    while shrink.size:
        cand = 0.5 * hi[shrink]
        keep = cand >= floor[shrink]
        shrink, cand = shrink[keep], cand[keep]
        if not shrink.size:
            break
        fc = evaluate(shrink, cand)
        below = fc < 0.0
        lo[shrink[below]], f_lo[shrink[below]] = cand[below], fc[below]
        hi[shrink[~below]], f_hi[shrink[~below]] = cand[~below], fc[~below]
        shrink = shrink[~below]

    # at the pole nu2 = 0 the value is finite in general; evaluate it once
    zero_lo = np.flatnonzero(np.isinf(f_lo))
    if zero_lo.size:
        f_lo[zero_lo] = evaluate(zero_lo, np.zeros(zero_lo.size))

    # Illinois regula falsi, keeping the feasible end in ``hi``
    side = np.zeros(n, dtype=int)
    act = np.arange(n)
    for _ in range(max_iter):
        # stop on bracket width only: when both constraints are nearly parallel
        # the residual is flat over a wide range of nu2 and says little
        act = act[(hi[act] - lo[act] > tol * hi[act]) & (f_hi[act] > 0.0)]
        if act.size == 0:
            break
        width = hi[act] - lo[act]
        c = hi[act] - f_hi[act] * width / (f_hi[act] - f_lo[act])
        c = np.where(np.isfinite(c), c, 0.5 * (lo[act] + hi[act]))
        c = np.clip(c, lo[act] + 1e-3 * width, hi[act] - 1e-3 * width)
        fc = evaluate(act, c)
        right = fc >= 0.0
        r, l = act[right], act[~right]
        hi[r], f_hi[r] = c[right], fc[right]
        f_lo[r] *= np.where(side[r] == 1, 0.5, 1.0)
        side[r] = 1
        lo[l], f_lo[l] = c[~right], fc[~right]
        f_hi[l] *= np.where(side[l] == -1, 0.5, 1.0)
        side[l] = -1
    else:
        raise matops.NumericError("second multiplier search did not converge")
    sol = power_quadratic(b + hi[:, None, None] * bt, g, p1, max_iter=max_iter)
    return hi, sol.x, sol.nu


def two_constraint_quadratic(b: np.ndarray, g: np.ndarray, bt: np.ndarray, budget1,
                             budget2, tol: float = 1e-12, max_iter: int = 200,
                             nu2_start=None) -> QuadraticSolution:
    """Minimize ``tr(X^H B X) - 2 Re tr(X^H G)`` s.t. ``||X||_F^2 <= budget1``
    and ``tr(X^H Bt X) <= budget2``.

    Outer search on the second multiplier ``nu2``: for fixed ``nu2`` the inner
    problem is :func:`power_quadratic` with ``B + nu2 Bt`` and the second
    constraint value is nonincreasing in ``nu2``.  The bracket grows or shrinks
    geometrically from ``nu2_start`` (default ``1e-12 tr(B) / tr(Bt)``) and is
    then closed by Illinois regula falsi on ``value^{-1/2}``.  The returned
    ``nu2`` is the feasible end of the final bracket.
    """
    b, g, bt = (np.asarray(v, dtype=np.complex128) for v in (b, g, bt))
    shape = b.shape[:-2]
    b2, g2, bt2 = (v.reshape(-1, *v.shape[-2:]) for v in (b, g, bt))
    k = b2.shape[0]
    p2 = np.broadcast_to(np.asarray(budget2, dtype=float), shape).reshape(-1).copy()
    if np.any(p2 < 0.0):
        raise ValueError(f"negative residual budget {p2.min():.3e}; update Psi first")
    p1 = np.broadcast_to(np.asarray(budget1, dtype=float), shape).reshape(-1)

    first = power_quadratic(b2, g2, p1, max_iter=max_iter)
    x, nu1 = first.x.copy(), np.asarray(first.nu, dtype=float).copy()
    nu2 = np.zeros(k)
    need = _second_value(x, bt2) > p2
    zero = need & (p2 == 0.0)
    x[zero], nu1[zero], nu2[zero] = 0.0, 0.0, np.inf
    idx = np.flatnonzero(need & ~zero)

    if idx.size:
        nu2[idx], x[idx], nu1[idx] = _search_nu2(b2[idx], g2[idx], bt2[idx], p1[idx], p2[idx],
                                                  _start_nu2(b2[idx], bt2[idx], nu2_start, shape, idx),
                                                  tol, max_iter)
    return QuadraticSolution(x.reshape(*shape, *x.shape[-2:]), nu1.reshape(shape), nu2.reshape(shape))


# -- WMMSE building blocks -----------------------------------------------------


def mmse_receiver(h: np.ndarray, j: np.ndarray) -> np.ndarray:
    """``H^H (H H^H + J)^{-1}``."""
    cov = h @ matops.ct(h) + j
    return matops.ct(matops.hermitian_solve(matops.hermitian_part(cov), h))


def _mse(w_a: np.ndarray, h: np.ndarray, j: np.ndarray) -> np.ndarray:
    d = w_a @ h - np.eye(h.shape[-1])
    return matops.hermitian_part(d @ matops.ct(d) + w_a @ j @ matops.ct(w_a))


def mse_matrix(ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig) -> np.ndarray:
    """``E = (W_a H - I)(W_a H - I)^H + W_a J W_a^H``."""
    if sol.w_a is None:
        raise ValueError("mse_matrix needs a receiver W_a")
    return _mse(sol.w_a, effective_channel(ch, sol), noise_covariance(ch, sol, config))


def wmmse_objective(z: np.ndarray, e: np.ndarray):
    """``tr(Z E) - ln|Z|``."""
    value = np.real(np.trace(z @ e, axis1=-2, axis2=-1)) - matops.logdet_hermitian(z)
    return float(value) if np.ndim(value) == 0 else value


def inverse_weight(e: np.ndarray) -> np.ndarray:
    """``E^{-1}`` with one jitter retry."""
    k = e.shape[-1]
    eye = np.eye(k)
    try:
        return matops.hermitian_part(matops.hermitian_solve(e, eye))
    except matops.NotPositiveDefiniteError:
        jitter = 1e-12 * np.real(np.trace(e, axis1=-2, axis2=-1)) / k
        log.warning("MSE matrix not PD; retrying with jitter %.3e", float(np.max(jitter)))
        e = e + np.asarray(jitter)[..., None, None] * eye
        return matops.hermitian_part(matops.hermitian_solve(e, eye))


def update_receiver(ch: ChannelSet, state: WmmseState, config: SystemConfig) -> np.ndarray:
    sol = state.sol
    return mmse_receiver(effective_channel(ch, sol), noise_covariance(ch, sol, config))


def update_precoder_direct(ch: ChannelSet, state: WmmseState, config: SystemConfig,
                           settings: WmmseSettings | None = None) -> np.ndarray:
    settings = settings or WmmseSettings()
    n_s = config.n_s
    a = state.sol.w_a @ ch.H_ua_fL
    ah = matops.ct(a)
    b = ah @ state.z @ a
    g = ah @ state.z[..., :, :n_s]
    return power_quadratic(b, g, config.p_ua, max_iter=settings.bisect_max_iter).x


def relay_residual_budget(config: SystemConfig, psi: np.ndarray):
    return config.p_r - config.sigma_r2 * matops.fro2(psi)


def update_precoder_relaylink(ch: ChannelSet, state: WmmseState, config: SystemConfig,
                              settings: WmmseSettings | None = None) -> np.ndarray:
    settings = settings or WmmseSettings()
    n_s = config.n_s
    psi_hur = state.sol.psi @ ch.H_ur_fH
    a = state.sol.w_a @ ch.H_ra_fL @ psi_hur
    ah = matops.ct(a)
    b = ah @ state.z @ a
    g = ah @ state.z[..., :, n_s:]
    bt = matops.ct(psi_hur) @ psi_hur
    residual = np.asarray(relay_residual_budget(config, state.sol.psi), dtype=float)
    # roundoff from an active relay constraint; anything larger is a bug upstream
    if np.any(residual < -1e-9 * max(config.p_r, _TINY)):
        raise ValueError(f"negative residual relay budget {residual.min():.3e}; update Psi first")
    residual = np.maximum(residual, 0.0)
    out = two_constraint_quadratic(b, g, bt, config.p_ur, residual, tol=settings.bisect_tol,
                                   max_iter=settings.bisect_max_iter, nu2_start=state.nu2)
    state.nu2 = out.nu2
    return out.x


def update_relay_matrix(ch: ChannelSet, state: WmmseState, config: SystemConfig,
                        settings: WmmseSettings | None = None) -> np.ndarray:
    settings = settings or WmmseSettings()
    n_s = config.n_s
    a = state.sol.w_a @ ch.H_ra_fL
    ah = matops.ct(a)
    d = ch.H_ur_fH @ state.sol.w_ur
    b = ah @ state.z @ a
    g = ah @ state.z[..., :, n_s:] @ matops.ct(d)
    m = matops.hermitian_part(d @ matops.ct(d) + config.sigma_r2 * np.eye(config.n_r))
    return power_quadratic(b, g, config.p_r, m=m, max_iter=settings.bisect_max_iter).x


def update_weight(state: WmmseState) -> np.ndarray:
    return inverse_weight(state.e)


# -- initialization and driver ---------------------------------------------------


def random_solution(ch: ChannelSet, config: SystemConfig, rng: np.random.Generator) -> BeamformerSolution:
    """CN(0,1) entries scaled so each power constraint holds with equality."""
    batch = ch.H_ua_fL.shape[:-2]

    def cn(*shape):
        shape = (*batch, *shape)
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    w_ua = cn(config.n_u, config.n_s)
    w_ur = cn(config.n_u, config.n_s)
    psi = cn(config.n_r, config.n_r)
    w_ua *= np.sqrt(config.p_ua / matops.fro2(w_ua))[..., None, None]
    w_ur *= np.sqrt(config.p_ur / matops.fro2(w_ur))[..., None, None]
    unit = relay_power(ch.H_ur_fH, w_ur, psi, config.sigma_r2)
    psi *= np.sqrt(config.p_r / np.asarray(unit))[..., None, None]
    return BeamformerSolution(w_ua, w_ur, psi)


def initial_solution(ch: ChannelSet, config: SystemConfig, mode: str = "svdwf",
                     seed: int = 0) -> BeamformerSolution:
    """Starting point for one realization or a stacked batch."""
    if mode not in INIT_MODES:
        raise ValueError(f"unknown init mode {mode!r}")
    if ch.batched:
        return stack_solutions([initial_solution(c, config, mode, seed) for c in ch.unstack()])
    if mode == "random":
        # keyed on the realization so a trial's start does not depend on its batch
        return random_solution(ch, config, np.random.default_rng([seed, int(ch.seed)]))
    solver = solve_svdwf if mode == "svdwf" else solve_svd
    return solver(ch, config)[0]


def stack_solutions(sols: list[BeamformerSolution]) -> BeamformerSolution:
    return BeamformerSolution(
        np.stack([s.w_ua for s in sols]), np.stack([s.w_ur for s in sols]),
        np.stack([s.psi for s in sols]),
        None if any(s.w_a is None for s in sols) else np.stack([s.w_a for s in sols]),
    )


def _take(sol, k):
    """Index every array field of a solution dataclass."""
    return type(sol)(**{f.name: (None if getattr(sol, f.name) is None else getattr(sol, f.name)[k])
                        for f in dataclasses.fields(sol)})


def _put(sol, k, part):
    for f in dataclasses.fields(sol):
        value = getattr(part, f.name)
        if value is not None and getattr(sol, f.name) is not None:
            getattr(sol, f.name)[k] = value


class RacaProblem:
    """Block structure of the RACA rate problem for :func:`alternate`."""

    def channel(self, ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig):
        return effective_channel(ch, sol), noise_covariance(ch, sol, config)

    def slacks(self, ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig):
        powers = power_usage(ch, sol, config)
        return tuple(b - p for b, p in zip((config.p_ua, config.p_ur, config.p_r), powers))

    def feasible(self, ch, sol, config) -> bool:
        return validate_solution(ch, sol, config).feasible

    def steps(self):
        def direct(ch, state, config, settings):
            state.sol.w_ua = update_precoder_direct(ch, state, config, settings)

        def relaylink(ch, state, config, settings):
            state.sol.w_ur = update_precoder_relaylink(ch, state, config, settings)

        def relay(ch, state, config, settings):
            state.sol.psi = update_relay_matrix(ch, state, config, settings)

        return [("W_ua", direct), ("W_ur", relaylink), ("Psi", relay)]


def _rate(ch, sol, config):
    return mimo_rate(effective_channel(ch, sol), noise_covariance(ch, sol, config))


def solve_wmmse(ch: ChannelSet, config: SystemConfig, settings: WmmseSettings | None = None,
                init: BeamformerSolution | None = None, check: bool = False,
                ) -> tuple[BeamformerSolution, OptimizerTrace]:
    """Alternating WMMSE optimization for one channel realization.

    See :func:`solve_wmmse_batch`, which this wraps with a batch of one.
    """
    init = None if init is None else stack_solutions([init])
    sols, traces = solve_wmmse_batch(stack_channels([ch]), config, settings, init, check)
    return _take(sols, 0), traces[0]


def solve_wmmse_batch(ch: ChannelSet, config: SystemConfig, settings: WmmseSettings | None = None,
                      init: BeamformerSolution | None = None, check: bool = False,
                      ) -> tuple[BeamformerSolution, list[OptimizerTrace]]:
    """Alternating WMMSE optimization over a stacked batch of realizations.

    Each round refreshes the receiver and the weight for the current
    precoders (after which ``tr(Z E) - ln|Z| = 2 N_s - ln(2) R``) and then
    updates ``W_ua``, ``W_ur`` and ``Psi`` in turn.
    """
    settings = settings or WmmseSettings()
    if init is None:
        init = initial_solution(ch, config, settings.init_mode, settings.seed)
    return alternate(RacaProblem(), ch, config, settings, init, check)


def alternate(problem, ch: ChannelSet, config: SystemConfig, settings: WmmseSettings, init,
              check: bool = False):
    """Batched WMMSE block-coordinate descent shared by RACA and RA.

    A realization stops when its relative rate gain drops below ``eps_min``
    or after ``t_max`` rounds; the others carry on.  Realizations never
    interact, so a trial's result does not depend on its batch mates.

    With ``check`` every sub-step is verified to not increase the objective
    and every iterate to be feasible.
    """
    sol = init.copy()
    n = ch.H_ua_fL.shape[0]
    h, j = problem.channel(ch, sol, config)
    rate = np.asarray(mimo_rate(h, j), dtype=float)
    nu2 = np.full(n, np.nan)
    slacks = problem.slacks(ch, sol, config)
    records = [[(0, rate[i], np.nan, *(s[i] for s in slacks))] for i in range(n)]
    stop = [""] * n
    active = np.arange(n)
    monotone_tol = settings.monotone_tol

    def objective(sub_ch, state):
        hh, jj = problem.channel(sub_ch, state.sol, config)
        return wmmse_objective(state.z, _mse(state.sol.w_a, hh, jj))

    t = 0
    while active.size:
        t += 1
        sub_ch = ch.take(active)
        state = WmmseState(sol=_take(sol, active), z=None, e=None, iteration=t - 1, nu2=nu2[active])
        h, j = problem.channel(sub_ch, state.sol, config)
        state.sol.w_a = mmse_receiver(h, j)
        state.e = _mse(state.sol.w_a, h, j)
        state.z = inverse_weight(state.e)
        obj = wmmse_objective(state.z, state.e)
        for label, step in problem.steps():
            step(sub_ch, state, config, settings)
            if check:
                after = objective(sub_ch, state)
                bad = after > obj + monotone_tol
                if np.any(bad):
                    i = int(np.argmax(bad))
                    raise MonotonicityError(f"objective increased at {label} (iteration {t}, trial "
                                            f"{int(active[i])}): {obj[i]:.12g} -> {after[i]:.12g}")
                if not problem.feasible(sub_ch, state.sol, config):
                    raise MonotonicityError(f"infeasible iterate after {label} (iteration {t})")
                obj = after

        h, j = problem.channel(sub_ch, state.sol, config)
        new_rate = np.asarray(mimo_rate(h, j), dtype=float)
        old = rate[active]
        drop = new_rate < old - monotone_tol
        if np.any(drop):
            i = int(np.argmax(drop))
            raise MonotonicityError(f"rate decreased at iteration {t} for trial {int(active[i])}: "
                                    f"{old[i]:.12g} -> {new_rate[i]:.12g}")
        _put(sol, active, state.sol)
        if state.nu2 is not None:
            nu2[active] = state.nu2
        rate[active] = new_rate
        slacks = problem.slacks(sub_ch, state.sol, config)
        objs = np.broadcast_to(obj, new_rate.shape)
        for pos, i in enumerate(active):
            records[i].append((t, new_rate[pos], objs[pos], *(s[pos] for s in slacks)))

        with np.errstate(divide="ignore", invalid="ignore"):
            eps = np.where(new_rate > 0, (new_rate - old) / new_rate, 0.0)
        done = eps < settings.eps_min
        for i in active[done]:
            stop[i] = "eps_min"
        if t >= settings.t_max:
            for i in active[~done]:
                stop[i] = "t_max"
            break
        active = active[~done]

    h, j = problem.channel(ch, sol, config)
    sol.w_a = mmse_receiver(h, j)
    traces = [OptimizerTrace(rows=[TraceRow(r[0], *(float(v) for v in r[1:])) for r in records[i]],
                             converged=stop[i] == "eps_min", stop_reason=stop[i])
              for i in range(n)]
    return sol, traces
