"""System configuration, RACA signal model, rate and feasibility checks."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from raca import matops
from raca.channel import ChannelSet, Geometry

__all__ = [
    "ConfigError",
    "SystemConfig",
    "BeamformerSolution",
    "FeasibilityReport",
    "OptimizerTrace",
    "TraceRow",
    "dbm_to_watt",
    "watt_to_dbm",
    "effective_channel",
    "noise_covariance",
    "achievable_rate",
    "mimo_rate",
    "relay_power",
    "power_usage",
    "validate_solution",
]

FEAS_TOL = 1e-9


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_watt: float) -> float:
    return 10.0 * math.log10(p_watt) + 30.0


class ConfigError(ValueError):
    pass


_POWER_FIELDS = ("p_ua", "p_ur", "p_r", "sigma_r2", "sigma_a2")


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, carriers (GHz), power budgets and noise (W), geometry.

    Budgets may be zero (the power-split sweeps hit both endpoints); noise
    variances must be strictly positive.
    """

    n_u: int = 2
    n_r: int = 4
    n_a: int = 4
    n_s: int = 2
    f_l: float = 6.0
    f_h: float = 28.0
    p_ua: float = dbm_to_watt(10.0)
    p_ur: float = dbm_to_watt(10.0)
    p_r: float = dbm_to_watt(10.0)
    sigma_r2: float = dbm_to_watt(-90.0)
    sigma_a2: float = dbm_to_watt(-90.0)
    geometry: Geometry = field(default_factory=Geometry)
    los_only: bool = False

    def __post_init__(self):
        for name in ("n_u", "n_r", "n_a", "n_s"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.n_s > min(self.n_u, self.n_a, self.n_r):
            raise ConfigError("n_s must not exceed min(n_u, n_a, n_r)")
        if self.n_a < 2 * self.n_s:
            raise ConfigError("the AP needs n_a >= 2 n_s antennas to separate both links")
        if not (self.f_l > 0 and self.f_h > 0):
            raise ConfigError("carrier frequencies must be positive")
        for name in ("p_ua", "p_ur", "p_r"):
            if not getattr(self, name) >= 0.0:
                raise ConfigError(f"{name} must be nonnegative")
        for name in ("sigma_r2", "sigma_a2"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @property
    def total_power(self) -> float:
        return self.p_ua + self.p_ur + self.p_r

    def to_dict(self) -> dict:
        out = {
            "n_u": self.n_u, "n_r": self.n_r, "n_a": self.n_a, "n_s": self.n_s,
            "f_l": self.f_l, "f_h": self.f_h,
            "geometry": dataclasses.asdict(self.geometry),
            "los_only": self.los_only,
        }
        for name in _POWER_FIELDS:
            v = getattr(self, name)
            out[f"{name}_dbm"] = watt_to_dbm(v) if v > 0 else None
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        """Build from a JSON-style dict; power and noise fields are in dBm.

        A dBm value of ``null`` means zero watts.
        """
        kwargs = {}
        for key, value in d.items():
            if key.endswith("_dbm") and key[:-4] in _POWER_FIELDS:
                kwargs[key[:-4]] = 0.0 if value is None else dbm_to_watt(float(value))
            elif key == "geometry":
                kwargs["geometry"] = Geometry(**value)
            elif key in ("n_u", "n_r", "n_a", "n_s"):
                kwargs[key] = int(value)
            elif key in ("f_l", "f_h"):
                kwargs[key] = float(value)
            elif key == "los_only":
                kwargs[key] = bool(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class BeamformerSolution:
    w_ua: np.ndarray
    w_ur: np.ndarray
    psi: np.ndarray
    w_a: np.ndarray | None = None

    @classmethod
    def zeros(cls, config: SystemConfig) -> "BeamformerSolution":
        return cls(
            w_ua=np.zeros((config.n_u, config.n_s), complex),
            w_ur=np.zeros((config.n_u, config.n_s), complex),
            psi=np.zeros((config.n_r, config.n_r), complex),
        )

    def copy(self) -> "BeamformerSolution":
        return BeamformerSolution(
            self.w_ua.copy(), self.w_ur.copy(), self.psi.copy(),
            None if self.w_a is None else self.w_a.copy(),
        )


def _check_shape(name: str, m: np.ndarray, shape: tuple[int, int]):
    if m.shape[-2:] != shape:
        raise ValueError(f"{name} has shape {m.shape[-2:]}, expected {shape}")


def _check_dims(ch: ChannelSet, sol: BeamformerSolution):
    n_a, n_u = ch.H_ua_fL.shape[-2:]
    n_r = ch.H_ur_fH.shape[-2]
    n_s = sol.w_ua.shape[-1]
    _check_shape("H_ur_fH", ch.H_ur_fH, (n_r, n_u))
    _check_shape("H_ra_fL", ch.H_ra_fL, (n_a, n_r))
    _check_shape("w_ua", sol.w_ua, (n_u, n_s))
    _check_shape("w_ur", sol.w_ur, (n_u, n_s))
    _check_shape("psi", sol.psi, (n_r, n_r))


def effective_channel(ch: ChannelSet, sol: BeamformerSolution) -> np.ndarray:
    """``[H_ua W_ua, H_ra Psi H_ur W_ur]``, shape ``(n_a, 2 n_s)``."""
    _check_dims(ch, sol)
    direct = ch.H_ua_fL @ sol.w_ua
    relayed = ch.H_ra_fL @ (sol.psi @ (ch.H_ur_fH @ sol.w_ur))
    return np.concatenate([direct, relayed], axis=-1)


def noise_covariance(ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig) -> np.ndarray:
    """AP noise covariance including relay-amplified noise."""
    g = ch.H_ra_fL @ sol.psi
    n_a = g.shape[-2]
    return config.sigma_r2 * (g @ matops.ct(g)) + config.sigma_a2 * np.eye(n_a)


def mimo_rate(h: np.ndarray, j: np.ndarray):
    """``log2 |I + H^H J^{-1} H|`` in bits (array over any batch axes)."""
    x = matops.hermitian_solve(j, h)
    m = np.eye(h.shape[-1]) + matops.hermitian_part(matops.ct(h) @ x)
    return np.maximum(matops.logdet_hermitian(m, base=2.0), 0.0)


def achievable_rate(ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig,
                    check: bool = True):
    """RACA rate in bits per channel use.

    With ``check`` the solution must satisfy the power constraints.
    """
    if check:
        report = validate_solution(ch, sol, config)
        if not report.feasible:
            raise ValueError(f"infeasible solution: {report}")
    rate = mimo_rate(effective_channel(ch, sol), noise_covariance(ch, sol, config))
    return float(rate) if np.ndim(rate) == 0 else rate


def relay_power(h_ur: np.ndarray, w: np.ndarray, psi: np.ndarray, sigma_r2: float):
    """Relay transmit power ``||Psi H W||_F^2 + sigma_r^2 ||Psi||_F^2``."""
    p = matops.fro2(psi @ (h_ur @ w)) + sigma_r2 * matops.fro2(psi)
    return float(p) if np.ndim(p) == 0 else p


def power_usage(ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig):
    """Transmit powers ``(||W_ua||^2, ||W_ur||^2, relay)``, batched."""
    return (matops.fro2(sol.w_ua), matops.fro2(sol.w_ur),
            relay_power(ch.H_ur_fH, sol.w_ur, sol.psi, config.sigma_r2))


@dataclass(frozen=True)
class FeasibilityReport:
    power_ua: float
    power_ur: float
    power_r: float
    slack_ua: float
    slack_ur: float
    slack_r: float
    feasible: bool

    def active(self, config: SystemConfig, tol: float = 1e-6) -> list[str]:
        """Names of constraints holding with equality (relative ``tol``)."""
        out = []
        for name, slack, budget in (("ua", self.slack_ua, config.p_ua),
                                    ("ur", self.slack_ur, config.p_ur),
                                    ("r", self.slack_r, config.p_r)):
            if np.all(np.abs(slack) <= tol * max(budget, np.finfo(float).tiny)):
                out.append(name)
        return out


def validate_solution(ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig,
                      tol: float = FEAS_TOL) -> FeasibilityReport:
    """Report the slack of each power constraint; never raises.

    For batched input the powers and slacks are arrays and ``feasible`` holds
    only if every element is feasible.
    """
    powers = power_usage(ch, sol, config)
    budgets = (config.p_ua, config.p_ur, config.p_r)
    slacks = tuple(b - p for b, p in zip(budgets, powers))
    feasible = all(bool(np.all(s >= -tol * b)) for s, b in zip(slacks, budgets))
    if np.ndim(powers[0]) == 0:
        powers = tuple(float(p) for p in powers)
        slacks = tuple(float(s) for s in slacks)
    return FeasibilityReport(*powers, *slacks, feasible=feasible)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    rate_bits: float
    objective: float
    slack_ua: float
    slack_ur: float
    slack_r: float


@dataclass
class OptimizerTrace:
    rows: list[TraceRow] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""

    def append(self, row: TraceRow):
        self.rows.append(row)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.rate_bits for r in self.rows])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    @property
    def iterations(self) -> int:
        return self.rows[-1].iteration if self.rows else 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in dataclasses.fields(TraceRow)]
        writer.writerow(names)
        for row in self.rows:
            writer.writerow([row.iteration] + [f"{getattr(row, n):.10g}" for n in names[1:]])
        return buf.getvalue()
