"""Energy efficiency from actual transmit powers and a circuit-power model.

Rates are bits per channel use with no bandwidth attached, so EE values are
only meaningful relative to each other.
"""

from __future__ import annotations

from dataclasses import dataclass

from raca.baselines import BaselineKind
from raca.channel import ChannelSet
from raca.sysmodel import BeamformerSolution, SystemConfig, dbm_to_watt, power_usage

__all__ = ["RACA", "PowerModel", "EnergyReport", "actual_powers", "energy_report", "power_totals"]

RACA = "RACA"

# number of actual-power terms each system reports, and which feed the UE total
_LAYOUT = {
    RACA: (3, 2),                       # (ua, ur, r); UE pays ua + ur
    BaselineKind.CA_SVD_WF: (2, 2),     # (ua at f_L, ua at f_H)
    BaselineKind.RA_WMMSE: (2, 1),      # (u at f_L, r)
    BaselineKind.MIMO_SVD_WF: (1, 1),   # (ua,)
}


@dataclass(frozen=True)
class PowerModel:
    """PA efficiency and circuit powers (W) of UE, relay and AP."""

    eta: float = 1.2
    pc_u: float = dbm_to_watt(13.0)
    pc_r: float = dbm_to_watt(16.0)
    pc_a: float = dbm_to_watt(16.0)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not (self.pc_u > 0 and self.pc_r > 0 and self.pc_a > 0):
            raise ValueError("circuit powers must be positive")


@dataclass(frozen=True)
class EnergyReport:
    system_kind: object
    p_sys_tot: float
    p_u_tot: float
    ee_sys: float
    ee_u: float


def actual_powers(ch: ChannelSet, sol: BeamformerSolution, config: SystemConfig) -> tuple[float, float, float]:
    """Radiated ``(P_ua, P_ur, P_r)`` of a RACA solution, relay noise included."""
    return tuple(float(p) for p in power_usage(ch, sol, config))


def _normalize(kind):
    if isinstance(kind, BaselineKind) or kind == RACA:
        return kind
    if isinstance(kind, str):
        if kind.upper().startswith("RACA"):
            return RACA
        for k in BaselineKind:
            if k.value == kind or k.name == kind:
                return k
    raise ValueError(f"unknown system kind {kind!r}")


def power_totals(kind, powers, model: PowerModel | None = None) -> tuple[float, float]:
    """``(P_sys_tot, P_u_tot)`` composed by the consumption row for ``kind``."""
    model = model or PowerModel()
    kind = _normalize(kind)
    n_terms, n_ue = _LAYOUT[kind]
    powers = tuple(float(p) for p in powers)
    if len(powers) != n_terms:
        raise ValueError(f"{kind} expects {n_terms} power terms, got {len(powers)}")
    if any(p < 0 for p in powers):
        raise ValueError("actual powers must be nonnegative")
    circuits = model.pc_u + model.pc_a
    if kind in (RACA, BaselineKind.RA_WMMSE):
        circuits += model.pc_r
    p_sys = sum(powers) / model.eta + circuits
    p_u = sum(powers[:n_ue]) / model.eta + model.pc_u
    return p_sys, p_u


def energy_report(kind, rate: float, powers, model: PowerModel | None = None) -> EnergyReport:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    p_sys, p_u = power_totals(kind, powers, model)
    return EnergyReport(_normalize(kind), p_sys, p_u, rate / p_sys, rate / p_u)
