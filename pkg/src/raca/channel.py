"""Rayleigh block-fading channels with 3GPP Indoor Hotspot path loss."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from raca.sysmodel import SystemConfig

__all__ = [
    "Geometry",
    "ChannelSet",
    "path_loss_db",
    "los_path_loss_db",
    "nlos_prime_path_loss_db",
    "amplitude_gain",
    "rayleigh",
    "generate_channels",
    "stack_channels",
]

LINKS = ("H_ua_fL", "H_ur_fH", "H_ra_fL", "H_ua_fH", "H_ur_fL")


@dataclass(frozen=True)
class Geometry:
    """Link distances in meters.

    The default embeds UE at the origin, relay at (1, 0) and AP at (0, 10).
    """

    d_ua: float = 10.0
    d_ur: float = 1.0
    d_ra: float = math.sqrt(101.0)

    def __post_init__(self):
        for name in ("d_ua", "d_ur", "d_ra"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be >= 1 m, got {getattr(self, name)}")

    @classmethod
    def from_positions(cls, ue, relay, ap) -> "Geometry":
        ue, relay, ap = (np.asarray(p, dtype=float) for p in (ue, relay, ap))
        return cls(
            d_ua=float(np.linalg.norm(ap - ue)),
            d_ur=float(np.linalg.norm(relay - ue)),
            d_ra=float(np.linalg.norm(ap - relay)),
        )


def los_path_loss_db(d: float, fc: float) -> float:
    return 32.4 + 17.3 * math.log10(d) + 20.0 * math.log10(fc)


def nlos_prime_path_loss_db(d: float, fc: float) -> float:
    return 17.3 + 38.3 * math.log10(d) + 24.9 * math.log10(fc)


def path_loss_db(d: float, fc: float, los_only: bool = False) -> float:
    """InH path loss in dB for distance ``d`` (m) and carrier ``fc`` (GHz).

    The NLOS value is the larger of the LOS and NLOS' fits.
    """
    if not d >= 1.0:
        raise ValueError(f"path loss model requires d >= 1 m, got {d}")
    if not fc > 0.0:
        raise ValueError(f"carrier frequency must be positive, got {fc}")
    los = los_path_loss_db(d, fc)
    if los_only:
        return los
    return max(los, nlos_prime_path_loss_db(d, fc))


def amplitude_gain(d: float, fc: float, los_only: bool = False) -> float:
    return 10.0 ** (-path_loss_db(d, fc, los_only) / 20.0)


def rayleigh(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2.0)


@dataclass(frozen=True)
class ChannelSet:
    """All channel matrices of one realization.

    ``H_ua_fH`` feeds the CA baseline and ``H_ur_fL`` the RA baseline.
    """

    H_ua_fL: np.ndarray
    H_ur_fH: np.ndarray
    H_ra_fL: np.ndarray
    H_ua_fH: np.ndarray
    H_ur_fL: np.ndarray
    seed: int = 0

    def to_dict(self) -> dict:
        out = {"seed": int(self.seed)}
        for name in LINKS:
            m = getattr(self, name)
            out[name] = [[[float(z.real), float(z.imag)] for z in row] for row in m]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSet":
        mats = {}
        for name in LINKS:
            arr = np.asarray(d[name], dtype=float)
            mats[name] = arr[..., 0] + 1j * arr[..., 1]
        return cls(seed=int(d.get("seed", 0)), **mats)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChannelSet":
        return cls.from_dict(json.loads(text))

    def scaled(self, **factors: float) -> "ChannelSet":
        """Copy with selected links multiplied by scalars (e.g. ``H_ua_fL=0``)."""
        mats = {name: getattr(self, name) * factors.get(name, 1.0) for name in LINKS}
        return ChannelSet(seed=self.seed, **mats)

    @property
    def batched(self) -> bool:
        return self.H_ua_fL.ndim > 2

    def take(self, index) -> "ChannelSet":
        """Sub-batch (array index) or single realization (int index)."""
        mats = {name: getattr(self, name)[index] for name in LINKS}
        seed = self.seed
        if np.ndim(seed):
            seed = np.asarray(seed)[index]
            if np.ndim(seed) == 0:
                seed = int(seed)
        return ChannelSet(seed=seed, **mats)

    def unstack(self) -> list["ChannelSet"]:
        return [self.take(k) for k in range(self.H_ua_fL.shape[0])]


def stack_channels(channels: list[ChannelSet]) -> ChannelSet:
    """Stack realizations along a new leading batch axis."""
    if not channels:
        raise ValueError("need at least one channel realization")
    mats = {name: np.stack([getattr(c, name) for c in channels]) for name in LINKS}
    return ChannelSet(seed=np.array([c.seed for c in channels]), **mats)


def _link_params(config: "SystemConfig") -> dict[str, tuple[int, int, float, float]]:
    g = config.geometry
    return {
        "H_ua_fL": (config.n_a, config.n_u, g.d_ua, config.f_l),
        "H_ur_fH": (config.n_r, config.n_u, g.d_ur, config.f_h),
        "H_ra_fL": (config.n_a, config.n_r, g.d_ra, config.f_l),
        "H_ua_fH": (config.n_a, config.n_u, g.d_ua, config.f_h),
        "H_ur_fL": (config.n_r, config.n_u, g.d_ur, config.f_l),
    }


def generate_channels(config: "SystemConfig", seed: int) -> ChannelSet:
    """Draw one channel realization.

    Each link owns an independent child stream of ``SeedSequence(seed)``, so a
    link's small-scale fading does not depend on the other links' shapes.
    """
    streams = np.random.SeedSequence(seed).spawn(len(LINKS))
    mats = {}
    for (name, (rows, cols, d, fc)), ss in zip(_link_params(config).items(), streams):
        rng = np.random.default_rng(ss)
        mats[name] = amplitude_gain(d, fc, config.los_only) * rayleigh(rng, rows, cols)
    return ChannelSet(seed=seed, **mats)
