"""Control-link overhead of the centralized and distributed protocols.

Counts are in complex matrix entries exchanged per fast-fading update.  The
distributed protocol can skip re-sending the slow relay-AP channel, which is
what the two-timescale saving and the breakeven ratio capture.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields

from raca.sysmodel import SystemConfig

__all__ = [
    "OverheadReport",
    "centralized_entries",
    "distributed_entries",
    "async_saving",
    "window_cost",
    "breakeven_ratio",
    "overhead",
]


def centralized_entries(n_u: int, n_r: int, n_a: int, n_s: int) -> int:
    """AP learns ``H_ur`` and sends back ``Psi``, ``W_ua`` and ``W_ur``."""
    return n_r * n_u + n_r * n_r + 2 * n_u * n_s


def distributed_entries(n_u: int, n_r: int, n_a: int, n_s: int) -> int:
    """Each node gathers the channels its own SVD needs."""
    return 2 * n_r * n_u + n_a * n_u + 2 * n_a * n_r


def async_saving(n_a: int, n_r: int) -> int:
    """Entries of the slow relay-AP channel skipped per asynchronous update."""
    return 2 * n_a * n_r


def window_cost(k: int, n_u: int, n_r: int, n_a: int, n_s: int) -> tuple[int, int]:
    """(centralized, distributed) entries over one relay-AP coherence window
    holding ``k`` fast updates; only the first distributed update carries ``H_ra``."""
    c = centralized_entries(n_u, n_r, n_a, n_s)
    d = distributed_entries(n_u, n_r, n_a, n_s)
    return k * c, k * d - (k - 1) * async_saving(n_a, n_r)


def breakeven_ratio(n_u: int, n_r: int, n_a: int, n_s: int) -> float:
    """Smallest window length ``k`` for which distributed costs no more than centralized.

    ``k D - (k - 1) S <= k C`` rearranges to ``k (C + S - D) >= S``.  Returns
    ``inf`` when the saving never closes the gap.
    """
    c = centralized_entries(n_u, n_r, n_a, n_s)
    d = distributed_entries(n_u, n_r, n_a, n_s)
    s = async_saving(n_a, n_r)
    if d <= c:
        return 1.0
    margin = c + s - d
    if margin <= 0:
        return math.inf
    return float(max(1, -(-s // margin)))


@dataclass(frozen=True)
class OverheadReport:
    centralized_entries: int
    distributed_entries: int
    async_savings_per_update: int
    breakeven_coherence_ratio: float

    def csv_header(self) -> str:
        return ",".join(f.name for f in fields(self))

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(
            [f"{v:.10g}" if isinstance(v, float) else v for v in astuple(self)])
        return buf.getvalue()

    def table(self) -> str:
        width = max(len(f.name) for f in fields(self))
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            text = f"{v:g}" if isinstance(v, float) else str(v)
            lines.append(f"{f.name.replace('_', ' '):<{width}}  {text:>8}")
        return "\n".join(lines)


def overhead(config: SystemConfig) -> OverheadReport:
    dims = (config.n_u, config.n_r, config.n_a, config.n_s)
    return OverheadReport(
        centralized_entries=centralized_entries(*dims),
        distributed_entries=distributed_entries(*dims),
        async_savings_per_update=async_saving(config.n_a, config.n_r),
        breakeven_coherence_ratio=breakeven_ratio(*dims),
    )
