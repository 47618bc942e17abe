import math

from hypothesis import given
from hypothesis import strategies as st

from raca.protocol import (
    async_saving,
    breakeven_ratio,
    centralized_entries,
    distributed_entries,
    overhead,
    window_cost,
)
from raca.sysmodel import SystemConfig


def test_default_counts():
    rep = overhead(SystemConfig())
    assert (rep.centralized_entries, rep.distributed_entries) == (32, 56)
    assert rep.async_savings_per_update == 32
    assert rep.breakeven_coherence_ratio == 4


def test_report_formats():
    rep = overhead(SystemConfig())
    assert rep.csv_header().split(",")[0] == "centralized_entries"
    assert rep.csv_row() == "32,56,32,4"
    assert "breakeven" in rep.table()


@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.integers(1, 4))
def test_breakeven_is_first_window_where_distributed_wins(n_u, n_r, n_a, n_s):
    k = breakeven_ratio(n_u, n_r, n_a, n_s)
    if math.isinf(k):
        c = centralized_entries(n_u, n_r, n_a, n_s)
        d = distributed_entries(n_u, n_r, n_a, n_s)
        assert c + async_saving(n_a, n_r) <= d
        return
    k = int(k)
    cen, dis = window_cost(k, n_u, n_r, n_a, n_s)
    assert dis <= cen
    if k > 1:
        cen, dis = window_cost(k - 1, n_u, n_r, n_a, n_s)
        assert dis > cen


def test_window_cost_single_update():
    assert window_cost(1, 2, 4, 4, 2) == (32, 56)
    assert window_cost(4, 2, 4, 4, 2) == (128, 128)
