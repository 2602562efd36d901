import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtwifi.phyrate import (
    DEFAULT_TABLE,
    AirtimeParams,
    RateEntry,
    RateTable,
    SnrWindow,
    UnknownRate,
    adapt_rate,
    atomic_slot_usage,
    build_rate_table,
    expected_throughput_mbps,
    frame_airtime_us,
    rate_for_snr,
    rate_table_from_config,
    sampling_rate_hz,
    slot_length_us,
)

RATES = [54, 48, 36, 24, 18, 12, 9, 6]


def test_frame_airtime_examples():
    assert frame_airtime_us(564, 54) == 104
    assert frame_airtime_us(14, 6) == 44
    assert frame_airtime_us(0, 54) == 24


def test_slot_length_examples():
    assert slot_length_us(500, 54) == 174
    assert slot_length_us(500, 6) == 846
    assert slot_length_us(50, 54) == 110


def test_slot_lengths_by_payload_and_rate():
    assert [slot_length_us(p, 54) for p in (50, 100, 150, 200, 300, 400, 500)] == [110, 118, 126, 130, 146, 162, 174]
    assert [slot_length_us(500, r) for r in RATES] == [174, 186, 218, 282, 342, 470, 594, 846]


def test_atomic_slot_usage():
    assert atomic_slot_usage(470, 174) == 3
    assert atomic_slot_usage(174, 174) == 1
    assert [atomic_slot_usage(slot_length_us(500, r), 174) for r in RATES] == [1, 2, 2, 2, 2, 3, 4, 5]
    with pytest.raises(ValueError):
        atomic_slot_usage(0, 174)


def test_sampling_rate():
    assert int(sampling_rate_hz(110)) == 9090
    assert int(sampling_rate_hz(174)) == 5747
    assert sampling_rate_hz(1e6) == 1


def test_expected_throughput():
    assert expected_throughput_mbps(125, 127) == pytest.approx(25.52, abs=0.01)
    assert expected_throughput_mbps(60, 127) == pytest.approx(12.25, abs=0.01)
    assert expected_throughput_mbps(40, 127) == pytest.approx(8.17, abs=0.01)
    with pytest.raises(ValueError):
        expected_throughput_mbps(128, 127)


def test_params_and_unknown_rate():
    with pytest.raises(ValueError):
        AirtimeParams(sifs_us=0)
    with pytest.raises(UnknownRate):
        frame_airtime_us(100, 11)


def test_rate_for_snr_examples():
    assert rate_for_snr(26).rate_mbps == 54
    assert rate_for_snr(14).rate_mbps == 12
    assert rate_for_snr(6.9) is None


@given(st.floats(-10, 50), st.floats(-10, 50))
def test_rate_for_snr_monotone(a, b):
    lo, hi = sorted((a, b))
    ra, rb = rate_for_snr(lo), rate_for_snr(hi)
    assert (ra.rate_mbps if ra else 0) <= (rb.rate_mbps if rb else 0)


def window(*samples, capacity=20):
    w = SnrWindow(capacity)
    w.extend(samples)
    return w


def test_adapt_rate_examples():
    t = DEFAULT_TABLE
    assert adapt_rate(window(21, 19, 23), t.by_rate(54)).rate_mbps == 36
    assert adapt_rate(window(26, 27, 25), t.by_rate(36)).rate_mbps == 54
    # min 24 clears the 48 Mbps threshold (22) but not 54 (25): one step up, not two
    assert adapt_rate(window(26, 24, 27), t.by_rate(36)).rate_mbps == 48
    assert adapt_rate(window(20, 30), t.by_rate(36)).rate_mbps == 36
    assert adapt_rate(window(5, 30), t.by_rate(36)) is None
    with pytest.raises(ValueError):
        adapt_rate(SnrWindow(3), t.by_rate(36))


def test_window_evicts_oldest():
    w = window(1, 2, 3, capacity=2)
    assert list(w) == [2, 3]
    with pytest.raises(ValueError):
        SnrWindow(0)


snr = st.floats(0, 35)


@given(st.lists(snr, min_size=1, max_size=25), st.sampled_from(RATES + [None]))
def test_adapt_rate_bounds(samples, current_rate):
    t = DEFAULT_TABLE
    current = t.by_rate(current_rate) if current_rate else None
    w = window(*samples)
    new = adapt_rate(w, current, t)
    rank = lambda e: e.rate_mbps if e else 0
    if rank(new) < rank(current):
        # a downgrade lands exactly on the rate of the worst sample
        assert new == rate_for_snr(min(w), t)
    if rank(new) > rank(current):
        assert all(s >= new.snr_threshold_db for s in w)


def test_adapt_rate_step_shape():
    # falling then rising trace, one evaluation per sample batch
    levels = [27, 23, 20, 18, 16, 14, 12, 14, 16, 18, 20, 23, 27]
    w = SnrWindow(5)
    current = DEFAULT_TABLE.by_rate(54)
    rates = []
    for level in levels:
        for _ in range(5):
            w.push(level)
            current = adapt_rate(w, current)
        rates.append(current.rate_mbps)
    low = rates.index(min(rates))
    assert rates[: low + 1] == sorted(rates[: low + 1], reverse=True)
    assert rates[low:] == sorted(rates[low:])


def test_rate_table_structure():
    t = build_rate_table()
    assert [e.rate_mbps for e in t.entries] == sorted(RATES)
    assert t.highest.rate_mbps == 54 and t.lowest.rate_mbps == 6
    for e in t.entries:
        assert e.atomic_slot_usage == math.ceil(e.slot_length_us / 174)
    with pytest.raises(ValueError):
        RateTable([RateEntry(6, 10, 24, 846, 5), RateEntry(9, 7, 36, 594, 4)])


def test_rate_table_config_round_trip():
    t = rate_table_from_config(DEFAULT_TABLE.to_dict())
    assert t.to_dict() == DEFAULT_TABLE.to_dict()
    custom = rate_table_from_config({"entries": [{"rate": 54, "threshold": 24}, {"rate": 6, "threshold": 5}]})
    assert [e.rate_mbps for e in custom.entries] == [6, 54]
    with pytest.raises(ValueError):
        rate_table_from_config({"entries": []})
