"""802.11a/g OFDM airtime, slot lengths, the SNR rate table and the
windowed conservative rate adaptation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional

# data bits per OFDM symbol
NDBPS: Dict[int, int] = {6: 24, 9: 36, 12: 48, 18: 72, 24: 96, 36: 144, 48: 192, 54: 216}

# measured SNR thresholds (dB) per rate for 500-byte UDP payloads
DEFAULT_THRESHOLDS: Dict[int, float] = {54: 25, 48: 22, 36: 19, 24: 17, 18: 15, 12: 13, 9: 10, 6: 7}

DEFAULT_PAYLOAD_BYTES = 500
DEFAULT_ATOMIC_SLOT_US = 174
DEFAULT_WINDOW = 20


class UnknownRate(ValueError):
    pass


@dataclass(frozen=True)
class AirtimeParams:
    preamble_signal_us: int = 20
    symbol_us: int = 4
    service_tail_bits: int = 22
    sifs_us: int = 16
    ack_bytes: int = 14
    ack_rate_mbps: int = 6
    guard_us: int = 10
    # MAC/LLC/IP/UDP/FCS bytes carried on air on top of the UDP payload
    frame_overhead_bytes: int = 64

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")


def _ceil_div(a, b) -> int:
    if isinstance(a, int) and isinstance(b, int):
        return -(-a // b)
    return math.ceil(a / b - 1e-9)


def ndbps(rate_mbps) -> int:
    try:
        return NDBPS[int(rate_mbps)] if float(rate_mbps).is_integer() else NDBPS[rate_mbps]
    except KeyError:
        raise UnknownRate(f"no OFDM rate {rate_mbps} Mbps") from None


def frame_airtime_us(frame_bytes: int, rate_mbps, params: AirtimeParams = AirtimeParams()):
    if frame_bytes < 0:
        raise ValueError("frame_bytes must be non-negative")
    symbols = _ceil_div(8 * frame_bytes + params.service_tail_bits, ndbps(rate_mbps))
    return params.preamble_signal_us + params.symbol_us * symbols


def slot_length_us(payload_bytes: int, rate_mbps, params: AirtimeParams = AirtimeParams()):
    """Data frame + SIFS + ACK + guard time."""
    if payload_bytes <= 0:
        raise ValueError("payload must be positive")
    return (
        frame_airtime_us(payload_bytes + params.frame_overhead_bytes, rate_mbps, params)
        + params.sifs_us
        + frame_airtime_us(params.ack_bytes, params.ack_rate_mbps, params)
        + params.guard_us
    )


def atomic_slot_usage(slot_length, atomic_slot) -> int:
    if slot_length <= 0 or atomic_slot <= 0:
        raise ValueError("slot lengths must be positive")
    return _ceil_div(slot_length, atomic_slot)


def sampling_rate_hz(slot_length_us) -> float:
    """Highest periodic sampling rate one slot per sample can carry."""
    if slot_length_us <= 0:
        raise ValueError("slot length must be positive")
    return 1e6 / slot_length_us


def expected_throughput_mbps(
    slots_for_link: int,
    superframe_slots: int,
    atomic_slot_us=DEFAULT_ATOMIC_SLOT_US,
    payload_bytes: int = DEFAULT_PAYLOAD_BYTES,
    params: AirtimeParams = AirtimeParams(),
) -> float:
    """On-air frame throughput of a link owning ``slots_for_link`` slots."""
    if not 0 <= slots_for_link <= superframe_slots:
        raise ValueError("slots_for_link must lie in [0, superframe_slots]")
    bits = slots_for_link * 8 * (payload_bytes + params.frame_overhead_bytes)
    return bits / (superframe_slots * atomic_slot_us)


@dataclass(frozen=True)
class RateEntry:
    rate_mbps: int
    snr_threshold_db: float
    bits_per_symbol: int
    slot_length_us: float
    atomic_slot_usage: int


class RateTable:
    """Rate entries ordered by rate, lowest first."""

    def __init__(self, entries: Iterable[RateEntry]):
        self.entries: List[RateEntry] = sorted(entries, key=lambda e: e.rate_mbps)
        if not self.entries:
            raise ValueError("empty rate table")
        for lo, hi in zip(self.entries, self.entries[1:]):
            if lo.rate_mbps == hi.rate_mbps:
                raise ValueError(f"duplicate rate {lo.rate_mbps}")
            if not hi.snr_threshold_db > lo.snr_threshold_db:
                raise ValueError(f"threshold of {hi.rate_mbps} Mbps must exceed that of {lo.rate_mbps} Mbps")
            if hi.slot_length_us > lo.slot_length_us:
                raise ValueError(f"slot of {hi.rate_mbps} Mbps is longer than that of {lo.rate_mbps} Mbps")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def position(self, entry: RateEntry) -> int:
        return self.entries.index(entry)

    def by_rate(self, rate_mbps) -> RateEntry:
        for e in self.entries:
            if e.rate_mbps == rate_mbps:
                return e
        raise UnknownRate(f"rate {rate_mbps} Mbps not in table")

    @property
    def highest(self) -> RateEntry:
        return self.entries[-1]

    @property
    def lowest(self) -> RateEntry:
        return self.entries[0]

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "rate": e.rate_mbps,
                    "threshold": e.snr_threshold_db,
                    "slot_length_us": e.slot_length_us,
                    "atomic_slot_usage": e.atomic_slot_usage,
                }
                for e in reversed(self.entries)
            ]
        }


def build_rate_table(
    thresholds: Mapping[int, float] = DEFAULT_THRESHOLDS,
    payload_bytes: int = DEFAULT_PAYLOAD_BYTES,
    atomic_slot_us=DEFAULT_ATOMIC_SLOT_US,
    params: AirtimeParams = AirtimeParams(),
    slot_overrides: Optional[Mapping[int, float]] = None,
) -> RateTable:
    slot_overrides = slot_overrides or {}
    entries = []
    for rate, threshold in thresholds.items():
        slot = slot_overrides.get(rate, slot_length_us(payload_bytes, rate, params))
        entries.append(RateEntry(int(rate), threshold, ndbps(rate), slot, atomic_slot_usage(slot, atomic_slot_us)))
    return RateTable(entries)


def rate_table_from_config(doc: Mapping, atomic_slot_us=None, params: AirtimeParams = AirtimeParams()) -> RateTable:
    """Load ``{"payload_bytes": .., "atomic_slot_us": .., "entries": [{"rate",
    "threshold", "slot_length_us"?}]}``; missing keys take the defaults."""
    entries = doc.get("entries")
    if not entries:
        raise ValueError("rate table config needs a non-empty 'entries' list")
    thresholds, overrides = {}, {}
    for i, e in enumerate(entries):
        try:
            rate = int(e["rate"])
            thresholds[rate] = float(e["threshold"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"entries[{i}]: needs numeric 'rate' and 'threshold'") from exc
        if e.get("slot_length_us") is not None:
            overrides[rate] = e["slot_length_us"]
    return build_rate_table(
        thresholds,
        payload_bytes=int(doc.get("payload_bytes", DEFAULT_PAYLOAD_BYTES)),
        atomic_slot_us=atomic_slot_us or doc.get("atomic_slot_us", DEFAULT_ATOMIC_SLOT_US),
        params=params,
        slot_overrides=overrides,
    )


DEFAULT_TABLE = build_rate_table()


def rate_for_snr(snr_db: float, table: RateTable = DEFAULT_TABLE) -> Optional[RateEntry]:
    """Highest rate whose threshold is at most ``snr_db``; None means no link."""
    best = None
    for e in table.entries:
        if e.snr_threshold_db <= snr_db:
            best = e
    return best


class SnrWindow:
    """Most recent SNR samples of one link (oldest evicted first)."""

    def __init__(self, capacity: int = DEFAULT_WINDOW):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._samples = deque(maxlen=capacity)

    def push(self, snr_db: float) -> None:
        self._samples.append(float(snr_db))

    def extend(self, samples: Iterable[float]) -> None:
        for s in samples:
            self.push(s)

    def minimum(self) -> float:
        return min(self._samples)

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)

    def clear(self) -> None:
        self._samples.clear()


def _rank(entry: Optional[RateEntry]) -> float:
    return -math.inf if entry is None else entry.rate_mbps


def adapt_rate(window: SnrWindow, current: Optional[RateEntry], table: RateTable = DEFAULT_TABLE) -> Optional[RateEntry]:
    """Drop to the rate of the worst buffered SNR at once; climb only to a
    rate whose threshold every buffered sample clears."""
    if not len(window):
        raise ValueError("cannot adapt on an empty window")
    candidate = rate_for_snr(window.minimum(), table)
    if _rank(candidate) < _rank(current):
        return candidate
    if _rank(candidate) > _rank(current):
        best = current
        for e in table.entries:
            if _rank(e) > _rank(best) and all(s >= e.snr_threshold_db for s in window):
                best = e
        return best
    return current

