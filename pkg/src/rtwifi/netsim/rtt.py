"""Request/response round trips over a fixed uplink/downlink slot layout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

BEACON = "B"


def ap_slot(station: str) -> str:
    return f"AP:{station}"


def alternating_layout(stations: int, slot_count: int = 121) -> List[str]:
    """Beacon, then repeating cycles of station and AP slots.

    One station alternates STA, AP. Two stations use S1, AP:S1, S2, AP:S2,
    so a reply slot directly follows its request slot. Three or more put all
    station slots first, leaving a wider gap before each reply slot.
    """
    names = [f"S{i + 1}" for i in range(stations)]
    if stations < 1:
        raise ValueError("need at least one station")
    if stations <= 2:
        cycle = [x for n in names for x in (n, ap_slot(n))]
    else:
        cycle = names + [ap_slot(n) for n in names]
    body = slot_count - 1
    if body % len(cycle):
        raise ValueError(f"{body} data slots do not hold whole cycles of {len(cycle)}")
    return [BEACON] + cycle * (body // len(cycle))


@dataclass(frozen=True)
class RttStats:
    samples_us: np.ndarray

    @property
    def mean_us(self) -> float:
        return float(self.samples_us.mean())

    @property
    def std_us(self) -> float:
        return float(self.samples_us.std())

    @property
    def worst_us(self) -> float:
        return float(self.samples_us.max())


def _next_start(starts: np.ndarray, period: float, t: float) -> float:
    """Earliest slot start at or after ``t`` among per-superframe ``starts``."""
    k, phase = divmod(t, period)
    i = np.searchsorted(starts, phase - 1e-9)
    if i < len(starts):
        return k * period + starts[i]
    return (k + 1) * period + starts[0]


def round_trip_us(layout: Sequence[str], station: str, request_us: float, slot_us: float = 174.0, processing_us: float = 100.0) -> float:
    """Time from a request being ready at ``station`` to the end of the AP's
    reply slot. The request goes out in the station's next slot; the AP
    answers in the first reply slot starting after reception plus
    ``processing_us``."""
    period = len(layout) * slot_us
    up = np.array([i * slot_us for i, o in enumerate(layout) if o == station])
    down = np.array([i * slot_us for i, o in enumerate(layout) if o in (ap_slot(station), "AP")])
    if not len(up) or not len(down):
        raise ValueError(f"layout has no uplink or reply slot for {station}")
    tx = _next_start(up, period, request_us)
    reply = _next_start(down, period, tx + slot_us + processing_us)
    return reply + slot_us - request_us


def rtt_experiment(
    layout: Sequence[str],
    station: str = "S1",
    requests: int = 1000,
    slot_us: float = 174.0,
    processing_us: float = 100.0,
    seed=0,
) -> RttStats:
    """Requests arrive uniformly over one superframe."""
    rng = np.random.default_rng(seed)
    period = len(layout) * slot_us
    times = rng.uniform(0, period, size=requests)
    return RttStats(np.array([round_trip_us(layout, station, t, slot_us, processing_us) for t in times]))
