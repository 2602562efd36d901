"""Drifting device clocks and beacon-based synchronization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np


@dataclass
class DeviceClock:
    drift_ppm: float = 0.0
    offset_us: float = 0.0
    last_sync_us: float = 0.0

    def local(self, true_us: float) -> float:
        return true_us * (1 + self.drift_ppm * 1e-6) + self.offset_us

    def error(self, true_us: float) -> float:
        return self.local(true_us) - true_us

    def sync(self, true_us: float, reference_local_us: float) -> None:
        """Set the clock so it reads ``reference_local_us`` at ``true_us``."""
        self.offset_us = reference_local_us - true_us * (1 + self.drift_ppm * 1e-6)
        self.last_sync_us = true_us


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    drift_ppm: float = 0.0
    offset_us: float = 0.0
    level: int = 1
    # level-2 devices name the level-1 device they listen to
    parent: Optional[str] = None


@dataclass
class ClockModel:
    devices: List[DeviceSpec] = field(default_factory=list)
    # beacon phase of level-1 devices as a fraction of the beacon period
    relay_phase: float = 0.5
    beacon_loss: float = 0.0

    def __post_init__(self):
        names = [d.name for d in self.devices]
        if len(set(names)) != len(names):
            raise ValueError("device names must be unique")
        by_name = {d.name: d for d in self.devices}
        for d in self.devices:
            if d.level not in (1, 2):
                raise ValueError(f"{d.name}: level must be 1 or 2")
            if d.level == 2:
                p = by_name.get(d.parent)
                if p is None or p.level != 1:
                    raise ValueError(f"{d.name}: parent must name a level-1 device")
        if not 0 <= self.relay_phase < 1:
            raise ValueError("relay_phase must lie in [0, 1)")
        if not 0 <= self.beacon_loss < 1:
            raise ValueError("beacon_loss must lie in [0, 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "ClockModel":
        devs = [DeviceSpec(**d) for d in doc.get("devices", [])]
        return cls(devs, float(doc.get("relay_phase", 0.5)), float(doc.get("beacon_loss", 0.0)))


@dataclass
class SyncSeries:
    times_us: np.ndarray
    errors_us: Dict[str, np.ndarray]

    def max_error(self, name: str) -> float:
        return float(self.errors_us[name].max())

    def mean_error(self, name: str) -> float:
        return float(self.errors_us[name].mean())


def simulate_sync(
    model: ClockModel,
    beacon_period_us: float,
    levels: int = 2,
    duration_us: float = 1e6,
    sample_period_us: Optional[float] = None,
    seed=0,
) -> SyncSeries:
    """Sample ``|local - true|`` for every device up to ``levels``.

    The master AP is the time reference and beacons at ``k * period``.
    Level-1 devices reset on each heard master beacon; a level-1 device
    relays its own beacon ``relay_phase`` of a period later, which level-2
    devices lock onto, inheriting the relay's error at that instant.
    A sample taken at a beacon instant sees the clock before the reset.
    """
    if levels not in (1, 2):
        raise ValueError("levels must be 1 or 2")
    if beacon_period_us <= 0:
        raise ValueError("beacon period must be positive")
    if duration_us < 0:
        raise ValueError("duration must be non-negative")
    step = sample_period_us or beacon_period_us / 16
    times = np.arange(0.0, duration_us + step / 2, step)
    rng = np.random.default_rng(seed)
    devs = [d for d in model.devices if d.level <= levels]
    clocks = {d.name: DeviceClock(d.drift_ppm, d.offset_us) for d in devs}

    # events: (time, order, kind, name); samples before syncs at equal times
    events = [(t, 0, "sample", "") for t in times]
    relay = model.relay_phase * beacon_period_us
    k = 0
    while k * beacon_period_us <= duration_us:
        t0 = k * beacon_period_us
        for d in devs:
            if d.level == 1:
                events.append((t0, 1, "sync", d.name))
            elif t0 + relay <= duration_us:
                events.append((t0 + relay, 1, "sync", d.name))
        k += 1
    events.sort(key=lambda e: (e[0], e[1]))

    by_name = {d.name: d for d in devs}
    out = {d.name: [] for d in devs}
    for t, _, kind, name in events:
        if kind == "sample":
            for n, c in clocks.items():
                out[n].append(abs(c.error(t)))
            continue
        if model.beacon_loss and rng.random() < model.beacon_loss:
            continue
        d = by_name[name]
        ref = t if d.level == 1 else clocks[d.parent].local(t)
        clocks[name].sync(t, ref)
    return SyncSeries(times, {n: np.array(v) for n, v in out.items()})
