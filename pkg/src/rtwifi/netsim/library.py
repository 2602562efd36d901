"""Ready-made scenario documents for the reference experiments."""

from __future__ import annotations

from typing import List, Sequence

# two clusters on one channel; task i serves link LINKS[i]
CASE_LINKS = ["STA1", "STA2", "AP1", "AP2", "STA3", "STA4"]
CASE_PERIODS = [15, 15, 15, 15, 30, 30]
CASE_DEADLINES = [10, 10, 10, 10, 29, 30]
CASE_UNITS = [1, 1, 1, 2, 2, 1]

# per-stage SNR (dB) of the links near the interferer
CASE_STAGE_SNR = {
    "AP2": [20.8, 20.6, 20.5],
    "STA3": [21.1, 15.9, 14.2],
    "STA4": [26.2, 19.0, 16.8],
}

# interference-on levels of successive seconds, chosen on rate thresholds so
# each rising second lifts the usable rate by one table position
STEP_LEVELS = [27, 23, 20, 18, 16, 14, 12, 14, 16, 18, 20, 23, 27]


def case_study_tasks() -> List[dict]:
    return [
        {"id": name, "cluster": 1 if i < 3 else 2, "unit_count": u, "deadline": d, "period": p}
        for i, (name, p, d, u) in enumerate(zip(CASE_LINKS, CASE_PERIODS, CASE_DEADLINES, CASE_UNITS))
    ]


def _case_base(duration_us: float, reschedule: bool, seed: int) -> dict:
    return {
        "superframe": {"slot_count": 32, "atomic_slot_us": 174, "beacon_slots": [0], "shared_slots": [1]},
        "channel_count": 1,
        "clusters": [{"id": 1}, {"id": 2}],
        "tasks": case_study_tasks(),
        "payload_bytes": 500,
        "duration_us": duration_us,
        "adaptation": {"enabled": True, "reschedule": reschedule, "window": 20, "evaluation_period": 1, "solver": "hts"},
        "queues": {"policy": "assigned"},
        "clocks": {
            "devices": [
                {"name": "AP2", "drift_ppm": 10.0, "level": 1},
                {"name": "STA3", "drift_ppm": 10.0, "level": 2, "parent": "AP2"},
                {"name": "STA4", "drift_ppm": 10.0, "level": 2, "parent": "AP2"},
            ]
        },
        "seed": seed,
    }


def case_study_scenario(stage_us: float = 5e6, reschedule: bool = True, seed: int = 0) -> dict:
    """Three interference stages; ``reschedule=False`` keeps the first
    schedule, so links can only pick rates that fit their stage-1 slots."""
    doc = _case_base(3 * stage_us, reschedule, seed)
    doc["name"] = "case-study" if reschedule else "case-study-fixed"
    doc["trace"] = {
        "default_db": 30.0,
        "links": {k: [[i * stage_us, v] for i, v in enumerate(vals)] for k, vals in CASE_STAGE_SNR.items()},
        "stages_us": [0.0, stage_us, 2 * stage_us],
    }
    return doc


def square_wave_trace(levels: Sequence[float], period_us: float = 1e6, clean_db: float = 30.0) -> List[list]:
    """Interference on for the first half of each period at the given level,
    off (``clean_db``) for the second half."""
    steps = []
    for i, level in enumerate(levels):
        steps.append([i * period_us, float(level)])
        steps.append([i * period_us + period_us / 2, clean_db])
    return steps


def staged_interference_scenario(
    link: str = "STA3",
    levels: Sequence[float] = STEP_LEVELS,
    period_us: float = 1e6,
    window: int = 256,
    reschedule: bool = True,
    adapt: bool = True,
    seed: int = 0,
) -> dict:
    """One link under a rising-then-falling interference square wave.

    The SNR window must outlast an interference-off half period, otherwise
    the rate would bounce back up between bursts.
    """
    doc = _case_base(len(levels) * period_us, reschedule, seed)
    doc["name"] = "staged-interference" + ("" if reschedule and adapt else "-frozen")
    doc["adaptation"]["window"] = window
    doc["adaptation"]["enabled"] = adapt
    doc["trace"] = {
        "default_db": 30.0,
        "links": {link: square_wave_trace(levels, period_us)},
        # even stages are interference-on halves, odd stages the clean halves
        "stages_us": [i * period_us / 2 for i in range(2 * len(levels))],
    }
    return doc


def throughput_scenario(stations: int = 1, superframes: int = 100, seed: int = 0) -> dict:
    """127-slot superframe at 54 Mbps: one beacon slot, AP slots, and the
    remaining slots split evenly across the stations."""
    if stations < 1:
        raise ValueError("need at least one station")
    ap_slots = 1 if stations == 1 else 6
    region = 127 - 1 - ap_slots
    if region % stations:
        raise ValueError(f"{region} slots do not split across {stations} stations")
    share = region // stations
    return {
        "name": f"throughput-{stations}",
        "superframe": {"slot_count": 127, "atomic_slot_us": 174, "beacon_slots": [0], "shared_slots": list(range(1, 1 + ap_slots))},
        "channel_count": 1,
        "clusters": [{"id": 1}],
        "tasks": [
            {"id": f"STA{i + 1}", "cluster": 1, "unit_count": share, "deadline": region, "period": region}
            for i in range(stations)
        ],
        "payload_bytes": 500,
        "duration_us": superframes * 127 * 174.0,
        "trace": {"default_db": 30.0},
        "adaptation": {"enabled": True, "reschedule": True, "initial_rates": {f"STA{i + 1}": 54 for i in range(stations)}},
        "queues": {"policy": "assigned"},
        "seed": seed,
    }
