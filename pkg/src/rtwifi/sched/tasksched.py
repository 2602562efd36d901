"""Non-preemptive EDF task scheduling on one channel, with and without
inserted idle time."""

from __future__ import annotations

import heapq
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from rtwifi.core import (
    ChannelAssignment,
    Placement,
    Task,
    Timeline,
    TransmissionUnit,
    expand_instances,
    hyperperiod,
    verify_schedule,
)
from rtwifi.sched.intervals import IntervalSet

log = logging.getLogger(__name__)


class SchedulingError(Exception):
    pass


class Infeasible(SchedulingError):
    """No schedule: ``unit`` names the transmission unit that cannot fit."""

    def __init__(self, message: str, unit: Optional[TransmissionUnit] = None):
        super().__init__(message)
        self.unit = unit


class BudgetExhausted(SchedulingError):
    pass


def _debug_verify() -> bool:
    return os.environ.get("RTWIFI_VERIFY", "") not in ("", "0")


def check_timeline(timeline: Timeline, tasks: Sequence[Task]) -> None:
    """Raise AssertionError when ``timeline`` fails the independent verifier."""
    assignment = ChannelAssignment({t.cluster_id: timeline.channel for t in tasks}, max(timeline.channel, 1))
    verdict = verify_schedule([timeline], tasks, assignment)
    if not verdict.ok:
        raise AssertionError("solver produced an invalid timeline: " + "; ".join(v.message for v in verdict.violations))


@dataclass
class _Instance:
    task: Task
    k: int
    units: List[TransmissionUnit]
    next_unit: int = 0  # index into units
    release: int = 0  # release of the current unit
    order: tuple = field(default=())

    @property
    def current(self) -> TransmissionUnit:
        return self.units[self.next_unit]


class ReadyQueue:
    """Released instances keyed by the deadline of their current unit.

    Ties break on cluster id, task id, then instance index.
    """

    def __init__(self):
        self._heap = []

    def push(self, inst: _Instance) -> None:
        heapq.heappush(self._heap, (inst.current.deadline, inst.order, inst.k, id(inst), inst))

    def pop(self) -> _Instance:
        return heapq.heappop(self._heap)[-1]

    def __len__(self):
        return len(self._heap)


def reject_overlong(tasks: Sequence[Task]) -> None:
    """Raise :class:`Infeasible` for a task whose first unit cannot meet its
    own deadline even on an empty channel (``B * U > D``)."""
    for task in tasks:
        B, U, D = task.unit_size, task.unit_count, task.deadline
        if B * U > D:
            first = TransmissionUnit(task.id, task.cluster_id, 1, 1, B, 0, D - (U - 1) * B)
            raise Infeasible(f"task {task.id} instance 1 unit 1: B*U = {B * U} exceeds deadline {D}", first)


def _instances(tasks: Sequence[Task], horizon: int) -> List[_Instance]:
    units = expand_instances(tasks, horizon)
    grouped: Dict[tuple, List[TransmissionUnit]] = {}
    for u in units:
        grouped.setdefault((u.task_id, u.instance), []).append(u)
    by_id = {t.id: t for t in tasks}
    out = []
    for (task_id, k), us in grouped.items():
        task = by_id[task_id]
        us.sort(key=lambda u: u.unit)
        out.append(_Instance(task, k, us, 0, us[0].release, task.key))
    return out


def _run(
    tasks: Sequence[Task],
    channel: int,
    idle_insertion: bool,
    horizon: Optional[int] = None,
    stats: Optional[dict] = None,
) -> Timeline:
    if len({t.id for t in tasks}) != len(tasks):
        raise ValueError("task ids must be unique")
    H = hyperperiod(tasks) if horizon is None else horizon
    timeline = Timeline(channel=channel, horizon=H)
    if not tasks:
        return timeline
    reject_overlong(tasks)
    instances = _instances(tasks, H)
    intervals = IntervalSet((u.key, u.release, u.deadline, u.size) for inst in instances for u in inst.units)

    waiting = []  # (release, order, k, id, inst)
    for inst in instances:
        heapq.heappush(waiting, (inst.release, inst.order, inst.k, id(inst), inst))
    ready = ReadyQueue()
    t = 0
    while waiting or ready:
        while waiting and waiting[0][0] <= t:
            ready.push(heapq.heappop(waiting)[-1])
        if not ready:
            t = waiting[0][0]
            continue
        inst = ready.pop()
        unit = inst.current
        B, d = unit.size, unit.deadline
        r = inst.release
        if idle_insertion:
            s = intervals.latest_blocking_start(t, B, d)
            if s is not None and s > r:
                r = s
        if max(r, t) + B > d:
            raise Infeasible(
                f"task {unit.task_id} instance {unit.instance} unit {unit.unit}: "
                f"earliest start {max(r, t)} + B={B} exceeds deadline {d}",
                unit,
            )
        if r > t:
            inst.release = r
            intervals.set_release(unit.key, r)
            if stats is not None:
                stats["deferrals"] = stats.get("deferrals", 0) + 1
            heapq.heappush(waiting, (r, inst.order, inst.k, id(inst), inst))
            continue
        timeline.placements.append(Placement(unit, t))
        intervals.remove(unit.key)
        t += B
        inst.next_unit += 1
        if inst.next_unit < len(inst.units):
            inst.release = t
            intervals.set_release(inst.current.key, t)
            ready.push(inst)

    if _debug_verify():
        check_timeline(timeline, tasks)
    return timeline


def schedule_hts(
    tasks: Sequence[Task], channel: int = 1, horizon: Optional[int] = None, stats: Optional[dict] = None
) -> Timeline:
    """EDF over unit deadlines with idle time inserted ahead of tight intervals.

    Before running a unit at ``t`` the scheduler looks for an interval
    ``[s, e]`` of pending units inside ``[t, d]`` that would be starved,
    i.e. ``t + B + demand > e``; if one exists the unit's release moves to the
    latest such ``s`` and it goes back to waiting. Raises :class:`Infeasible`.
    Pass a dict as ``stats`` to collect the deferral count.
    """
    return _run(tasks, channel, idle_insertion=True, horizon=horizon, stats=stats)


def schedule_edf(tasks: Sequence[Task], channel: int = 1, horizon: Optional[int] = None) -> Timeline:
    """Work-conserving non-preemptive EDF (HTS without idle insertion)."""
    return _run(tasks, channel, idle_insertion=False, horizon=horizon)


__all__ = [
    "SchedulingError",
    "Infeasible",
    "BudgetExhausted",
    "ReadyQueue",
    "schedule_hts",
    "schedule_edf",
    "check_timeline",
]
