"""Superframe-by-superframe network simulation with the rate-adaptation and
rescheduling loop."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rtwifi.core import ChannelAssignment, Cluster, Ident, Task, Timeline, verify_schedule
from rtwifi.netsim.clock import SyncSeries, simulate_sync
from rtwifi.netsim.queues import QueueState
from rtwifi.netsim.scenario import Scenario
from rtwifi.phyrate import AirtimeParams, RateEntry, SnrWindow, adapt_rate, rate_for_snr
from rtwifi.sched.channels import assign_channels_hcs
from rtwifi.sched.exact import schedule_exact
from rtwifi.sched.tasksched import Infeasible, SchedulingError, schedule_edf, schedule_hts

log = logging.getLogger(__name__)

_SOLVERS = {"hts": schedule_hts, "edf": schedule_edf, "exact": schedule_exact}


@dataclass
class LinkMetrics:
    link: Ident
    transmitted: int = 0
    delivered: int = 0
    idle_slots: int = 0
    delays_slots: List[int] = field(default_factory=list)
    stage_transmitted: List[int] = field(default_factory=list)
    stage_delivered: List[int] = field(default_factory=list)

    @property
    def lost(self) -> int:
        return self.transmitted - self.delivered

    @property
    def pdr(self) -> float:
        return self.delivered / self.transmitted if self.transmitted else 0.0

    def stage_pdr(self) -> List[Optional[float]]:
        return [d / t if t else None for t, d in zip(self.stage_transmitted, self.stage_delivered)]


@dataclass(frozen=True)
class RateChange:
    time_us: float
    superframe: int
    link: Ident
    old_mbps: int
    new_mbps: int
    reason: str  # adapt | clamped


@dataclass(frozen=True)
class ScheduleUpdate:
    time_us: float
    superframe: int
    ok: bool
    solver: str
    detail: str


@dataclass
class MetricsReport:
    seed: int
    duration_us: float
    atomic_slot_us: float
    frame_bytes: int
    links: Dict[Ident, LinkMetrics]
    rate_log: List[RateChange]
    schedule_log: List[ScheduleUpdate]
    final_rates: Dict[Ident, int]
    sync: Optional[SyncSeries] = None

    def throughput_mbps(self, link: Ident) -> float:
        return self.links[link].delivered * 8 * self.frame_bytes / self.duration_us

    @property
    def infeasible_events(self) -> int:
        return sum(not u.ok for u in self.schedule_log)

    def summary(self) -> dict:
        out = {"seed": self.seed, "duration_us": self.duration_us, "links": {}, "infeasible_events": self.infeasible_events}
        for k, m in self.links.items():
            d = np.array(m.delays_slots) if m.delays_slots else np.zeros(1)
            out["links"][str(k)] = {
                "transmitted": m.transmitted,
                "delivered": m.delivered,
                "lost": m.lost,
                "pdr": m.pdr,
                "throughput_mbps": self.throughput_mbps(k),
                "stage_pdr": m.stage_pdr(),
                "delay_mean_slots": float(d.mean()),
                "delay_max_slots": int(d.max()),
                "delay_mean_us": float(d.mean() * self.atomic_slot_us),
                "delay_max_us": float(d.max() * self.atomic_slot_us),
                "final_rate_mbps": self.final_rates[k],
            }
        out["rate_changes"] = len(self.rate_log)
        out["schedule_updates"] = len(self.schedule_log)
        if self.sync is not None:
            out["sync_max_error_us"] = {n: self.sync.max_error(n) for n in self.sync.errors_us}
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def links_csv(self) -> str:
        rows = [["link", "transmitted", "delivered", "lost", "pdr", "throughput_mbps"]]
        for k, m in self.links.items():
            rows.append([k, m.transmitted, m.delivered, m.lost, f"{m.pdr:.6f}", f"{self.throughput_mbps(k):.6f}"])
        return _csv(rows)

    def stages_csv(self) -> str:
        rows = [["link", "stage", "transmitted", "delivered", "pdr"]]
        for k, m in self.links.items():
            for i, (t, d) in enumerate(zip(m.stage_transmitted, m.stage_delivered)):
                rows.append([k, i, t, d, f"{d / t:.6f}" if t else ""])
        return _csv(rows)

    def rates_csv(self) -> str:
        rows = [["time_us", "superframe", "link", "old_mbps", "new_mbps", "reason"]]
        rows += [[f"{r.time_us:.1f}", r.superframe, r.link, r.old_mbps, r.new_mbps, r.reason] for r in self.rate_log]
        return _csv(rows)

    def schedule_csv(self) -> str:
        rows = [["time_us", "superframe", "ok", "solver", "detail"]]
        rows += [[f"{u.time_us:.1f}", u.superframe, int(u.ok), u.solver, u.detail] for u in self.schedule_log]
        return _csv(rows)

    def delays_csv(self) -> str:
        """Delay histogram per link."""
        rows = [["link", "delay_slots", "delay_us", "count"]]
        for k, m in self.links.items():
            vals, counts = np.unique(np.array(m.delays_slots, dtype=int), return_counts=True)
            rows += [[k, int(v), f"{v * self.atomic_slot_us:.1f}", int(c)] for v, c in zip(vals, counts)]
        return _csv(rows)

    def sync_csv(self) -> str:
        rows = [["time_us", "device", "error_us"]]
        if self.sync is not None:
            for n, errs in self.sync.errors_us.items():
                rows += [[f"{t:.3f}", n, f"{e:.6f}"] for t, e in zip(self.sync.times_us, errs)]
        return _csv(rows)

    def csv_files(self) -> Dict[str, str]:
        return {
            "links.csv": self.links_csv(),
            "stages.csv": self.stages_csv(),
            "rates.csv": self.rates_csv(),
            "schedule.csv": self.schedule_csv(),
            "delays.csv": self.delays_csv(),
            "sync.csv": self.sync_csv(),
        }


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def solve(tasks: Sequence[Task], clusters: Sequence[Cluster], channel_count: int, horizon: int, solver: str):
    """Channel assignment plus one timeline per used channel."""
    by_cluster = {}
    for t in tasks:
        by_cluster.setdefault(t.cluster_id, []).append(t)
    clusters = [Cluster(c.id, by_cluster.get(c.id, [])) for c in clusters]
    assignment = assign_channels_hcs(clusters, channel_count)
    timelines = []
    for ch in range(1, channel_count + 1):
        on = [t for c in clusters if assignment.channel_of(c.id) == ch for t in c.tasks]
        if on:
            timelines.append(_SOLVERS[solver](on, channel=ch, horizon=horizon))
    verdict = verify_schedule(timelines, tasks, assignment)
    if not verdict.ok:
        raise AssertionError("installed schedule fails verification: " + "; ".join(v.message for v in verdict.violations))
    return assignment, timelines


def _lowest_fitting(table, allocated: int) -> RateEntry:
    return next(e for e in table.entries if e.atomic_slot_usage <= allocated)


def run_simulation(scenario: Scenario) -> MetricsReport:
    """Raises :class:`Infeasible` when the initial rates admit no schedule."""
    seed = scenario.seed if scenario.seed is not None else int(np.random.SeedSequence().entropy % (2**63))
    table = scenario.rate_table
    sf = scenario.superframe
    prefix = len(sf.reserved)
    horizon = scenario.region
    ad = scenario.adaptation
    links = scenario.links
    index = {k: i for i, k in enumerate(links)}

    rates: Dict[Ident, RateEntry] = {}
    for t in scenario.tasks:
        r = ad.initial_rates.get(str(t.id))
        rates[t.id] = table.by_rate(r) if r is not None else (rate_for_snr(scenario.trace.snr(t.id, 0.0), table) or table.lowest)
    tasks = list(scenario.tasks)
    _, timelines = solve(tasks, scenario.clusters, scenario.channel_count, horizon, ad.solver)
    allocated = {t.id: t.unit_size for t in tasks}
    for k, e in rates.items():
        if e.atomic_slot_usage > allocated[k]:
            rates[k] = _lowest_fitting(table, allocated[k])
    failed_sizes = None

    rngs = {k: np.random.default_rng([seed, i]) for k, i in index.items()}
    windows = {k: SnrWindow(ad.window) for k in links}
    queues = QueueState(scenario.queue_policy, scenario.queue_count or len(links), len(links))
    stages = len(scenario.trace.stages_us)
    metrics = {k: LinkMetrics(k, stage_transmitted=[0] * stages, stage_delivered=[0] * stages) for k in links}
    rate_log: List[RateChange] = []
    schedule_log = [ScheduleUpdate(0.0, 0, True, ad.solver, "initial")]
    frame_bytes = scenario.payload_bytes + AirtimeParams().frame_overhead_bytes
    sf_us = sf.duration_us
    AS = sf.atomic_slot_us

    def frame_events(tasks, timelines):
        ev = []
        for t in tasks:
            for k in range(horizon // t.period):
                ev.append((prefix + k * t.period, 0, t.id, t.unit_count))
        for tl in timelines:
            cells = tl.cells()
            for p in tl.placements:
                # engine invariant: the unit owns every cell it occupies
                assert all(cells[c] is p.unit for c in range(p.start, p.finish))
                ev.append((prefix + p.start, 1, p.unit.task_id, p.unit.size))
        ev.sort(key=lambda e: (e[0], e[1], index[e[2]]))
        return ev

    events = frame_events(tasks, timelines)
    n_frames = scenario.superframe_count
    for f in range(n_frames):
        base = f * sf.slot_count
        for slot, kind, link, n in events:
            t_us = (base + slot) * AS
            if t_us >= scenario.duration_us:
                break
            if kind == 0:
                for _ in range(n):
                    queues.enqueue(index[link], base + slot)
                continue
            m = metrics[link]
            rate = rates[link]
            assert rate.atomic_slot_usage <= n, "transmission overruns its allocation"
            sent = queues.pop_for(index[link])
            if sent is None:
                m.idle_slots += 1
                continue
            snr = scenario.trace.snr(link, t_us)
            rng = rngs[link]
            ok = rng.random() < scenario.pdr_model.pdr(snr, rate.rate_mbps, table)
            stage = scenario.trace.stage_of(t_us)
            m.transmitted += 1
            m.stage_transmitted[stage] += 1
            if ok:
                m.delivered += 1
                m.stage_delivered[stage] += 1
            m.delays_slots.append(base + slot - sent)
            # the preamble is measured whether or not the payload decodes
            noise = rng.normal(0.0, ad.measurement_noise_db) if ad.measurement_noise_db > 0 else 0.0
            windows[link].push(snr + noise)

        if not ad.enabled or (f + 1) % ad.evaluation_period or f + 1 >= n_frames:
            continue
        boundary_us = (f + 1) * sf_us
        wanted = {}
        for k in links:
            if len(windows[k]):
                new = adapt_rate(windows[k], rates[k], table) or table.lowest
                if new != rates[k]:
                    wanted[k] = new
        if not wanted:
            continue
        target = {k: wanted.get(k, rates[k]) for k in links}
        sizes = {t.id: scenario.pinned_sizes.get(t.id, target[t.id].atomic_slot_usage) for t in tasks}
        applied = dict(target)
        reason = "adapt"
        if ad.reschedule and sizes != allocated and sizes != failed_sizes:
            new_tasks = [t.with_unit_size(sizes[t.id]) for t in tasks]
            try:
                _, new_tl = solve(new_tasks, scenario.clusters, scenario.channel_count, horizon, ad.solver)
            except (SchedulingError, ValueError) as exc:
                failed_sizes = sizes
                schedule_log.append(ScheduleUpdate(boundary_us, f + 1, False, ad.solver, str(exc)))
                log.info("reschedule infeasible at superframe %d: %s", f + 1, exc)
            else:
                tasks, timelines, allocated, failed_sizes = new_tasks, new_tl, sizes, None
                events = frame_events(tasks, timelines)
                schedule_log.append(
                    ScheduleUpdate(boundary_us, f + 1, True, ad.solver, " ".join(f"{k}:B={sizes[k]}" for k in links))
                )
        # a link whose rate needs more slots than it holds keeps the most
        # robust rate that still fits its allocation
        for k, e in target.items():
            if e.atomic_slot_usage > allocated[k]:
                applied[k] = _lowest_fitting(table, allocated[k])
        for k in links:
            if applied[k] != rates[k]:
                why = reason if applied[k] == target[k] else "clamped"
                rate_log.append(RateChange(boundary_us, f + 1, k, rates[k].rate_mbps, applied[k].rate_mbps, why))
                rates[k] = applied[k]

    sync = None
    if scenario.clocks.devices:
        levels = max(d.level for d in scenario.clocks.devices)
        sync = simulate_sync(scenario.clocks, sf_us, levels, scenario.duration_us, sf_us / 4, seed=[seed, len(links)])
    return MetricsReport(
        seed=seed,
        duration_us=scenario.duration_us,
        atomic_slot_us=AS,
        frame_bytes=frame_bytes,
        links=metrics,
        rate_log=rate_log,
        schedule_log=schedule_log,
        final_rates={k: rates[k].rate_mbps for k in links},
        sync=sync,
    )


__all__ = ["LinkMetrics", "RateChange", "ScheduleUpdate", "MetricsReport", "run_simulation", "solve", "Infeasible"]
