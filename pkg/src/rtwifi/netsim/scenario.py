"""Scenario documents: parsing, validation and normalization.

A scenario is a JSON tree::

    {
      "superframe": {"slot_count": 32, "atomic_slot_us": 174,
                     "beacon_slots": [0], "shared_slots": [1]},
      "channel_count": 1,
      "clusters": [{"id": 1}, {"id": 2}],
      "tasks": [{"id": "STA1", "cluster": 1, "unit_count": 1,
                 "deadline": 10, "period": 15}],
      "payload_bytes": 500,
      "duration_us": 1000000,
      "trace": {"default_db": 30, "links": {"STA1": [[0, 27], [500000, 30]]},
                "stages_us": [0, 500000]},
      "pdr_model": {"slope_per_db": 2, "midpoint_offset_db": -2},
      "adaptation": {"enabled": true, "reschedule": true, "window": 20,
                     "evaluation_period": 1, "solver": "hts",
                     "initial_rates": {}, "measurement_noise_db": 0},
      "queues": {"policy": "assigned", "count": 16},
      "clocks": {"devices": [{"name": "AP2", "drift_ppm": 10, "level": 1}]},
      "fail_on_infeasible": false,
      "seed": 0
    }

Each task is one link; its unit size follows from the link's rate unless
``unit_size`` pins it. The scheduled region is the superframe minus the
reserved prefix and must be a multiple of the task hyper-period.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from rtwifi.core import Cluster, Ident, SuperframeConfig, Task, TaskError, hyperperiod
from rtwifi.netsim.clock import ClockModel
from rtwifi.netsim.queues import ASSIGNED, POLICIES
from rtwifi.phyrate import DEFAULT_THRESHOLDS, RateTable, build_rate_table, rate_for_snr, rate_table_from_config

SOLVERS = ("hts", "edf", "exact")
SECTIONS = {
    "superframe", "channel_count", "clusters", "tasks", "payload_bytes", "duration_us", "trace",
    "pdr_model", "adaptation", "queues", "clocks", "fail_on_infeasible", "seed", "rate_table", "name",
}


class ScenarioError(ValueError):
    """Invalid scenario; ``where`` is a path into the document."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


class InfeasibleTask(ScenarioError):
    """A task whose units cannot fit their own deadline, whatever the schedule."""

    def __init__(self, where: str, message: str, task_id: Ident):
        super().__init__(where, message)
        self.task_id = task_id


@dataclass(frozen=True)
class PdrModel:
    """Logistic delivery probability per rate around ``threshold + offset``."""

    slope_per_db: float = 2.0
    midpoint_offset_db: float = -2.0
    midpoints: Dict[int, float] = field(default_factory=dict)

    def midpoint(self, rate_mbps: int, table: RateTable) -> float:
        if rate_mbps in self.midpoints:
            return self.midpoints[rate_mbps]
        return table.by_rate(rate_mbps).snr_threshold_db + self.midpoint_offset_db

    def pdr(self, snr_db: float, rate_mbps: int, table: RateTable) -> float:
        z = self.slope_per_db * (snr_db - self.midpoint(rate_mbps, table))
        if z < -700:
            return 0.0
        return 1.0 / (1.0 + math.exp(-z))


@dataclass(frozen=True)
class Adaptation:
    enabled: bool = True
    reschedule: bool = True
    window: int = 20
    evaluation_period: int = 1  # superframes
    solver: str = "hts"
    initial_rates: Dict[str, int] = field(default_factory=dict)  # keyed by str(link id)
    measurement_noise_db: float = 0.0


@dataclass(frozen=True)
class Trace:
    """Piecewise-constant SNR per link: sorted ``(start_us, snr_db)`` steps."""

    default_db: float = 30.0
    links: Dict[str, Tuple[Tuple[float, float], ...]] = field(default_factory=dict)  # keyed by str(link id)
    stages_us: Tuple[float, ...] = (0.0,)

    def snr(self, link: Ident, t_us: float) -> float:
        steps = self.links.get(str(link))
        if not steps:
            return self.default_db
        value = steps[0][1]
        for start, db in steps:
            if start > t_us:
                break
            value = db
        return value

    def stage_of(self, t_us: float) -> int:
        k = 0
        for i, s in enumerate(self.stages_us):
            if s <= t_us:
                k = i
        return k


@dataclass
class Scenario:
    superframe: SuperframeConfig
    clusters: List[Cluster]
    tasks: List[Task]  # unit sizes as given or as derived from initial rates
    channel_count: int = 1
    payload_bytes: int = 500
    duration_us: float = 1e6
    trace: Trace = field(default_factory=Trace)
    pdr_model: PdrModel = field(default_factory=PdrModel)
    adaptation: Adaptation = field(default_factory=Adaptation)
    queue_policy: str = ASSIGNED
    queue_count: Optional[int] = None
    clocks: ClockModel = field(default_factory=ClockModel)
    fail_on_infeasible: bool = False
    seed: Optional[int] = None
    rate_table: RateTable = field(default_factory=build_rate_table)
    pinned_sizes: Dict[Ident, int] = field(default_factory=dict)
    name: str = ""
    source: dict = field(default_factory=dict)

    @property
    def links(self) -> List[Ident]:
        return [t.id for t in self.tasks]

    @property
    def region(self) -> int:
        """Atomic slots per superframe available to link tasks."""
        return self.superframe.slot_count - len(self.superframe.reserved)

    @property
    def superframe_count(self) -> int:
        return max(1, math.ceil(self.duration_us / self.superframe.duration_us - 1e-9))


def _req(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(where, f"missing required key '{key}'")
    return doc[key]


def _int(v, where: str, minimum: Optional[int] = None) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and not v.is_integer()):
        raise ScenarioError(where, f"expected an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ScenarioError(where, f"must be >= {minimum}")
    return v


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(where, f"expected a finite number, got {v!r}")
    return float(v)


def _ident(v, where: str) -> Ident:
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ScenarioError(where, f"identifier must be an int or string, got {v!r}")
    return v


def _reserved_prefix(cfg: SuperframeConfig) -> bool:
    return cfg.reserved == frozenset(range(len(cfg.reserved)))


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    unknown = set(doc) - SECTIONS
    if unknown:
        raise ScenarioError("$", f"unknown sections {sorted(unknown)}")

    sf = doc.get("superframe", {})
    try:
        superframe = SuperframeConfig(
            slot_count=_int(sf.get("slot_count", 127), "$.superframe.slot_count", 1),
            atomic_slot_us=_num(sf.get("atomic_slot_us", 174), "$.superframe.atomic_slot_us"),
            beacon_slots=frozenset(_int(s, "$.superframe.beacon_slots") for s in sf.get("beacon_slots", [0])),
            shared_slots=frozenset(_int(s, "$.superframe.shared_slots") for s in sf.get("shared_slots", [])),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("$.superframe", str(exc)) from exc
    if not _reserved_prefix(superframe):
        raise ScenarioError("$.superframe", "beacon and shared slots must form a prefix 0..k-1")

    table = build_rate_table()
    if "rate_table" in doc:
        try:
            table = rate_table_from_config(doc["rate_table"], atomic_slot_us=superframe.atomic_slot_us)
        except ValueError as exc:
            raise ScenarioError("$.rate_table", str(exc)) from exc
    elif superframe.atomic_slot_us != 174:
        table = build_rate_table(DEFAULT_THRESHOLDS, atomic_slot_us=superframe.atomic_slot_us)

    payload = _int(doc.get("payload_bytes", 500), "$.payload_bytes", 1)
    if payload != 500 and "rate_table" not in doc:
        table = build_rate_table(DEFAULT_THRESHOLDS, payload, superframe.atomic_slot_us)

    cluster_ids = []
    for i, c in enumerate(_req(doc, "clusters", "$")):
        cluster_ids.append(_ident(_req(c, "id", f"$.clusters[{i}]"), f"$.clusters[{i}].id"))
    if len(set(cluster_ids)) != len(cluster_ids):
        raise ScenarioError("$.clusters", "duplicate cluster id")
    if not cluster_ids:
        raise ScenarioError("$.clusters", "at least one cluster required")
    H = _int(doc.get("channel_count", 1), "$.channel_count", 1)

    ad = doc.get("adaptation", {})
    solver = ad.get("solver", "hts")
    if solver not in SOLVERS:
        raise ScenarioError("$.adaptation.solver", f"must be one of {SOLVERS}")
    initial_rates = {}
    for k, v in (ad.get("initial_rates") or {}).items():
        try:
            table.by_rate(_int(v, f"$.adaptation.initial_rates.{k}"))
        except ValueError as exc:
            raise ScenarioError(f"$.adaptation.initial_rates.{k}", str(exc)) from exc
        initial_rates[str(k)] = int(v)
    adaptation = Adaptation(
        enabled=bool(ad.get("enabled", True)),
        reschedule=bool(ad.get("reschedule", True)),
        window=_int(ad.get("window", 20), "$.adaptation.window", 1),
        evaluation_period=_int(ad.get("evaluation_period", 1), "$.adaptation.evaluation_period", 1),
        solver=solver,
        initial_rates=initial_rates,
        measurement_noise_db=_num(ad.get("measurement_noise_db", 0.0), "$.adaptation.measurement_noise_db"),
    )

    tr = doc.get("trace", {})
    links_tr = {}
    for k, steps in (tr.get("links") or {}).items():
        where = f"$.trace.links.{k}"
        if not isinstance(steps, list) or not steps:
            raise ScenarioError(where, "expected a non-empty list of [start_us, snr_db]")
        parsed = []
        for j, st in enumerate(steps):
            if not isinstance(st, (list, tuple)) or len(st) != 2:
                raise ScenarioError(f"{where}[{j}]", "expected [start_us, snr_db]")
            parsed.append((_num(st[0], f"{where}[{j}][0]"), _num(st[1], f"{where}[{j}][1]")))
        if parsed[0][0] != 0:
            raise ScenarioError(where, "trace must start at 0 to cover the whole run")
        if any(b[0] <= a[0] for a, b in zip(parsed, parsed[1:])):
            raise ScenarioError(where, "step start times must increase")
        links_tr[str(k)] = tuple(parsed)
    stages = tuple(_num(s, "$.trace.stages_us") for s in tr.get("stages_us", [0]))
    if not stages or stages[0] != 0 or any(b <= a for a, b in zip(stages, stages[1:])):
        raise ScenarioError("$.trace.stages_us", "must start at 0 and increase")
    trace = Trace(_num(tr.get("default_db", 30.0), "$.trace.default_db"), links_tr, stages)

    tasks = []
    pinned = {}
    for i, t in enumerate(_req(doc, "tasks", "$")):
        where = f"$.tasks[{i}]"
        tid = _ident(_req(t, "id", where), f"{where}.id")
        cid = _ident(_req(t, "cluster", where), f"{where}.cluster")
        if cid not in cluster_ids:
            raise ScenarioError(f"{where}.cluster", f"unknown cluster {cid!r}")
        if "unit_size" in t:
            B = _int(t["unit_size"], f"{where}.unit_size", 1)
            pinned[tid] = B
        else:
            rate = initial_rates.get(str(tid))
            if rate is None:
                entry = rate_for_snr(trace.snr(tid, 0.0), table) or table.lowest
                rate = entry.rate_mbps
                initial_rates[str(tid)] = rate
            B = table.by_rate(rate).atomic_slot_usage
        U = _int(_req(t, "unit_count", where), f"{where}.unit_count", 1)
        D = _int(_req(t, "deadline", where), f"{where}.deadline", 1)
        if B * U > D:
            raise InfeasibleTask(where, f"task {tid!r}: unit ({tid!r}, 1, 1) needs {B * U} slots before deadline {D}", tid)
        try:
            tasks.append(
                Task(
                    id=tid,
                    cluster_id=cid,
                    unit_size=B,
                    unit_count=U,
                    deadline=D,
                    period=_int(_req(t, "period", where), f"{where}.period", 1),
                )
            )
        except TaskError as exc:
            raise ScenarioError(where, str(exc)) from exc
    if not tasks:
        raise ScenarioError("$.tasks", "at least one task required")
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ScenarioError("$.tasks", "duplicate task id")
    for k in list(links_tr) + list(initial_rates):
        if k not in {str(i) for i in ids}:
            raise ScenarioError("$.trace.links" if k in links_tr else "$.adaptation.initial_rates", f"unknown link {k!r}")

    region = superframe.slot_count - len(superframe.reserved)
    hp = hyperperiod(tasks)
    if region % hp:
        raise ScenarioError("$.superframe", f"scheduled region of {region} slots is not a multiple of the hyper-period {hp}")

    q = doc.get("queues", {})
    policy = q.get("policy", ASSIGNED)
    if policy not in POLICIES:
        raise ScenarioError("$.queues.policy", f"must be one of {POLICIES}")
    qcount = _int(q["count"], "$.queues.count", 1) if "count" in q else None

    pm = doc.get("pdr_model", {})
    pdr = PdrModel(
        slope_per_db=_num(pm.get("slope_per_db", 2.0), "$.pdr_model.slope_per_db"),
        midpoint_offset_db=_num(pm.get("midpoint_offset_db", -2.0), "$.pdr_model.midpoint_offset_db"),
        midpoints={int(k): _num(v, f"$.pdr_model.midpoints.{k}") for k, v in (pm.get("midpoints") or {}).items()},
    )
    if pdr.slope_per_db <= 0:
        raise ScenarioError("$.pdr_model.slope_per_db", "must be positive")

    try:
        clocks = ClockModel.from_dict(doc.get("clocks", {}))
    except (TypeError, ValueError) as exc:
        raise ScenarioError("$.clocks", str(exc)) from exc

    seed = doc.get("seed")
    if seed is not None:
        seed = _int(seed, "$.seed", 0)
    duration = _num(doc.get("duration_us", 1e6), "$.duration_us")
    if duration <= 0:
        raise ScenarioError("$.duration_us", "must be positive")

    return Scenario(
        superframe=superframe,
        clusters=[Cluster(c, [t for t in tasks if t.cluster_id == c]) for c in cluster_ids],
        tasks=tasks,
        channel_count=H,
        payload_bytes=payload,
        duration_us=duration,
        trace=trace,
        pdr_model=pdr,
        adaptation=Adaptation(**{**adaptation.__dict__, "initial_rates": initial_rates}),
        queue_policy=policy,
        queue_count=qcount,
        clocks=clocks,
        fail_on_infeasible=bool(doc.get("fail_on_infeasible", False)),
        seed=seed,
        rate_table=table,
        pinned_sizes=pinned,
        name=str(doc.get("name", "")),
        source=copy.deepcopy(doc),
    )


def load_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    return parse_scenario(doc)


def normalized(scenario: Scenario) -> dict:
    """Document with every default spelled out; parses back to the same scenario."""
    sf = scenario.superframe
    ad = scenario.adaptation
    doc = {
        "name": scenario.name,
        "superframe": {
            "slot_count": sf.slot_count,
            "atomic_slot_us": sf.atomic_slot_us,
            "beacon_slots": sorted(sf.beacon_slots),
            "shared_slots": sorted(sf.shared_slots),
        },
        "channel_count": scenario.channel_count,
        "clusters": [{"id": c.id} for c in scenario.clusters],
        "tasks": [
            {
                "id": t.id,
                "cluster": t.cluster_id,
                "unit_count": t.unit_count,
                "deadline": t.deadline,
                "period": t.period,
                **({"unit_size": t.unit_size} if t.id in scenario.pinned_sizes else {}),
            }
            for t in scenario.tasks
        ],
        "payload_bytes": scenario.payload_bytes,
        "duration_us": scenario.duration_us,
        "trace": {
            "default_db": scenario.trace.default_db,
            "links": {str(k): [list(s) for s in v] for k, v in scenario.trace.links.items()},
            "stages_us": list(scenario.trace.stages_us),
        },
        "pdr_model": {
            "slope_per_db": scenario.pdr_model.slope_per_db,
            "midpoint_offset_db": scenario.pdr_model.midpoint_offset_db,
            "midpoints": {str(k): v for k, v in scenario.pdr_model.midpoints.items()},
        },
        "adaptation": {
            "enabled": ad.enabled,
            "reschedule": ad.reschedule,
            "window": ad.window,
            "evaluation_period": ad.evaluation_period,
            "solver": ad.solver,
            "initial_rates": {str(k): v for k, v in ad.initial_rates.items()},
            "measurement_noise_db": ad.measurement_noise_db,
        },
        "queues": {"policy": scenario.queue_policy, **({"count": scenario.queue_count} if scenario.queue_count else {})},
        "clocks": {
            "devices": [d.__dict__.copy() for d in scenario.clocks.devices],
            "relay_phase": scenario.clocks.relay_phase,
            "beacon_loss": scenario.clocks.beacon_loss,
        },
        "fail_on_infeasible": scenario.fail_on_infeasible,
        "seed": scenario.seed,
        "rate_table": scenario.rate_table.to_dict() | {"payload_bytes": scenario.payload_bytes},
    }
    return doc
