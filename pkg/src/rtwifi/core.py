"""Domain types for periodic TDMA traffic, instance expansion, schedule
verification and the schedule register image.

All times in this module are integer atomic-slot (AS) ticks. A unit placed at
``start`` with size ``B`` occupies cells ``start .. start + B - 1`` and its
time interval is ``[start, start + B]``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

Ident = Union[int, str]

IDLE_CODE = 15
BEACON_CODE = 0
SHARED_CODE = 1
REGISTER_WORDS = 16
SLOTS_PER_WORD = 8
MAX_REGISTER_SLOTS = REGISTER_WORDS * SLOTS_PER_WORD


class TaskError(ValueError):
    """A task whose parameters make it trivially infeasible."""


def id_key(ident: Ident) -> Tuple[int, int, str]:
    """Total order over mixed int/str identifiers (ints first)."""
    if isinstance(ident, bool):
        raise TypeError("boolean identifiers are not allowed")
    if isinstance(ident, int):
        return (0, ident, "")
    return (1, 0, str(ident))


@dataclass(frozen=True)
class Task:
    """Periodic link traffic: ``unit_count`` units of ``unit_size`` AS each,
    due ``deadline`` AS after every release, released every ``period`` AS."""

    id: Ident
    cluster_id: Ident
    unit_size: int
    unit_count: int
    deadline: int
    period: int

    def __post_init__(self):
        for name in ("unit_size", "unit_count", "deadline", "period"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise TaskError(f"task {self.id}: {name} must be a positive integer, got {value!r}")
        if self.unit_size * self.unit_count > self.deadline:
            raise TaskError(
                f"task {self.id}: B*U = {self.unit_size * self.unit_count} exceeds deadline {self.deadline}"
            )
        if self.deadline > self.period:
            raise TaskError(f"task {self.id}: deadline {self.deadline} exceeds period {self.period}")

    @property
    def key(self) -> Tuple:
        return (id_key(self.cluster_id), id_key(self.id))

    def with_unit_size(self, unit_size: int) -> "Task":
        return Task(self.id, self.cluster_id, unit_size, self.unit_count, self.deadline, self.period)


def check_task(task: Task) -> None:
    """Re-run the load-time invariants (useful for tasks built via ``object.__new__``)."""
    Task.__post_init__(task)


@dataclass(frozen=True)
class TransmissionUnit:
    """The ``unit``-th unit (1-based) of instance ``instance`` (1-based).

    ``release`` is the static earliest release: instance release plus
    ``(unit - 1) * size``. At run time the release of unit ``l >= 2`` is the
    finish time of unit ``l - 1``.
    """

    task_id: Ident
    cluster_id: Ident
    instance: int
    unit: int
    size: int
    release: int
    deadline: int

    @property
    def key(self) -> Tuple[Ident, int, int]:
        return (self.task_id, self.instance, self.unit)


@dataclass(frozen=True)
class Placement:
    unit: TransmissionUnit
    start: int

    @property
    def finish(self) -> int:
        return self.start + self.unit.size


@dataclass(frozen=True)
class Cluster:
    id: Ident
    tasks: Tuple[Task, ...] = ()
    assigned_channel: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        for task in self.tasks:
            if task.cluster_id != self.id:
                raise TaskError(f"task {task.id} belongs to cluster {task.cluster_id}, not {self.id}")


@dataclass(frozen=True)
class ChannelAssignment:
    channels: Dict[Ident, int]
    channel_count: int

    def __post_init__(self):
        if self.channel_count < 1:
            raise ValueError("channel_count must be >= 1")
        for cluster, channel in self.channels.items():
            if not 1 <= channel <= self.channel_count:
                raise ValueError(f"cluster {cluster} mapped to channel {channel} outside [1, {self.channel_count}]")

    def channel_of(self, cluster_id: Ident) -> int:
        return self.channels[cluster_id]

    def clusters_on(self, channel: int) -> List[Ident]:
        return sorted((c for c, h in self.channels.items() if h == channel), key=id_key)


@dataclass
class Timeline:
    """Placements of transmission units on one channel over ``horizon`` AS.

    ``place`` refuses overlapping placements; the ``placements`` list itself
    is unchecked so hand-built timelines can be fed to ``verify_schedule``.
    """

    channel: int
    horizon: int
    placements: List[Placement] = field(default_factory=list)

    def place(self, unit: TransmissionUnit, start: int) -> Placement:
        if start < 0 or start + unit.size > self.horizon:
            raise ValueError(f"unit {unit.key} at {start} does not fit horizon {self.horizon}")
        for other in self.placements:
            if start < other.finish and other.start < start + unit.size:
                raise ValueError(f"unit {unit.key} at {start} overlaps {other.unit.key} at {other.start}")
        placement = Placement(unit, start)
        self.placements.append(placement)
        return placement

    def cells(self) -> List[Optional[TransmissionUnit]]:
        grid: List[Optional[TransmissionUnit]] = [None] * self.horizon
        for p in self.placements:
            for cell in range(p.start, p.finish):
                if grid[cell] is not None:
                    raise ValueError(f"cell {cell} referenced by two units")
                grid[cell] = p.unit
        return grid

    def sorted_placements(self) -> List[Placement]:
        return sorted(self.placements, key=lambda p: (p.start, id_key(p.unit.task_id), p.unit.instance, p.unit.unit))

    def busy_cells(self) -> int:
        return sum(p.unit.size for p in self.placements)

    def __eq__(self, other):
        if not isinstance(other, Timeline):
            return NotImplemented
        return (
            self.channel == other.channel
            and self.horizon == other.horizon
            and self.sorted_placements() == other.sorted_placements()
        )


@dataclass(frozen=True)
class SuperframeConfig:
    slot_count: int = 127
    atomic_slot_us: float = 174.0
    beacon_slots: frozenset = frozenset()
    shared_slots: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "beacon_slots", frozenset(self.beacon_slots))
        object.__setattr__(self, "shared_slots", frozenset(self.shared_slots))
        if self.slot_count <= 0:
            raise ValueError("slot_count must be positive")
        if self.atomic_slot_us <= 0:
            raise ValueError("atomic_slot_us must be positive")
        if self.beacon_slots & self.shared_slots:
            raise ValueError("beacon and shared slots overlap")
        for s in self.beacon_slots | self.shared_slots:
            if not 0 <= s < self.slot_count:
                raise ValueError(f"reserved slot {s} outside superframe of {self.slot_count}")

    @property
    def reserved(self) -> frozenset:
        return self.beacon_slots | self.shared_slots

    @property
    def duration_us(self) -> float:
        return self.slot_count * self.atomic_slot_us


def hyperperiod(tasks: Iterable[Task]) -> int:
    periods = [t.period for t in tasks]
    if not periods:
        return 1
    return reduce(math.lcm, periods)


def expand_instances(tasks: Sequence[Task], horizon: int) -> List[TransmissionUnit]:
    """Expand every task into its transmission units over ``horizon``.

    Instances are released synchronously at ``(k - 1) * T``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    units: List[TransmissionUnit] = []
    for task in tasks:
        check_task(task)
        if horizon % task.period:
            raise ValueError(f"horizon {horizon} is not a multiple of task {task.id} period {task.period}")
        B, U = task.unit_size, task.unit_count
        for k in range(1, horizon // task.period + 1):
            release = (k - 1) * task.period
            last_deadline = release + task.deadline
            for l in range(1, U + 1):
                units.append(
                    TransmissionUnit(
                        task_id=task.id,
                        cluster_id=task.cluster_id,
                        instance=k,
                        unit=l,
                        size=B,
                        release=release + (l - 1) * B,
                        deadline=last_deadline - (U - l) * B,
                    )
                )
    return units


@dataclass(frozen=True)
class Violation:
    kind: str  # conflict | window | completeness | assignment | unknown | horizon
    message: str
    units: Tuple = ()


@dataclass(frozen=True)
class Verdict:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return [v.kind for v in self.violations]

    def __bool__(self):
        return self.ok


def _overlaps(a: Placement, b: Placement) -> bool:
    return a.start < b.finish and b.start < a.finish


def _conflicts(placements: List[Placement], where: str) -> List[Violation]:
    found = []
    ordered = sorted(placements, key=lambda p: (p.start, p.finish))
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if b.start >= a.finish:
                break
            found.append(
                Violation(
                    "conflict",
                    f"{where}: unit {a.unit.key} [{a.start},{a.finish}] overlaps {b.unit.key} [{b.start},{b.finish}]",
                    (a.unit.key, b.unit.key),
                )
            )
    return found


def verify_schedule(
    timelines: Sequence[Timeline], tasks: Sequence[Task], assignment: ChannelAssignment
) -> Verdict:
    violations: List[Violation] = []
    task_by_id = {t.id: t for t in tasks}
    by_channel: Dict[int, Timeline] = {}
    for tl in timelines:
        if tl.channel in by_channel:
            violations.append(Violation("assignment", f"two timelines for channel {tl.channel}"))
        by_channel.setdefault(tl.channel, tl)

    placed: Dict[Tuple, Placement] = {}
    for tl in timelines:
        violations.extend(_conflicts(tl.placements, f"channel {tl.channel}"))
        for p in tl.placements:
            key = p.unit.key
            task = task_by_id.get(p.unit.task_id)
            if task is None:
                violations.append(Violation("unknown", f"unit {key} belongs to no known task", (key,)))
                continue
            channel = assignment.channels.get(task.cluster_id)
            if channel != tl.channel:
                violations.append(
                    Violation("assignment", f"unit {key} on channel {tl.channel}, cluster {task.cluster_id} is on {channel}", (key,))
                )
            if p.start < 0 or p.finish > tl.horizon:
                violations.append(Violation("window", f"unit {key} [{p.start},{p.finish}] outside horizon {tl.horizon}", (key,)))
            if key in placed:
                violations.append(Violation("conflict", f"unit {key} placed twice", (key,)))
            else:
                placed[key] = p

    # same-cluster overlap across distinct timelines
    by_cluster: Dict[Ident, List[Tuple[int, Placement]]] = {}
    for tl in timelines:
        for p in tl.placements:
            by_cluster.setdefault(p.unit.cluster_id, []).append((tl.channel, p))
    for cluster, entries in by_cluster.items():
        channels = {c for c, _ in entries}
        if len(channels) < 2:
            continue
        for i, (ca, a) in enumerate(entries):
            for cb, b in entries[i + 1:]:
                if ca != cb and _overlaps(a, b):
                    violations.append(
                        Violation("conflict", f"cluster {cluster}: unit {a.unit.key} overlaps {b.unit.key} across channels", (a.unit.key, b.unit.key))
                    )

    for task in sorted(tasks, key=lambda t: t.key):
        channel = assignment.channels.get(task.cluster_id)
        if channel is None:
            violations.append(Violation("assignment", f"cluster {task.cluster_id} of task {task.id} has no channel"))
            continue
        tl = by_channel.get(channel)
        if tl is None:
            violations.append(Violation("completeness", f"no timeline for channel {channel} (task {task.id})"))
            continue
        if tl.horizon % task.period:
            violations.append(Violation("horizon", f"channel {channel} horizon {tl.horizon} not a multiple of task {task.id} period"))
            continue
        for unit in expand_instances([task], tl.horizon):
            p = placed.get(unit.key)
            if p is None:
                violations.append(Violation("completeness", f"unit {unit.key} is not scheduled", (unit.key,)))
                continue
            if p.unit.size != unit.size or p.unit.deadline != unit.deadline:
                violations.append(Violation("window", f"unit {unit.key} carries wrong size or deadline", (unit.key,)))
            if unit.unit == 1:
                release = (unit.instance - 1) * task.period
            else:
                prev = placed.get((unit.task_id, unit.instance, unit.unit - 1))
                release = prev.finish if prev is not None else unit.release
            finish = p.start + unit.size
            if p.start < release or finish > unit.deadline:
                violations.append(
                    Violation("window", f"unit {unit.key} [{p.start},{finish}] outside window [{release},{unit.deadline}]", (unit.key,))
                )
    return Verdict(tuple(violations))


# -- register image ----------------------------------------------------------


def encode_register_image(codes: Sequence[int]) -> List[int]:
    """Pack per-slot 4-bit queue codes into 16 32-bit words.

    Slot ``i`` lives in word ``i // 8``, nibble ``i % 8`` (least significant
    nibble first). Slots past ``len(codes)`` encode as idle (15).
    """
    if len(codes) > MAX_REGISTER_SLOTS:
        raise ValueError(f"at most {MAX_REGISTER_SLOTS} slots fit the register image, got {len(codes)}")
    words = [0xFFFFFFFF] * REGISTER_WORDS
    for i, code in enumerate(codes):
        if not isinstance(code, int) or not 0 <= code <= 15:
            raise ValueError(f"slot {i}: code {code!r} does not fit in 4 bits")
        w, nib = divmod(i, SLOTS_PER_WORD)
        shift = 4 * nib
        words[w] = (words[w] & ~(0xF << shift)) | (code << shift)
    return words


def decode_register_image(words: Sequence[int], slot_count: int = MAX_REGISTER_SLOTS) -> List[int]:
    if len(words) != REGISTER_WORDS:
        raise ValueError(f"expected {REGISTER_WORDS} words, got {len(words)}")
    if not 0 <= slot_count <= MAX_REGISTER_SLOTS:
        raise ValueError("slot_count out of range")
    codes = []
    for i in range(slot_count):
        w, nib = divmod(i, SLOTS_PER_WORD)
        codes.append((words[w] >> (4 * nib)) & 0xF)
    return codes


def export_register_image(superframe: Sequence[int], config: SuperframeConfig) -> List[int]:
    if config.slot_count > MAX_REGISTER_SLOTS:
        raise ValueError(f"superframe of {config.slot_count} slots exceeds {MAX_REGISTER_SLOTS}")
    if len(superframe) > config.slot_count:
        raise ValueError("more slot codes than superframe slots")
    return encode_register_image(superframe)


def register_image_to_bytes(words: Sequence[int]) -> bytes:
    return b"".join(int(w).to_bytes(4, "little") for w in words)


def register_image_from_bytes(blob: bytes) -> List[int]:
    if len(blob) != 4 * REGISTER_WORDS:
        raise ValueError(f"register image must be {4 * REGISTER_WORDS} bytes, got {len(blob)}")
    return [int.from_bytes(blob[i:i + 4], "little") for i in range(0, len(blob), 4)]


def register_image_to_hex(words: Sequence[int]) -> str:
    return "".join(f"0x{w:08X}\n" for w in words)


def register_image_from_hex(text: str) -> List[int]:
    words = [int(line.strip(), 16) for line in text.splitlines() if line.strip()]
    if len(words) != REGISTER_WORDS:
        raise ValueError(f"expected {REGISTER_WORDS} hex words, got {len(words)}")
    return words


def queue_codes(timeline: Timeline, config: SuperframeConfig, queue_of: Dict[Ident, int]) -> List[int]:
    """Per-slot queue codes for a timeline laid over a superframe.

    Reserved slots take the beacon/shared codes; a unit covering a reserved
    slot is an error.
    """
    if timeline.horizon > config.slot_count:
        raise ValueError(f"timeline horizon {timeline.horizon} exceeds superframe of {config.slot_count}")
    codes = [IDLE_CODE] * config.slot_count
    for s in config.beacon_slots:
        codes[s] = BEACON_CODE
    for s in config.shared_slots:
        codes[s] = SHARED_CODE
    for p in timeline.placements:
        code = queue_of[p.unit.task_id]
        if not 2 <= code <= 14:
            raise ValueError(f"task {p.unit.task_id}: link queue code {code} outside 2..14")
        for cell in range(p.start, p.finish):
            if cell in config.reserved:
                raise ValueError(f"unit {p.unit.key} covers reserved slot {cell}")
            codes[cell] = code
    return codes


def default_queue_map(tasks: Sequence[Task]) -> Dict[Ident, int]:
    ordered = sorted(tasks, key=lambda t: t.key)
    if len(ordered) > 13:
        raise ValueError(f"{len(ordered)} links exceed the 13 assignable queue codes")
    return {t.id: 2 + i for i, t in enumerate(ordered)}


# -- exports -----------------------------------------------------------------

GANTT_FIELDS = ["channel", "slot_start", "slot_len", "cluster", "task", "instance", "unit"]


def gantt_rows(timelines: Iterable[Timeline]) -> List[dict]:
    rows = []
    for tl in sorted(timelines, key=lambda t: t.channel):
        for p in tl.sorted_placements():
            rows.append(
                {
                    "channel": tl.channel,
                    "slot_start": p.start,
                    "slot_len": p.unit.size,
                    "cluster": p.unit.cluster_id,
                    "task": p.unit.task_id,
                    "instance": p.unit.instance,
                    "unit": p.unit.unit,
                }
            )
    return rows


def gantt_csv(timelines: Iterable[Timeline]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=GANTT_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(gantt_rows(timelines))
    return buf.getvalue()


def timeline_to_dict(tl: Timeline) -> dict:
    return {
        "channel": tl.channel,
        "horizon": tl.horizon,
        "placements": [
            {
                "task": p.unit.task_id,
                "cluster": p.unit.cluster_id,
                "instance": p.unit.instance,
                "unit": p.unit.unit,
                "size": p.unit.size,
                "release": p.unit.release,
                "deadline": p.unit.deadline,
                "start": p.start,
            }
            for p in tl.sorted_placements()
        ],
    }


def timeline_from_dict(data: dict) -> Timeline:
    tl = Timeline(channel=int(data["channel"]), horizon=int(data["horizon"]))
    for row in data["placements"]:
        unit = TransmissionUnit(
            task_id=row["task"],
            cluster_id=row["cluster"],
            instance=int(row["instance"]),
            unit=int(row["unit"]),
            size=int(row["size"]),
            release=int(row["release"]),
            deadline=int(row["deadline"]),
        )
        tl.placements.append(Placement(unit, int(row["start"])))
    return tl


def timelines_to_json(timelines: Iterable[Timeline]) -> str:
    return json.dumps({"timelines": [timeline_to_dict(t) for t in sorted(timelines, key=lambda t: t.channel)]}, indent=2, sort_keys=True)


def timelines_from_json(text: str) -> List[Timeline]:
    return [timeline_from_dict(d) for d in json.loads(text)["timelines"]]
