"""Driver-side packet queues: per-link assigned FIFOs versus a pool of
single-packet buffer slots."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Tuple

import numpy as np

ASSIGNED = "assigned"
DYNAMIC = "dynamic"
POLICIES = (ASSIGNED, DYNAMIC)

Packet = Tuple[int, int]  # (link index, enqueue time)


class QueueState:
    """``count`` is the number of FIFOs (assigned) or buffer slots (dynamic).

    Assigned: link ``i`` shares FIFO ``i % count`` and can only send when its
    packet is at the head. Dynamic: a packet takes the first free buffer slot;
    at a link's slot the buffer is scanned in order for that link's packet.
    Packets that find no free buffer slot wait in per-link driver queues; a
    freed buffer slot takes the oldest waiting packet of a link with nothing
    buffered, else the oldest waiting packet overall.
    """

    def __init__(self, policy: str, count: int, link_count: int):
        if policy not in POLICIES:
            raise ValueError(f"queue policy must be one of {POLICIES}")
        if count < 1 or link_count < 1:
            raise ValueError("queue count and link count must be >= 1")
        self.policy = policy
        self.count = count
        self.link_count = link_count
        self.fifos: List[Deque[Packet]] = [deque() for _ in range(count)] if policy == ASSIGNED else []
        self.buffer: List[Optional[Packet]] = [None] * count if policy == DYNAMIC else []
        self.backlog: List[Deque[Packet]] = [deque() for _ in range(link_count)]
        self.buffered = [0] * link_count

    def queue_of(self, link: int) -> int:
        return link % self.count

    def enqueue(self, link: int, t: int) -> None:
        if not 0 <= link < self.link_count:
            raise IndexError(f"link {link} out of range")
        if self.policy == ASSIGNED:
            self.fifos[self.queue_of(link)].append((link, t))
        elif self.backlog[link] or not self._place((link, t)):
            self.backlog[link].append((link, t))

    def _place(self, pkt: Packet) -> bool:
        for i, slot in enumerate(self.buffer):
            if slot is None:
                self.buffer[i] = pkt
                self.buffered[pkt[0]] += 1
                return True
        return False

    def _refill(self) -> None:
        waiting = [q[0] for q in self.backlog if q]
        if not waiting:
            return
        starved = [p for p in waiting if not self.buffered[p[0]]]
        link = min(starved or waiting, key=lambda p: (p[1], p[0]))[0]
        self._place(self.backlog[link].popleft())

    def pop_for(self, link: int) -> Optional[int]:
        """Remove the packet ``link`` may send now; return its enqueue time."""
        if self.policy == ASSIGNED:
            q = self.fifos[self.queue_of(link)]
            if q and q[0][0] == link:
                return q.popleft()[1]
            return None
        for i, slot in enumerate(self.buffer):
            if slot is not None and slot[0] == link:
                self.buffer[i] = None
                self.buffered[link] -= 1
                self._refill()
                return slot[1]
        return None

    def pending(self) -> int:
        if self.policy == ASSIGNED:
            return sum(len(q) for q in self.fifos)
        return sum(s is not None for s in self.buffer) + sum(len(q) for q in self.backlog)


def random_superframe(link_count: int, slots_per_link: int, rng: np.random.Generator) -> np.ndarray:
    """Owner link of each slot: every link gets ``slots_per_link`` slots, in
    a random order."""
    owners = np.repeat(np.arange(link_count), slots_per_link)
    return rng.permutation(owners)


@dataclass(frozen=True)
class DelayStats:
    max_slots: int
    mean_slots: float
    delivered: int
    pending: int


def queue_delay_experiment(
    link_count: int = 16,
    count: int = 16,
    policy: str = ASSIGNED,
    schedule_seed: int = 0,
    duration_superframes: int = 500,
    slots_per_link: int = 8,
    load: float = 2 / 3,
) -> DelayStats:
    """Packet delay (transmit slot minus generation slot) under one fixed
    random superframe.

    Each link generates packets periodically at ``load`` times its
    guaranteed slot share; phases are drawn from the same seed as the
    schedule.
    """
    if duration_superframes < 1:
        raise ValueError("duration must cover at least one superframe")
    rng = np.random.default_rng(schedule_seed)
    owners = random_superframe(link_count, slots_per_link, rng)
    frame = len(owners)
    if not 0 < load <= 1:
        raise ValueError("load must lie in (0, 1]")
    period = max(1, round(frame / (slots_per_link * load)))
    phase = rng.integers(0, period, size=link_count)
    queues = QueueState(policy, count, link_count)
    delays: List[int] = []
    for t in range(duration_superframes * frame):
        # generation before transmission within a slot
        for link in np.flatnonzero((t - phase) % period == 0):
            if t >= phase[link]:
                queues.enqueue(int(link), t)
        link = int(owners[t % frame])
        sent = queues.pop_for(link)
        if sent is not None:
            delays.append(t - sent)
    arr = np.array(delays) if delays else np.zeros(1, dtype=int)
    return DelayStats(int(arr.max()), float(arr.mean()), len(delays), queues.pending())
