"""Interval set over pending transmission units.

Each pending unit contributes the interval ``[release, deadline]`` of its
current (possibly deferred) release. The demand of an interval ``[s, e]`` is
the total size of pending units whose release and deadline both lie in it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    demand: int


class IntervalSet:
    def __init__(self, units: Iterable[Tuple[Hashable, int, int, int]] = ()):
        """``units`` yields ``(key, release, deadline, size)`` per pending unit."""
        rows = list(units)
        self._index: Dict[Hashable, int] = {}
        for i, (key, *_rest) in enumerate(rows):
            if key in self._index:
                raise ValueError(f"duplicate unit key {key!r}")
            self._index[key] = i
        self._release = np.array([r[1] for r in rows], dtype=np.int64)
        self._deadline = np.array([r[2] for r in rows], dtype=np.int64)
        self._size = np.array([r[3] for r in rows], dtype=np.int64)
        self._pending = np.ones(len(rows), dtype=bool)

    def __len__(self):
        return int(self._pending.sum())

    def __contains__(self, key):
        i = self._index.get(key)
        return i is not None and bool(self._pending[i])

    def release_of(self, key) -> int:
        return int(self._release[self._index[key]])

    def set_release(self, key, release: int) -> None:
        """Replace the unit's interval after a deferral or a runtime release."""
        self._release[self._index[key]] = release

    def remove(self, key) -> None:
        self._pending[self._index[key]] = False

    def demand(self, start: int, end: int) -> int:
        m = self._pending & (self._release >= start) & (self._deadline <= end)
        return int(self._size[m].sum())

    def intervals(self) -> List[Interval]:
        m = self._pending
        pairs = sorted(set(zip(self._release[m].tolist(), self._deadline[m].tolist())))
        return [Interval(s, e, self.demand(s, e)) for s, e in pairs if s < e]

    def latest_blocking_start(self, t: int, size: int, deadline: int) -> Optional[int]:
        """Latest ``s`` over intervals ``[s, e]`` inside ``[t, deadline]`` with
        ``t + size + demand > e``; None when no interval blocks.

        Intervals starting at ``t`` are skipped: deferring to ``t`` is a no-op.
        """
        m = self._pending & (self._release > t) & (self._deadline <= deadline) & (self._release < self._deadline)
        if not m.any():
            return None
        # duplicate intervals are harmless here: only the max start matters
        s, e = self._release[m], self._deadline[m]
        pm = self._pending
        rel, dl, sz = self._release[pm], self._deadline[pm], self._size[pm]
        inside = (rel[None, :] >= s[:, None]) & (dl[None, :] <= e[:, None])
        demand = inside.astype(np.int64) @ sz
        hit = t + size + demand > e
        if not hit.any():
            return None
        return int(s[hit].max())


def build_interval_set(pending_units) -> IntervalSet:
    """Interval set from objects exposing ``key``, ``release``, ``deadline``
    and ``size`` (e.g. :class:`rtwifi.core.TransmissionUnit`)."""
    return IntervalSet((u.key, u.release, u.deadline, u.size) for u in pending_units)
