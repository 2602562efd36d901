"""Utilization bookkeeping and cluster-to-channel assignment."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from rtwifi.core import ChannelAssignment, Cluster, Task, id_key


def task_utilization(task: Task) -> Fraction:
    return Fraction(task.unit_size * task.unit_count, task.period)


def total_utilization(tasks: Sequence[Task]) -> Fraction:
    return sum((task_utilization(t) for t in tasks), Fraction(0))


def cluster_utilization(cluster: Cluster) -> Fraction:
    return total_utilization(cluster.tasks)


def assign_channels_hcs(clusters: Sequence[Cluster], H: int) -> ChannelAssignment:
    """Greedy balancing: heaviest cluster first, each onto the currently
    least-utilized channel (lowest channel id on ties)."""
    if H < 1:
        raise ValueError("need at least one channel")
    order = sorted(clusters, key=lambda c: (-cluster_utilization(c), id_key(c.id)))
    load = [Fraction(0)] * H
    mapping = {}
    for cluster in order:
        h = min(range(H), key=lambda i: (load[i], i))
        load[h] += cluster_utilization(cluster)
        mapping[cluster.id] = h + 1
    return ChannelAssignment(mapping, H)


def assign_channels_rcs(clusters: Sequence[Cluster], H: int, seed) -> ChannelAssignment:
    if H < 1:
        raise ValueError("need at least one channel")
    rng = np.random.default_rng(seed)
    order = sorted(clusters, key=lambda c: id_key(c.id))
    draws = rng.integers(1, H + 1, size=len(order))
    return ChannelAssignment({c.id: int(h) for c, h in zip(order, draws)}, H)


def tasks_on_channel(clusters: Sequence[Cluster], assignment: ChannelAssignment, channel: int) -> list:
    return [t for c in clusters if assignment.channels[c.id] == channel for t in c.tasks]
