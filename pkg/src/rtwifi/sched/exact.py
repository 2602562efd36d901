"""Exact single-channel scheduler (depth-first search with pruning).

The search builds the schedule left to right. Every feasible schedule can be
left-shifted so each unit starts at ``max(t, release)`` where ``t`` is the
finish of the previous unit, so branching on *which* pending unit runs next
covers the whole space. A search state is fully described by ``t`` and the
per-instance progress (a started instance's next unit is released by ``t``),
which makes failed states memoizable.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

from rtwifi.core import Placement, Task, Timeline, expand_instances, hyperperiod
from rtwifi.sched.tasksched import BudgetExhausted, Infeasible, _debug_verify, check_timeline, reject_overlong

DEFAULT_NODE_BUDGET = 200_000


def schedule_exact(
    tasks: Sequence[Task],
    channel: int = 1,
    node_budget: int = DEFAULT_NODE_BUDGET,
    horizon: Optional[int] = None,
    stats: Optional[dict] = None,
) -> Timeline:
    """Return a feasible timeline, or raise :class:`Infeasible` (space
    exhausted) or :class:`BudgetExhausted` (``node_budget`` nodes expanded)."""
    H = hyperperiod(tasks) if horizon is None else horizon
    timeline = Timeline(channel=channel, horizon=H)
    if not tasks:
        return timeline
    reject_overlong(tasks)

    grouped = {}
    for u in expand_instances(tasks, H):
        grouped.setdefault((u.task_id, u.instance), []).append(u)
    by_id = {t.id: t for t in tasks}
    keyed = sorted(grouped.items(), key=lambda kv: (kv[1][0].release, by_id[kv[0][0]].key, kv[0][1]))
    inst_units = [sorted(us, key=lambda u: u.unit) for _, us in keyed]
    n = len(inst_units)
    rel = [us[0].release for us in inst_units]
    size = [us[0].size for us in inst_units]
    count = [len(us) for us in inst_units]
    # deadline of unit l of instance i
    dl = [[u.deadline for u in us] for us in inst_units]
    tie = [by_id[k[0]].key + (k[1],) for k, _ in keyed]

    total = sum(size[i] * count[i] for i in range(n))
    if total > H:
        raise Infeasible(f"total demand {total} exceeds horizon {H}")

    failed = set()
    nodes = 0
    chosen: List[tuple] = []  # (instance, unit index, start)

    def feasible_bound(t, prog) -> bool:
        # every pending chain must fit, and cumulative work due by each
        # deadline must fit between t and that deadline
        due = []
        for i in range(n):
            l = prog[i]
            if l == count[i]:
                continue
            est = max(t, rel[i]) if l == 0 else t
            if est + size[i] > dl[i][l]:
                return False
            for j in range(l, count[i]):
                due.append((dl[i][j], size[i]))
        due.sort()
        work = 0
        for d, b in due:
            work += b
            if t + work > d:
                return False
        return True

    def dfs(t, prog) -> bool:
        nonlocal nodes
        state = (t, prog)
        if state in failed:
            return False
        nodes += 1
        if nodes > node_budget:
            raise BudgetExhausted(f"node budget {node_budget} exhausted")
        cands = []
        for i in range(n):
            l = prog[i]
            if l < count[i]:
                est = max(t, rel[i]) if l == 0 else t
                cands.append((dl[i][l], tie[i], i, l, est))
        if not cands:
            return True
        if not feasible_bound(t, prog):
            failed.add(state)
            return False
        # a unit that cannot start before some other unit could finish is
        # dominated: that other unit fits entirely in front of it
        horizon_c = min(c[4] + size[c[2]] for c in cands)
        cands = [c for c in cands if c[4] < horizon_c]
        cands.sort()
        for d, _, i, l, est in cands:
            finish = est + size[i]
            if finish > d:
                continue
            chosen.append((i, l, est))
            nxt = prog[:i] + (l + 1,) + prog[i + 1:]
            if dfs(finish, nxt):
                return True
            chosen.pop()
        failed.add(state)
        return False

    import sys

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * sum(count) + 100))
    try:
        ok = dfs(0, tuple([0] * n))
    finally:
        sys.setrecursionlimit(limit)
        if stats is not None:
            stats["nodes"] = nodes
    if not ok:
        raise Infeasible("no feasible schedule exists")
    for i, l, start in chosen:
        timeline.placements.append(Placement(inst_units[i][l], start))
    if _debug_verify():
        check_timeline(timeline, tasks)
    return timeline
