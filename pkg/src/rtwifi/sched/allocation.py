"""Can an existing slot allocation carry a task set with larger units?"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

from rtwifi.core import Ident, Task, Timeline


def allocation_shortfall(timeline: Timeline, tasks: Sequence[Task]) -> List[Tuple[Ident, int, int]]:
    """Units of ``tasks`` that do not fit into the cells ``timeline`` already
    gives their own task instance.

    Each new unit needs ``unit_size`` consecutive cells owned by its instance,
    placed in unit order and finishing by the unit's deadline. Returns
    ``(task id, instance, unit)`` for every unit left without room.
    """
    owned: Dict[Tuple[Ident, int], List[int]] = {}
    for p in timeline.placements:
        owned.setdefault((p.unit.task_id, p.unit.instance), []).extend(range(p.start, p.finish))
    missing = []
    for task in tasks:
        for k in range(1, timeline.horizon // task.period + 1):
            release = (k - 1) * task.period
            cells = sorted(owned.get((task.id, k), []))
            # merge owned cells into runs of consecutive cells
            runs = []
            for c in cells:
                if runs and runs[-1][1] == c:
                    runs[-1][1] = c + 1
                else:
                    runs.append([c, c + 1])
            B, U = task.unit_size, task.unit_count
            t = release
            for l in range(1, U + 1):
                deadline = release + task.deadline - (U - l) * B
                start = None
                for run in runs:
                    s = max(run[0], t)
                    if s + B <= run[1]:
                        start = s
                        break
                if start is None or start + B > deadline:
                    missing.extend((task.id, k, j) for j in range(l, U + 1))
                    break
                t = start + B
    return missing
