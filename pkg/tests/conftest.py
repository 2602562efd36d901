import math
from functools import reduce

import pytest

# criterion lines collected by test_acceptance, echoed once at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def brute_force_feasible(params):
    """Independent feasibility oracle over (B, U, D, T) tuples.

    Enumerates every start time of every unit over the hyper-period with
    synchronous releases, unit l released no earlier than the finish of unit
    l-1 and finishing by release + D - (U - l) * B. Only for tiny sets.
    """
    H = reduce(math.lcm, [p[3] for p in params], 1)
    jobs = []
    for B, U, D, T in params:
        for k in range(H // T):
            r = k * T
            jobs.append([(B, r + D - (U - l) * B) for l in range(1, U + 1)] + [r])
    busy = [False] * H

    def place(j, l, earliest):
        if j == len(jobs):
            return True
        units, release = jobs[j][:-1], jobs[j][-1]
        if l == len(units):
            return place(j + 1, 0, jobs[j + 1][-1] if j + 1 < len(jobs) else 0)
        B, d = units[l]
        for s in range(max(earliest, release), d - B + 1):
            if not any(busy[s:s + B]):
                for c in range(s, s + B):
                    busy[c] = True
                if place(j, l + 1, s + B):
                    return True
                for c in range(s, s + B):
                    busy[c] = False
        return False

    return place(0, 0, jobs[0][-1] if jobs else 0)


@pytest.fixture
def oracle():
    return brute_force_feasible
