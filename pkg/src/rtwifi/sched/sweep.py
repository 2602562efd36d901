"""Random task-set generation and the schedulability sweep."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rtwifi.core import Task
from rtwifi.sched.channels import total_utilization
from rtwifi.sched.exact import DEFAULT_NODE_BUDGET, schedule_exact
from rtwifi.sched.tasksched import BudgetExhausted, Infeasible, check_timeline, schedule_edf, schedule_hts

DEFAULT_BUCKETS = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class GeneratorConfig:
    task_count: Tuple[int, int] = (8, 12)
    periods: Tuple[int, ...] = (10, 15, 20, 30, 60)
    unit_size: Tuple[int, int] = (1, 4)
    unit_count: Tuple[int, int] = (1, 3)
    tolerance: float = 0.025
    max_attempts: int = 10_000


@dataclass(frozen=True)
class SweepConfig:
    buckets: Tuple[float, ...] = DEFAULT_BUCKETS
    sets_per_bucket: int = 2000
    seed: int = 0
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    solvers: Tuple[str, ...] = ("edf", "hts", "exact")
    node_budget: int = DEFAULT_NODE_BUDGET
    verify: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        gen = data.pop("generator", {}) or {}
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        gen_unknown = set(gen) - set(GeneratorConfig.__dataclass_fields__)
        if gen_unknown:
            raise ValueError(f"unknown generator keys: {sorted(gen_unknown)}")
        gen = {k: tuple(v) if isinstance(v, list) else v for k, v in gen.items()}
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(generator=GeneratorConfig(**gen), **data)


def uunifast(rng: np.random.Generator, n: int, total: float) -> np.ndarray:
    """Split ``total`` into ``n`` non-negative shares, uniformly over the simplex."""
    shares = np.empty(n)
    remaining = total
    for i in range(1, n):
        nxt = remaining * rng.random() ** (1.0 / (n - i))
        shares[i - 1] = remaining - nxt
        remaining = nxt
    shares[n - 1] = remaining
    return shares


def generate_task_set(rng: np.random.Generator, target: float, config: GeneratorConfig = GeneratorConfig()) -> List[Task]:
    """Draw a task set whose utilization lies within ``tolerance`` of ``target``.

    Shares come from UUniFast. Each task draws U, then a period among those
    where ``share * T / U`` rounds into the unit-size range, then B by
    stochastic rounding of ``share * T / U``, and D uniformly in ``[B*U, T]``.
    Sets landing outside the tolerance are redrawn.
    """
    bmin, bmax = config.unit_size
    umin, umax = config.unit_count
    periods = np.array(config.periods)
    for _ in range(config.max_attempts):
        n = int(rng.integers(config.task_count[0], config.task_count[1] + 1))
        shares = uunifast(rng, n, target)
        tasks = []
        for j, share in enumerate(shares):
            U = int(rng.integers(umin, umax + 1))
            x = share * periods / U
            ok = (x >= bmin - 0.5) & (x <= bmax + 0.5) & (np.clip(np.rint(x), bmin, bmax) * U <= periods)
            if ok.any():
                T = int(rng.choice(periods[ok]))
            else:
                T = int(periods[np.argmin(np.abs(np.clip(x, bmin, bmax) - x))])
            x = share * T / U
            B = int(np.floor(x)) + int(rng.random() < x - np.floor(x))
            B = min(max(B, bmin), bmax)
            while B * U > T and U > 1:
                U -= 1
            B = min(B, T // U)
            D = int(rng.integers(B * U, T + 1))
            tasks.append(Task(id=j + 1, cluster_id=1, unit_size=B, unit_count=U, deadline=D, period=T))
        if abs(float(total_utilization(tasks)) - target) <= config.tolerance:
            return tasks
    raise RuntimeError(f"could not hit utilization {target} in {config.max_attempts} attempts")


def set_seed(seed: int, bucket_index: int, set_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, bucket_index, set_index])


@dataclass
class SetResult:
    bucket: float
    index: int
    utilization: float
    feasible: Dict[str, Optional[bool]]  # None = budget exhausted
    seconds: Dict[str, float]


def run_solver(name: str, tasks: Sequence[Task], node_budget: int = DEFAULT_NODE_BUDGET):
    if name == "edf":
        return schedule_edf(tasks)
    if name == "hts":
        return schedule_hts(tasks)
    if name == "exact":
        return schedule_exact(tasks, node_budget=node_budget)
    raise ValueError(f"unknown solver {name!r}")


def evaluate_set(config: SweepConfig, bucket_index: int, set_index: int) -> SetResult:
    bucket = config.buckets[bucket_index]
    rng = np.random.default_rng(set_seed(config.seed, bucket_index, set_index))
    tasks = generate_task_set(rng, bucket, config.generator)
    feasible: Dict[str, Optional[bool]] = {}
    seconds: Dict[str, float] = {}
    for name in config.solvers:
        t0 = time.perf_counter()
        try:
            tl = run_solver(name, tasks, config.node_budget)
            if config.verify:
                check_timeline(tl, tasks)
            feasible[name] = True
        except Infeasible:
            feasible[name] = False
        except BudgetExhausted:
            feasible[name] = None
        seconds[name] = time.perf_counter() - t0
    return SetResult(bucket, set_index, float(total_utilization(tasks)), feasible, seconds)


def _evaluate_chunk(args) -> List[SetResult]:
    config, bucket_index, indices = args
    return [evaluate_set(config, bucket_index, i) for i in indices]


@dataclass
class BucketRow:
    bucket: float
    generated: int = 0
    schedulable: Dict[str, int] = field(default_factory=dict)
    exhausted: Dict[str, int] = field(default_factory=dict)
    seconds: Dict[str, float] = field(default_factory=dict)

    def mean_seconds(self, solver: str) -> float:
        return self.seconds.get(solver, 0.0) / self.generated if self.generated else 0.0


@dataclass
class SchedulabilityReport:
    solvers: Tuple[str, ...]
    rows: List[BucketRow]

    def row(self, bucket: float) -> BucketRow:
        for r in self.rows:
            if abs(r.bucket - bucket) < 1e-9:
                return r
        raise KeyError(bucket)

    def to_csv(self) -> str:
        """Counts only, so identical seeds give identical bytes."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bucket", "generated"] + list(self.solvers) + [f"{s}_budget_exhausted" for s in self.solvers if s == "exact"])
        for r in self.rows:
            w.writerow(
                [f"{r.bucket:.2f}", r.generated]
                + [r.schedulable.get(s, 0) for s in self.solvers]
                + [r.exhausted.get(s, 0) for s in self.solvers if s == "exact"]
            )
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bucket"] + [f"mean_time_{s}" for s in self.solvers])
        for r in self.rows:
            w.writerow([f"{r.bucket:.2f}"] + [f"{r.mean_seconds(s):.6f}" for s in self.solvers])
        return buf.getvalue()


def aggregate(config: SweepConfig, results: Sequence[SetResult]) -> SchedulabilityReport:
    rows = {b: BucketRow(b) for b in config.buckets}
    # keyed by (bucket, index): order of arrival does not matter
    for res in sorted(results, key=lambda r: (r.bucket, r.index)):
        row = rows[res.bucket]
        row.generated += 1
        for s in config.solvers:
            ok = res.feasible[s]
            row.schedulable[s] = row.schedulable.get(s, 0) + (1 if ok else 0)
            row.exhausted[s] = row.exhausted.get(s, 0) + (1 if ok is None else 0)
            row.seconds[s] = row.seconds.get(s, 0.0) + res.seconds[s]
    return SchedulabilityReport(tuple(config.solvers), [rows[b] for b in config.buckets])


def schedulability_sweep(config: SweepConfig = SweepConfig(), jobs: int = 1, chunk: int = 50) -> SchedulabilityReport:
    work = []
    for bi in range(len(config.buckets)):
        for start in range(0, config.sets_per_bucket, chunk):
            work.append((config, bi, list(range(start, min(start + chunk, config.sets_per_bucket)))))
    results: List[SetResult] = []
    if jobs <= 1:
        for item in work:
            results.extend(_evaluate_chunk(item))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_evaluate_chunk, work):
                results.extend(part)
    return aggregate(config, results)


def config_to_dict(config: SweepConfig) -> dict:
    return asdict(config)
