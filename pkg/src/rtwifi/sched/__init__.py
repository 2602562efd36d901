"""Channel assignment and per-channel task schedulers."""

from rtwifi.sched.allocation import allocation_shortfall
from rtwifi.sched.channels import (
    assign_channels_hcs,
    assign_channels_rcs,
    cluster_utilization,
    task_utilization,
    tasks_on_channel,
    total_utilization,
)
from rtwifi.sched.exact import schedule_exact
from rtwifi.sched.intervals import Interval, IntervalSet, build_interval_set
from rtwifi.sched.sweep import (
    GeneratorConfig,
    SchedulabilityReport,
    SweepConfig,
    generate_task_set,
    schedulability_sweep,
)
from rtwifi.sched.tasksched import (
    BudgetExhausted,
    Infeasible,
    ReadyQueue,
    SchedulingError,
    check_timeline,
    schedule_edf,
    schedule_hts,
)

__all__ = [name for name in dir() if not name.startswith("_")]
