"""Discrete-event simulation of a multi-cluster TDMA WiFi network."""

from rtwifi.netsim.clock import ClockModel, DeviceClock, DeviceSpec, SyncSeries, simulate_sync
from rtwifi.netsim.engine import LinkMetrics, MetricsReport, RateChange, ScheduleUpdate, run_simulation, solve
from rtwifi.netsim.queues import ASSIGNED, DYNAMIC, DelayStats, QueueState, queue_delay_experiment, random_superframe
from rtwifi.netsim.rtt import RttStats, alternating_layout, round_trip_us, rtt_experiment
from rtwifi.netsim.scenario import (
    Adaptation,
    InfeasibleTask,
    PdrModel,
    Scenario,
    ScenarioError,
    Trace,
    load_scenario,
    normalized,
    parse_scenario,
)
