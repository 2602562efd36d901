"""Command-line front end.

    rtwifi schedule --scenario case.json --solver hts --out build/
    rtwifi simulate --scenario case.json --seed 7
    rtwifi sweep --config sweep.json --jobs 4
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from rtwifi import __version__
from rtwifi.core import (
    ChannelAssignment,
    MAX_REGISTER_SLOTS,
    Placement,
    Timeline,
    default_queue_map,
    export_register_image,
    gantt_csv,
    queue_codes,
    register_image_to_bytes,
    register_image_to_hex,
    timelines_from_json,
    timelines_to_json,
    verify_schedule,
)
from rtwifi.netsim.engine import run_simulation
from rtwifi.netsim.scenario import SOLVERS, InfeasibleTask, Scenario, ScenarioError, load_scenario, normalized
from rtwifi.phyrate import DEFAULT_TABLE, RateTable
from rtwifi.sched.channels import assign_channels_hcs
from rtwifi.sched.exact import schedule_exact
from rtwifi.sched.sweep import SweepConfig, config_to_dict, schedulability_sweep
from rtwifi.sched.tasksched import BudgetExhausted, Infeasible, schedule_edf, schedule_hts
from rtwifi.snr import DEFAULT_BENCH_SNRS, bench_csv, bench_estimators

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_RESCHEDULE = 3

ENV_OUT = "RTWIFI_OUT"
ENV_LOG = "RTWIFI_LOG"
DEFAULT_OUT = "rtwifi-out"

SOLVER_FUNCS = {"hts": schedule_hts, "edf": schedule_edf, "exact": schedule_exact}

log = logging.getLogger("rtwifi")

EPILOG = f"""\
exit status:
  0  success
  1  input error (unreadable or invalid scenario, config or timeline)
  2  no feasible schedule (the violating unit is named on stderr)
  3  rescheduling became infeasible during simulate with --fail-on-infeasible

environment:
  {ENV_OUT}  output directory used when --out is not given (default: ./{DEFAULT_OUT})
  {ENV_LOG}  log level: DEBUG, INFO, WARNING (default) or ERROR
"""


class InputError(Exception):
    pass


class NoSchedule(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def _load_scenario(path: str) -> Scenario:
    text = _read_text(path)
    try:
        return load_scenario(text)
    except InfeasibleTask as exc:
        raise NoSchedule(f"{path}: {exc}") from exc
    except ScenarioError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_timelines(path: str) -> List[Timeline]:
    text = _read_text(path)
    try:
        return timelines_from_json(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a timeline document ({exc})") from exc


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"{out}: {exc.strerror or exc}") from exc
    return out


def _write(out: Path, name: str, data) -> Path:
    path = out / name
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)
    log.info("wrote %s", path)
    return path


def _unit_name(unit) -> str:
    return f"task {unit.task_id!r} instance {unit.instance} unit {unit.unit}"


def build_schedule(scenario: Scenario, solver: str):
    """Channel assignment and one timeline per used channel, or NoSchedule."""
    assignment = assign_channels_hcs(scenario.clusters, scenario.channel_count)
    timelines = []
    for ch in range(1, scenario.channel_count + 1):
        on = [t for c in scenario.clusters if assignment.channel_of(c.id) == ch for t in c.tasks]
        if not on:
            continue
        try:
            timelines.append(SOLVER_FUNCS[solver](on, channel=ch, horizon=scenario.region))
        except Infeasible as exc:
            where = _unit_name(exc.unit) if exc.unit is not None else "a unit"
            raise NoSchedule(f"channel {ch}: {solver} cannot place {where}: {exc}") from exc
        except BudgetExhausted as exc:
            raise NoSchedule(f"channel {ch}: exact search gave up before deciding ({exc})") from exc
    return assignment, timelines


def register_images(scenario: Scenario, timelines: Sequence[Timeline]) -> Dict[int, List[int]]:
    """Register words per channel, with the scheduled region after the reserved prefix."""
    sf = scenario.superframe
    if sf.slot_count > MAX_REGISTER_SLOTS:
        raise InputError(f"superframe of {sf.slot_count} slots does not fit the {MAX_REGISTER_SLOTS}-slot register image")
    try:
        queue_of = default_queue_map(scenario.tasks)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    prefix = len(sf.reserved)
    images = {}
    for tl in timelines:
        shifted = Timeline(tl.channel, sf.slot_count, [Placement(p.unit, p.start + prefix) for p in tl.placements])
        images[tl.channel] = export_register_image(queue_codes(shifted, sf, queue_of), sf)
    return images


def _assignment_from(timelines: Sequence[Timeline], scenario: Scenario) -> ChannelAssignment:
    channels = {}
    for tl in timelines:
        for p in tl.placements:
            channels.setdefault(p.unit.cluster_id, tl.channel)
    count = max([scenario.channel_count] + list(channels.values()))
    return ChannelAssignment(channels, count)


def _verdict_json(verdict) -> str:
    doc = {"ok": verdict.ok, "violations": [{"kind": v.kind, "message": v.message} for v in verdict.violations]}
    return json.dumps(doc, indent=2) + "\n"


# -- subcommands ---------------------------------------------------------------


def cmd_schedule(args) -> int:
    scenario = _load_scenario(args.scenario)
    solver = args.solver or scenario.adaptation.solver
    assignment, timelines = build_schedule(scenario, solver)
    verdict = verify_schedule(timelines, scenario.tasks, assignment)
    try:
        images = register_images(scenario, timelines)
    except InputError as exc:
        log.warning("no register image: %s", exc)
        images = {}

    out = _out_dir(args)
    _write(out, "gantt.csv", gantt_csv(timelines))
    _write(out, "timeline.json", timelines_to_json(timelines) + "\n")
    _write(out, "verdict.json", _verdict_json(verdict))
    _write(out, "scenario.json", json.dumps(normalized(scenario), indent=2) + "\n")
    for ch, words in images.items():
        _write(out, f"registers_ch{ch}.hex", register_image_to_hex(words))

    if args.format == "json":
        busy = {tl.channel: tl.busy_cells() for tl in timelines}
        print(json.dumps({"solver": solver, "ok": verdict.ok, "horizon": scenario.region, "busy_slots": busy, "out": str(out)}, indent=2))
    else:
        sys.stdout.write(gantt_csv(timelines))
    if not verdict.ok:
        for v in verdict.violations:
            print(f"violation: {v.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_verify(args) -> int:
    scenario = _load_scenario(args.scenario)
    timelines = _load_timelines(args.timeline)
    verdict = verify_schedule(timelines, scenario.tasks, _assignment_from(timelines, scenario))
    if args.format == "json":
        sys.stdout.write(_verdict_json(verdict))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["kind", "message"])
        w.writerows([v.kind, v.message] for v in verdict.violations)
    if not verdict.ok:
        print(f"{len(verdict.violations)} violation(s); first: {verdict.violations[0].message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = {}
    if args.config:
        text = _read_text(args.config)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise InputError(f"{args.config}: sweep config must be a JSON object")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.sets is not None:
        doc["sets_per_bucket"] = args.sets
    try:
        config = SweepConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise InputError(f"sweep config: {exc}") from exc
    if any(s not in SOLVERS for s in config.solvers):
        raise InputError(f"sweep config: solvers must be drawn from {SOLVERS}")
    if config.sets_per_bucket < 1:
        raise InputError("sweep config: sets_per_bucket must be positive")

    report = schedulability_sweep(config, jobs=max(1, args.jobs))
    out = _out_dir(args)
    _write(out, "schedulability.csv", report.to_csv())
    _write(out, "timing.csv", report.timing_csv())
    _write(out, "sweep_config.json", json.dumps(config_to_dict(config), indent=2) + "\n")
    if args.format == "json":
        rows = [
            {"bucket": r.bucket, "generated": r.generated, "schedulable": r.schedulable, "budget_exhausted": r.exhausted}
            for r in report.rows
        ]
        print(json.dumps(rows, indent=2))
    else:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    try:
        report = run_simulation(scenario)
    except Infeasible as exc:
        where = _unit_name(exc.unit) if exc.unit is not None else "a unit"
        raise NoSchedule(f"initial rates admit no schedule; cannot place {where}: {exc}") from exc
    if scenario.seed is None:
        print(f"seed {report.seed}", file=sys.stderr)

    replay = normalized(scenario)
    replay["seed"] = report.seed
    out = _out_dir(args)
    for name, text in report.csv_files().items():
        _write(out, name, text)
    _write(out, "summary.json", report.to_json())
    _write(out, "scenario.json", json.dumps(replay, indent=2) + "\n")
    if args.format == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.links_csv())

    if report.infeasible_events and (args.fail_on_infeasible or scenario.fail_on_infeasible):
        first = next(u for u in report.schedule_log if not u.ok)
        print(f"rescheduling infeasible at superframe {first.superframe}: {first.detail}", file=sys.stderr)
        return EXIT_RESCHEDULE
    return EXIT_OK


def cmd_snr_bench(args) -> int:
    if args.runs < 2:
        raise InputError("--runs must be at least 2")
    snrs = tuple(args.snr) if args.snr else DEFAULT_BENCH_SNRS
    rows = bench_estimators(snrs, runs=args.runs, seed=args.seed if args.seed is not None else 0)
    out = _out_dir(args)
    _write(out, "snr_bench.csv", bench_csv(rows))
    if args.format == "json":
        print(json.dumps([{"true_snr": r.true_snr, "method": r.method, "mean": r.mean, "std": r.std, "bias": r.bias, "n": r.n} for r in rows], indent=2))
    else:
        sys.stdout.write(bench_csv(rows))
    return EXIT_OK


def _rate_table_csv(table: RateTable) -> str:
    lines = ["rate_mbps,threshold_db,slot_length_us,atomic_slot_usage"]
    for e in reversed(table.entries):
        lines.append(f"{e.rate_mbps},{e.snr_threshold_db:g},{e.slot_length_us:g},{e.atomic_slot_usage}")
    return "\n".join(lines) + "\n"


def cmd_rate_table(args) -> int:
    table = _load_scenario(args.scenario).rate_table if args.scenario else DEFAULT_TABLE
    text = json.dumps(table.to_dict(), indent=2) + "\n" if args.format == "json" else _rate_table_csv(table)
    if args.out:
        _write(_out_dir(args), f"rate_table.{args.format}", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_export_regs(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.timeline:
        timelines = _load_timelines(args.timeline)
        verdict = verify_schedule(timelines, scenario.tasks, _assignment_from(timelines, scenario))
        if not verdict.ok:
            raise NoSchedule(f"{args.timeline}: {verdict.violations[0].message}")
    else:
        _, timelines = build_schedule(scenario, args.solver or scenario.adaptation.solver)
    images = register_images(scenario, timelines)
    out = _out_dir(args)
    for ch, words in images.items():
        _write(out, f"registers_ch{ch}.hex", register_image_to_hex(words))
        _write(out, f"registers_ch{ch}.bin", register_image_to_bytes(words))
        if args.format == "json":
            print(json.dumps({"channel": ch, "words": [f"0x{w:08X}" for w in words]}))
        else:
            print(f"# channel {ch}")
            sys.stdout.write(register_image_to_hex(words))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; argparse would exit 2, which means infeasible here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="rtwifi",
        description="Real-time TDMA WiFi: scheduling, sweeps, SNR benches, simulation and exports.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = _Parser(add_help=False)
    common.add_argument("--out", metavar="DIR", help=f"output directory (default: ${ENV_OUT} or ./{DEFAULT_OUT})")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="format of the report on stdout")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("schedule", cmd_schedule, "schedule a scenario; write Gantt CSV, timeline JSON, register images and a verdict")
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--solver", choices=SOLVERS, help="default: the scenario's adaptation.solver")

    p = add("verify", cmd_verify, "check a timeline JSON against a scenario's tasks")
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--timeline", required=True, metavar="PATH")

    p = add("sweep", cmd_sweep, "schedulability sweep over utilization buckets")
    p.add_argument("--config", metavar="PATH", help="JSON sweep config (default: built-in)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sets", type=int, metavar="N", help="override sets_per_bucket")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")

    p = add("simulate", cmd_simulate, "run the network simulation for a scenario")
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, help="overrides the scenario seed; if neither is set a seed is drawn and echoed")
    p.add_argument("--fail-on-infeasible", action="store_true", help="exit 3 when a reschedule finds no schedule")

    p = add("snr-bench", cmd_snr_bench, "Monte Carlo bench of the two SNR estimators")
    p.add_argument("--runs", type=int, default=1000, metavar="N")
    p.add_argument("--seed", type=int)
    p.add_argument("--snr", type=float, nargs="+", metavar="DB", help="true SNR points")

    p = add("rate-table", cmd_rate_table, "print the active rate table")
    p.add_argument("--scenario", metavar="PATH", help="use this scenario's rate table")

    p = add("export-regs", cmd_export_regs, "write per-channel register images")
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--timeline", metavar="PATH", help="timeline JSON to encode (default: schedule the scenario)")
    p.add_argument("--solver", choices=SOLVERS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get(ENV_LOG, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoSchedule as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
