"""Command-line front end: ``odin-sim <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baselines import oracle_search
from .interference import TimelineSpec, generate_timeline, load_timeline, save_timeline
from .reporting import DEFAULT_SLO_LEVELS, _jsonable, run_grid, summarize
from .simulator import ExperimentSpec, SchedulerChoice, export_trace, format_config, run_simulation
from .timing_db import DEFAULT_BASE_RANGE, ILLUSTRATIVE_SLOWDOWNS, SyntheticDbSpec, load_database, save_database, synthesize_database

logger = logging.getLogger("odin_pipeline")


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odin-sim",
        description="Simulate online rebalancing of inference pipelines under co-location interference.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth-db", help="write a synthetic per-layer timing database (CSV)")
    p.add_argument("--layers", type=int, required=True, help="number of schedulable layers")
    p.add_argument("--base", type=float, nargs=2, default=DEFAULT_BASE_RANGE, metavar=("LOW", "HIGH"),
                   help="uniform range of baseline layer times in ms (default: 0.2 5.0)")
    p.add_argument("--slowdowns", type=float, nargs="+", default=list(ILLUSTRATIVE_SLOWDOWNS),
                   help="one multiplier >= 1 per interference mode (default: illustrative B..L set)")
    p.add_argument("--mode-ids", type=_csv_list, default=None,
                   help="comma-separated mode ids, baseline first (default: A, B, C, ...)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    p.add_argument("--out", required=True, help="output CSV path")

    def add_experiment_flags(p, grid=False):
        p.add_argument("--db", required=True, help="timing database CSV")
        p.add_argument("--eps", type=int, required=True, help="number of execution places")
        p.add_argument("--window", type=int, default=4000, help="queries per run (default: 4000)")
        p.add_argument("--epsilon", type=float, default=0.0,
                       help="relative change threshold of the bottleneck detector (default: 0)")
        if not grid:
            p.add_argument("--scheduler", choices=["odin", "lls", "oracle", "static"], required=True,
                           help="rebalancing policy")
            p.add_argument("--alpha", type=int, default=2, help="ODIN exploration budget (default: 2)")
            p.add_argument("--lls-max-iters", type=int, default=None,
                           help="LLS move cap (default: number of layers)")
            p.add_argument("--freq", type=int, default=10, help="queries between interference events")
            p.add_argument("--dur", type=int, default=10, help="queries each interference event lasts")
            p.add_argument("--seed", type=int, default=0, help="timeline RNG seed")
            p.add_argument("--timeline", default=None,
                           help="read interference events from this CSV instead of generating them")

    p = sub.add_parser("run", help="run one experiment, write its trace and print a summary")
    add_experiment_flags(p)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--summary", default=None, help="also write the summary JSON here")

    p = sub.add_parser("grid", help="run a frequency x duration x scheduler x seed grid")
    add_experiment_flags(p, grid=True)
    p.add_argument("--freq", type=int, nargs="+", default=[2, 10, 100], help="frequency periods")
    p.add_argument("--dur", type=int, nargs="+", default=[2, 10, 100], help="event durations")
    p.add_argument("--schedulers", nargs="+", default=["odin-a2", "odin-a10", "lls"],
                   help="scheduler tokens: odin-a<ALPHA>, lls, oracle, static")
    p.add_argument("--seeds", type=int, nargs="+", default=[0], help="timeline seeds")
    p.add_argument("--slo-levels", type=float, nargs="+", default=list(DEFAULT_SLO_LEVELS),
                   help="ascending SLO levels as fractions of the reference throughput")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    p.add_argument("--out-dir", required=True, help="directory for trace CSVs and aggregate.json")

    p = sub.add_parser("oracle", help="exhaustive search for the best configuration under fixed modes")
    p.add_argument("--db", required=True, help="timing database CSV")
    p.add_argument("--eps", type=int, required=True, help="number of execution places")
    p.add_argument("--modes", type=_csv_list, default=None,
                   help="comma-separated mode id per execution place (default: all baseline)")
    p.add_argument("--budget", type=int, default=10**8, help="maximum compositions to enumerate")

    p = sub.add_parser("timeline", help="export a generated interference timeline (CSV)")
    p.add_argument("--db", required=True, help="timing database CSV (provides the mode ids)")
    p.add_argument("--eps", type=int, required=True, help="number of execution places")
    p.add_argument("--window", type=int, default=4000)
    p.add_argument("--freq", type=int, default=10)
    p.add_argument("--dur", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    return parser


def _cmd_synth_db(args) -> None:
    spec = SyntheticDbSpec(
        args.layers,
        tuple(args.base),
        tuple(args.slowdowns),
        args.seed,
        tuple(args.mode_ids) if args.mode_ids else None,
    )
    save_database(synthesize_database(spec), args.out)


def _cmd_run(args) -> None:
    db = load_database(args.db)
    kind = args.scheduler
    scheduler = (SchedulerChoice.odin(args.alpha) if kind == "odin"
                 else SchedulerChoice.lls(args.lls_max_iters) if kind == "lls"
                 else SchedulerChoice(kind))
    events = load_timeline(args.timeline, db.mode_ids) if args.timeline else None
    spec = ExperimentSpec(
        db, args.eps, scheduler, TimelineSpec(args.window, args.freq, args.dur, args.seed),
        args.epsilon, events, db_path=args.db,
    )
    trace = run_simulation(spec)
    export_trace(trace, args.out)
    summary = json.dumps(_jsonable(summarize(trace)), indent=2)
    if args.summary:
        Path(args.summary).write_text(summary + "\n", encoding="utf-8")
    print(summary)


def _cmd_grid(args) -> None:
    db = load_database(args.db)
    base = ExperimentSpec(db, args.eps, SchedulerChoice("static"), TimelineSpec(args.window),
                          args.epsilon, db_path=args.db)
    schedulers = [SchedulerChoice.parse(s) for s in args.schedulers]
    run_grid(base, args.freq, args.dur, schedulers, args.seeds, args.out_dir, args.slo_levels, args.jobs)
    print(Path(args.out_dir) / "aggregate.json")


def _cmd_oracle(args) -> None:
    db = load_database(args.db)
    modes = args.modes or [db.mode_ids[0]] * args.eps
    if len(modes) != args.eps:
        raise ValueError(f"--modes lists {len(modes)} execution places, --eps is {args.eps}")
    state = tuple(db.mode_index(mid) for mid in modes)
    result = oracle_search(state, db, args.eps, args.budget)
    print(f"config {format_config(result.config)}")
    print(f"throughput {result.throughput!r}")
    print(f"evaluated {result.evaluated}")


def _cmd_timeline(args) -> None:
    db = load_database(args.db)
    events = generate_timeline(TimelineSpec(args.window, args.freq, args.dur, args.seed), args.eps, db.mode_count)
    save_timeline(events, args.out, db.mode_ids)


COMMANDS = {
    "synth-db": _cmd_synth_db,
    "run": _cmd_run,
    "grid": _cmd_grid,
    "oracle": _cmd_oracle,
    "timeline": _cmd_timeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"odin-sim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
