"""Query-by-query simulation of a pipeline under an interference timeline.

Each query either runs through the pipeline (``pipelined``) or, while a
scheduler is exploring, is processed serially on one trial configuration
(``serial``). One scheduler trial costs exactly one query.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .baselines import DEFAULT_ENUMERATION_BUDGET, lls_rebalance, oracle_search
from .interference import (
    Change,
    DetectorState,
    InterferenceEvent,
    TimelineSpec,
    detect_change,
    generate_timeline,
    resolve_states,
)
from .odin import OdinParams, odin_rebalance
from .pipeline import (
    Config,
    _stage_times,
    balanced_initial_config,
    baseline_state,
    bottleneck_index,
)
from .timing_db import TimingDatabase

logger = logging.getLogger(__name__)


class SchedulerKind(str, enum.Enum):
    ODIN = "odin"
    LLS = "lls"
    ORACLE = "oracle"
    STATIC = "static"


@dataclass(frozen=True)
class SchedulerChoice:
    kind: SchedulerKind
    odin_params: OdinParams | None = None
    lls_max_iters: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SchedulerKind(self.kind))
        if self.kind is SchedulerKind.ODIN and self.odin_params is None:
            raise ValueError("ODIN scheduler needs odin_params")
        if self.lls_max_iters is not None and self.lls_max_iters < 1:
            raise ValueError("lls_max_iters must be positive")

    @classmethod
    def odin(cls, alpha: int, max_trials: int | None = None) -> SchedulerChoice:
        return cls(SchedulerKind.ODIN, odin_params=OdinParams(alpha, max_trials))

    @classmethod
    def lls(cls, max_iters: int | None = None) -> SchedulerChoice:
        return cls(SchedulerKind.LLS, lls_max_iters=max_iters)

    @classmethod
    def parse(cls, token: str) -> SchedulerChoice:
        """Inverse of :attr:`name`: ``odin-a10``, ``lls``, ``oracle``, ``static``."""
        token = token.strip().lower()
        if token.startswith("odin"):
            alpha = token[len("odin"):].lstrip("-:").lstrip("a")
            if not alpha.isdigit():
                raise ValueError(f"ODIN scheduler token needs an alpha, e.g. odin-a2; got {token!r}")
            return cls.odin(int(alpha))
        try:
            return cls(SchedulerKind(token))
        except ValueError:
            raise ValueError(f"unknown scheduler {token!r}") from None

    @property
    def name(self) -> str:
        if self.kind is SchedulerKind.ODIN:
            return f"odin-a{self.odin_params.alpha}"
        return self.kind.value

    @property
    def alpha(self) -> int | None:
        return self.odin_params.alpha if self.odin_params else None


@dataclass(frozen=True)
class ExperimentSpec:
    db: TimingDatabase
    ep_count: int
    scheduler: SchedulerChoice
    timeline: TimelineSpec = TimelineSpec()
    epsilon: float = 0.0
    # explicit events override the generated timeline
    events: tuple[InterferenceEvent, ...] | None = None
    db_path: str | None = None
    oracle_budget: int = DEFAULT_ENUMERATION_BUDGET

    def __post_init__(self):
        if self.ep_count < 1:
            raise ValueError("ep_count must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.events is not None:
            object.__setattr__(self, "events", tuple(self.events))
            for e in self.events:
                if not 0 <= e.ep < self.ep_count or not 0 < e.mode < self.db.mode_count:
                    raise ValueError(f"event {e} does not fit {self.ep_count} EPs / {self.db.mode_count} modes")

    @property
    def window(self) -> int:
        return self.timeline.window

    def interference_events(self) -> list[InterferenceEvent]:
        if self.events is not None:
            return list(self.events)
        if self.db.mode_count < 2:
            return []
        return generate_timeline(self.timeline, self.ep_count, self.db.mode_count)


class QueryKind(str, enum.Enum):
    PIPELINED = "pipelined"
    SERIAL = "serial"


@dataclass(frozen=True)
class QueryRecord:
    query: int
    kind: QueryKind
    latency: float
    throughput: float
    config: Config
    bottleneck: float
    # index of the rebalance this query served or triggered, None otherwise
    rebalance: int | None = None


@dataclass
class SimulationTrace:
    records: list[QueryRecord]
    rebalance_count: int
    experiment: ExperimentSpec | None = None
    # serial queries consumed by each rebalance, after window truncation
    rebalance_costs: list[int] = field(default_factory=list)

    @property
    def serial_query_count(self) -> int:
        return sum(1 for r in self.records if r.kind is QueryKind.SERIAL)

    @property
    def window(self) -> int:
        return len(self.records)


def _schedule(spec: ExperimentSpec, config: Config, state, db) -> tuple[Config, tuple[Config, ...]]:
    choice = spec.scheduler
    if choice.kind is SchedulerKind.ODIN:
        result = odin_rebalance(config, state, db, choice.odin_params)
        return result.config, result.trial_configs
    if choice.kind is SchedulerKind.LLS:
        result = lls_rebalance(config, state, db, choice.lls_max_iters)
        return result.config, result.trial_configs
    if choice.kind is SchedulerKind.ORACLE:
        found = oracle_search(state, db, spec.ep_count, spec.oracle_budget).config
        return found, (found,)
    raise AssertionError(f"scheduler {choice.kind} never rebalances")


def run_simulation(spec: ExperimentSpec) -> SimulationTrace:
    db = spec.db
    n = spec.ep_count
    window = spec.window
    states = [tuple(int(m) for m in row) for row in resolve_states(spec.interference_events(), window, n)]

    cache: dict[tuple[Config, tuple[int, ...]], tuple[float, float, int]] = {}

    def observe(config, state):
        # (bottleneck, sum of stage times, occupied stages)
        key = (config, state)
        hit = cache.get(key)
        if hit is None:
            times = _stage_times(config, state, db)
            hit = (times[bottleneck_index(times, config)], sum(times), sum(1 for c in config if c > 0))
            cache[key] = hit
        return hit

    config = balanced_initial_config(db, n)
    detector = DetectorState(observe(config, baseline_state(n))[0], spec.epsilon)
    rebalances = 0
    costs: list[int] = []
    records: list[QueryRecord] = []
    q = 0
    while q < window:
        state = states[q]
        neck, _, occupied = observe(config, state)
        change = detect_change(detector, neck)
        rebalance_id = None
        if change is not Change.STABLE and spec.scheduler.kind is not SchedulerKind.STATIC:
            rebalance_id = rebalances
            rebalances += 1
            new_config, trials = _schedule(spec, config, state, db)
            consumed = 0
            for trial in trials:
                if q >= window:
                    break
                trial_neck, serial, _ = observe(trial, states[q])
                records.append(QueryRecord(q, QueryKind.SERIAL, serial, 1.0 / serial, trial, trial_neck, rebalance_id))
                q += 1
                consumed += 1
            costs.append(consumed)
            logger.debug("query %d: %s -> rebalance to %s in %d trials", q, change.value, new_config, consumed)
            config = new_config
            # reference is the adopted config under the state the scheduler optimised for
            detector.reference_bottleneck = observe(config, state)[0]
            if consumed:
                continue
            neck, _, occupied = observe(config, state)
        records.append(
            QueryRecord(q, QueryKind.PIPELINED, occupied * neck, 1.0 / neck, config, neck, rebalance_id)
        )
        q += 1
    return SimulationTrace(records, rebalances, spec, costs)


TRACE_HEADER = ["query", "kind", "latency_ms", "throughput_qpms", "bottleneck_ms", "config", "rebalance"]


def format_config(config: Sequence[int]) -> str:
    return "/".join(str(c) for c in config)


def parse_config(text: str) -> Config:
    return tuple(int(c) for c in text.split("/"))


def export_trace(trace: SimulationTrace, path: str | Path) -> None:
    """Write one CSV row per query; floats use shortest round-trip repr."""
    if not trace.records:
        raise ValueError("cannot export an empty trace")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in trace.records:
            writer.writerow([
                r.query,
                r.kind.value,
                repr(r.latency),
                repr(r.throughput),
                repr(r.bottleneck),
                format_config(r.config),
                "" if r.rebalance is None else r.rebalance,
            ])


def load_trace(path: str | Path) -> SimulationTrace:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:6] != TRACE_HEADER[:6]:
            raise ValueError(f"{path}:1: not a trace file")
        records = []
        for row in reader:
            rebalance = row[6] if len(row) > 6 else ""
            records.append(QueryRecord(
                int(row[0]),
                QueryKind(row[1]),
                float(row[2]),
                float(row[3]),
                parse_config(row[5]),
                float(row[4]),
                int(rebalance) if rebalance else None,
            ))
    ids = [r.rebalance for r in records if r.rebalance is not None]
    costs = [0] * (max(ids) + 1 if ids else 0)
    for r in records:
        if r.rebalance is not None and r.kind is QueryKind.SERIAL:
            costs[r.rebalance] += 1
    return SimulationTrace(records, len(set(ids)), None, costs)
