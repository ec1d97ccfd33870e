"""Summary metrics, SLO accounting and experiment grids."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import OracleBudgetError, min_max_partition, oracle_search
from .interference import TimelineSpec, resolve_states
from .pipeline import _throughput, baseline_state
from .simulator import ExperimentSpec, QueryKind, SchedulerChoice, SimulationTrace, export_trace, run_simulation
from .timing_db import TimingDatabase

logger = logging.getLogger(__name__)

DEFAULT_SLO_LEVELS = (0.35, 0.5, 0.7, 0.85, 1.0)


@dataclass(frozen=True)
class SummaryMetrics:
    mean_latency: float
    median_latency: float
    p99_latency: float
    mean_throughput: float
    min_throughput: float
    overhead_fraction: float
    rebalance_count: int
    serial_query_count: int
    serial_per_rebalance: float | None


@dataclass(frozen=True)
class SloReport:
    levels: tuple[float, ...]
    reference: str  # "peak" or "resource_constrained"
    violation_fraction: tuple[float, ...]


def nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


def summarize(trace: SimulationTrace) -> SummaryMetrics:
    """Statistics over every query, serial ones included."""
    if not trace.records:
        raise ValueError("cannot summarize an empty trace")
    latencies = sorted(r.latency for r in trace.records)
    tps = [r.throughput for r in trace.records]
    window = len(trace.records)
    serial = trace.serial_query_count
    return SummaryMetrics(
        mean_latency=math.fsum(latencies) / window,
        median_latency=float(np.median(latencies)),
        p99_latency=nearest_rank(latencies, 99),
        mean_throughput=math.fsum(tps) / window,
        min_throughput=min(tps),
        overhead_fraction=serial / window,
        rebalance_count=trace.rebalance_count,
        serial_query_count=serial,
        serial_per_rebalance=serial / trace.rebalance_count if trace.rebalance_count else None,
    )


def slo_violations(
    trace: SimulationTrace,
    levels: Sequence[float],
    reference_throughput: float | Sequence[float],
    reference: str = "peak",
) -> SloReport:
    """Fraction of queries whose throughput is strictly below ``level * reference``.

    ``reference_throughput`` is either one number or one value per query
    (the resource-constrained optimum changes with the interference state).
    """
    levels = tuple(float(s) for s in levels)
    if list(levels) != sorted(levels) or any(not 0 < s <= 1 for s in levels):
        raise ValueError(f"SLO levels must be ascending fractions in (0, 1], got {levels}")
    tps = np.array([r.throughput for r in trace.records])
    ref = np.broadcast_to(np.asarray(reference_throughput, dtype=float), tps.shape)
    if (ref <= 0).any():
        raise ValueError("reference throughput must be positive")
    window = len(tps)
    fractions = tuple(int(np.count_nonzero(tps < s * ref)) / window for s in levels)
    return SloReport(levels, reference, fractions)


def optimal_throughput(state: Sequence[int], db: TimingDatabase, ep_count: int, budget: int = 2_000_000) -> float:
    """Best achievable throughput under ``state``; enumerates when small, else exact partitioning."""
    try:
        return oracle_search(state, db, ep_count, budget).throughput
    except OracleBudgetError:
        return _throughput(min_max_partition(state, db), tuple(state), db)


class _ReferenceCache:
    def __init__(self, db: TimingDatabase, ep_count: int):
        self.db = db
        self.ep_count = ep_count
        self._cache: dict[tuple[int, ...], float] = {}

    def __call__(self, state: tuple[int, ...]) -> float:
        value = self._cache.get(state)
        if value is None:
            value = self._cache[state] = optimal_throughput(state, self.db, self.ep_count)
        return value

    def per_query(self, spec: ExperimentSpec) -> list[float]:
        states = resolve_states(spec.interference_events(), spec.window, spec.ep_count)
        return [self(tuple(int(m) for m in row)) for row in states]


def cell_name(scheduler: SchedulerChoice, freq: int, dur: int, seed: int) -> str:
    return f"{scheduler.name}_f{freq}_d{dur}_s{seed}"


def _run_cell(spec: ExperimentSpec) -> SimulationTrace:
    trace = run_simulation(spec)
    # the spec echo carries the database; drop it before crossing process boundaries
    trace.experiment = None
    return trace


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def run_grid(
    base: ExperimentSpec,
    freq_periods: Sequence[int],
    durations: Sequence[int],
    schedulers: Sequence[SchedulerChoice],
    seeds: Sequence[int],
    out_dir: str | Path,
    slo_levels: Sequence[float] = DEFAULT_SLO_LEVELS,
    jobs: int = 1,
) -> dict:
    """Run every (scheduler, F, D, seed) cell; write one trace CSV per cell and ``aggregate.json``.

    Returns the aggregate document that was written.
    """
    for name, values in (("freq_periods", freq_periods), ("durations", durations),
                         ("schedulers", schedulers), ("seeds", seeds)):
        if not values:
            raise ValueError(f"{name} must not be empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    keys = []
    specs = []
    for scheduler in schedulers:
        for freq in freq_periods:
            for dur in durations:
                for seed in seeds:
                    keys.append((scheduler, freq, dur, seed))
                    specs.append(dataclasses.replace(
                        base,
                        scheduler=scheduler,
                        timeline=TimelineSpec(base.window, freq, dur, seed),
                        events=None,
                    ))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_run_cell, specs))
    else:
        traces = [_run_cell(s) for s in specs]

    db, n = base.db, base.ep_count
    references = _ReferenceCache(db, n)
    peak = references(baseline_state(n))
    per_query_refs: dict[tuple[int, int, int], list[float]] = {}

    cells = []
    for (scheduler, freq, dur, seed), spec, trace in zip(keys, specs, traces):
        export_trace(trace, out_dir / f"{cell_name(scheduler, freq, dur, seed)}.csv")
        if (freq, dur, seed) not in per_query_refs:
            per_query_refs[(freq, dur, seed)] = references.per_query(spec)
        cell = {"scheduler": scheduler.name}
        if scheduler.alpha is not None:
            cell["alpha"] = scheduler.alpha
        cell.update(freq=freq, dur=dur, seed=seed)
        cell["metrics"] = _jsonable(summarize(trace))
        cell["slo"] = [
            _jsonable(slo_violations(trace, slo_levels, peak, "peak")),
            _jsonable(slo_violations(trace, slo_levels, per_query_refs[(freq, dur, seed)], "resource_constrained")),
        ]
        cells.append(cell)
        logger.info("cell %s done", cell_name(scheduler, freq, dur, seed))

    doc = {
        "cells": cells,
        "groups": _group_means(cells, traces),
        "meta": {
            "db_path": base.db_path,
            "N": n,
            "window": base.window,
            "layers": db.layer_count,
            "peak_throughput": peak,
            "slo_levels": list(slo_levels),
        },
    }
    (out_dir / "aggregate.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def _group_means(cells: list[dict], traces: list[SimulationTrace]) -> list[dict]:
    """Per (scheduler, F, D): mean over seeds of per-cell metrics, and per-query pooled means."""
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(cells):
        groups.setdefault((c["scheduler"], c["freq"], c["dur"]), []).append(i)
    out = []
    for (sched, freq, dur), idx in groups.items():
        metrics = [cells[i]["metrics"] for i in idx]
        records = [r for i in idx for r in traces[i].records]
        serial = sum(m["serial_query_count"] for m in metrics)
        rebalances = sum(m["rebalance_count"] for m in metrics)
        out.append({
            "scheduler": sched,
            "freq": freq,
            "dur": dur,
            "cell_mean": {
                key: math.fsum(m[key] for m in metrics) / len(metrics)
                for key in ("mean_latency", "median_latency", "p99_latency", "mean_throughput",
                            "min_throughput", "overhead_fraction", "rebalance_count")
            },
            "pooled": {
                "mean_latency": math.fsum(r.latency for r in records) / len(records),
                "mean_throughput": math.fsum(r.throughput for r in records) / len(records),
                "serial_per_rebalance": serial / rebalances if rebalances else None,
                "serial_query_count": serial,
                "rebalance_count": rebalances,
            },
            "slo_cell_mean": [
                {
                    "reference": cells[idx[0]]["slo"][j]["reference"],
                    "violation_fraction": [
                        math.fsum(cells[i]["slo"][j]["violation_fraction"][k] for i in idx) / len(idx)
                        for k in range(len(cells[idx[0]]["slo"][j]["levels"]))
                    ],
                }
                for j in range(len(cells[idx[0]]["slo"]))
            ],
        })
    return out


def pipelined_median_throughput(trace: SimulationTrace) -> float | None:
    values = [r.throughput for r in trace.records if r.kind is QueryKind.PIPELINED]
    return float(np.median(values)) if values else None
