"""Pipeline configurations and their stage times, throughput and latency.

A configuration is a tuple of per-execution-place layer counts in pipeline
order; stage ``i`` owns layers ``[sum(counts[:i]), sum(counts[:i+1]))``.
Zero entries are idle execution places and stay in the vector so that
layers can later be moved back onto them.

An interference state is a tuple with one mode index per execution place.
"""

from __future__ import annotations

from itertools import accumulate
from typing import Sequence

from .timing_db import TimingDatabase

Config = tuple[int, ...]
State = tuple[int, ...]


class ConfigError(ValueError):
    """Raised when a configuration or state does not fit the database."""


def check_config(config: Sequence[int], db: TimingDatabase, state: Sequence[int] | None = None) -> None:
    if len(config) < 1:
        raise ConfigError("configuration needs at least one execution place")
    if any(c < 0 for c in config):
        raise ConfigError(f"negative layer count in {tuple(config)}")
    if sum(config) != db.layer_count:
        raise ConfigError(f"configuration {tuple(config)} assigns {sum(config)} layers, database has {db.layer_count}")
    if state is not None:
        if len(state) != len(config):
            raise ConfigError(f"state has {len(state)} execution places, configuration has {len(config)}")
        for ep, mode in enumerate(state):
            if not 0 <= mode < db.mode_count:
                raise ConfigError(f"execution place {ep}: mode index {mode} out of range")


def baseline_state(ep_count: int) -> State:
    return (0,) * ep_count


def boundaries(config: Sequence[int]) -> list[int]:
    """Layer offsets ``[0, c0, c0+c1, ..., m]``."""
    return [0, *accumulate(config)]


def stage_times(config: Sequence[int], state: Sequence[int], db: TimingDatabase) -> tuple[float, ...]:
    check_config(config, db, state)
    return _stage_times(config, state, db)


def _stage_times(config, state, db):
    # unchecked hot path used by the schedulers and the simulator
    table = db.segment_table
    bounds = boundaries(config)
    return tuple(float(table[state[i], bounds[i], bounds[i + 1]]) for i in range(len(config)))


def bottleneck_index(times: Sequence[float], config: Sequence[int]) -> int:
    """Index of the slowest non-empty stage; ties go to the lowest index."""
    best = -1
    for i, (t, c) in enumerate(zip(times, config)):
        if c > 0 and (best < 0 or t > times[best]):
            best = i
    if best < 0:
        raise ConfigError("configuration has no non-empty stage")
    return best


def bottleneck(config: Sequence[int], state: Sequence[int], db: TimingDatabase) -> float:
    times = stage_times(config, state, db)
    return times[bottleneck_index(times, config)]


def throughput(config: Sequence[int], state: Sequence[int], db: TimingDatabase) -> float:
    """Queries per millisecond: reciprocal of the bottleneck stage time."""
    return 1.0 / bottleneck(config, state, db)


def _throughput(config, state, db):
    return 1.0 / max(_stage_times(config, state, db))


def pipelined_latency(config: Sequence[int], state: Sequence[int], db: TimingDatabase) -> float:
    """Lockstep steady-state latency: occupied stages times the bottleneck time.

    Every occupied stage holds a query for one bottleneck period, so a query
    leaves the pipeline after ``stages * bottleneck`` milliseconds.
    """
    occupied = sum(1 for c in config if c > 0)
    return occupied * bottleneck(config, state, db)


def serial_latency(config: Sequence[int], state: Sequence[int], db: TimingDatabase) -> float:
    """All stages run back to back with no overlap."""
    return sum(stage_times(config, state, db))


def balanced_initial_config(db: TimingDatabase, ep_count: int) -> Config:
    """Best all-baseline configuration; ties go to the lexicographically smallest.

    Small instances are solved by exhaustive enumeration. Larger ones use an
    exact min-max chain partition that returns the same configuration.
    """
    from .baselines import composition_count, min_max_partition, oracle_search

    if ep_count < 1:
        raise ConfigError("need at least one execution place")
    state = baseline_state(ep_count)
    if composition_count(db.layer_count, ep_count) <= ENUMERATION_LIMIT:
        return oracle_search(state, db, ep_count).config
    return min_max_partition(state, db)


# above this many compositions the initial config comes from the exact partitioner
ENUMERATION_LIMIT = 200_000


def move_layer(config: Sequence[int], source: int, dest: int, count: int = 1) -> Config:
    """Move ``count`` layers from stage ``source`` to stage ``dest``.

    Stages strictly between the two keep their counts, so their layer
    windows slide one position toward ``source``; contiguity is preserved.
    """
    if config[source] < count:
        raise ConfigError(f"stage {source} holds {config[source]} layers, cannot move {count}")
    moved = list(config)
    moved[source] -= count
    moved[dest] += count
    return tuple(moved)
