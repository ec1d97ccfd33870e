"""Reference schedulers: exhaustive search and least-loaded rebalancing."""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .odin import RebalanceResult
from .pipeline import Config, ConfigError, _stage_times, _throughput, baseline_state, check_config, move_layer
from .timing_db import TimingDatabase

DEFAULT_ENUMERATION_BUDGET = 10**8
_CHUNK = 1 << 16
_CACHE_LIMIT = 1 << 20


class OracleBudgetError(RuntimeError):
    """The composition space is too large to enumerate."""


@dataclass(frozen=True)
class OracleResult:
    config: Config
    throughput: float
    evaluated: int


@dataclass(frozen=True)
class StageLoad:
    t: float
    w: float
    u: float


def composition_count(layers: int, ep_count: int) -> int:
    return math.comb(layers + ep_count - 1, ep_count - 1)


def iter_compositions(layers: int, ep_count: int) -> Iterator[Config]:
    """Every length-``ep_count`` non-negative composition of ``layers``, lexicographically."""
    for bars in itertools.combinations(range(layers + ep_count - 1), ep_count - 1):
        prev = -1
        counts = []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(layers + ep_count - 2 - prev)
        yield tuple(counts)


def _bounds_chunks(layers: int, ep_count: int) -> Iterator[np.ndarray]:
    # each row is [0, e_0, ..., e_{N-2}, m] with e_j = bar_j - j
    combos = itertools.combinations(range(layers + ep_count - 1), ep_count - 1)
    shift = np.arange(ep_count - 1)
    while True:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.int64
        )
        if flat.size == 0:
            return
        cuts = flat.reshape(-1, ep_count - 1) - shift
        rows = cuts.shape[0]
        yield np.hstack([np.zeros((rows, 1), np.int64), cuts, np.full((rows, 1), layers, np.int64)])


@lru_cache(maxsize=64)
def _cached_bounds(layers: int, ep_count: int) -> np.ndarray:
    bounds = np.vstack(list(_bounds_chunks(layers, ep_count)))
    bounds.setflags(write=False)
    return bounds


def oracle_search(
    state: Sequence[int],
    db: TimingDatabase,
    ep_count: int,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> OracleResult:
    """Exhaustively evaluate every composition and return the fastest.

    Compositions are scanned in lexicographic order and only a strictly
    better bottleneck replaces the incumbent, so ties resolve to the
    lexicographically smallest configuration.
    """
    state = tuple(state)
    if ep_count < 1:
        raise ConfigError("need at least one execution place")
    check_config((db.layer_count,) + (0,) * (ep_count - 1), db, state)
    m = db.layer_count
    total = composition_count(m, ep_count)
    if total > budget:
        raise OracleBudgetError(
            f"{total} compositions of {m} layers over {ep_count} execution places exceed the "
            f"enumeration budget of {budget}; reduce the number of execution places or layers"
        )
    if ep_count == 1:
        config = (m,)
        return OracleResult(config, _throughput(config, state, db), 1)

    table = db.segment_table
    modes = np.asarray(state)
    chunks = [_cached_bounds(m, ep_count)] if total <= _CACHE_LIMIT else _bounds_chunks(m, ep_count)
    best_time = math.inf
    best_bounds = None
    for bounds in chunks:
        times = table[modes, bounds[:, :-1], bounds[:, 1:]]
        worst = times.max(axis=1)
        i = int(np.argmin(worst))
        if worst[i] < best_time:
            best_time = float(worst[i])
            best_bounds = bounds[i]
    config = tuple(int(c) for c in np.diff(best_bounds))
    return OracleResult(config, 1.0 / best_time, total)


def peak_throughput(db: TimingDatabase, ep_count: int, budget: int = DEFAULT_ENUMERATION_BUDGET) -> float:
    """Best throughput with no interference on any execution place."""
    return oracle_search(baseline_state(ep_count), db, ep_count, budget).throughput


def min_max_partition(state: Sequence[int], db: TimingDatabase) -> Config:
    """Exact min-max contiguous partition, lexicographically smallest among optima.

    Gives the same answer as :func:`oracle_search` without enumeration: the
    optimal bottleneck is found by bisection over all segment times, then
    counts are fixed left to right at the smallest feasible value.
    """
    state = tuple(state)
    n = len(state)
    m = db.layer_count
    check_config((m,) + (0,) * (n - 1), db, state)
    table = db.segment_table

    def seg(pos, a, b):
        return table[state[pos], a, b]

    def fits(pos, start, limit):
        # greedy maximal stages (possibly empty); a shorter suffix is never harder to place
        for p in range(pos, n):
            end = start
            while end < m and seg(p, start, end + 1) <= limit:
                end += 1
            start = end
        return start == m

    candidates = np.unique(
        np.concatenate([table[k][np.triu_indices(m + 1, 1)] for k in set(state)])
    )
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if fits(0, 0, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    limit = candidates[lo]

    counts = []
    start = 0
    for pos in range(n - 1):
        c = 0
        while not (seg(pos, start, start + c) <= limit and fits(pos + 1, start + c, limit)):
            c += 1
        counts.append(c)
        start += c
    counts.append(m - start)
    return tuple(counts)


def stage_loads(times: Sequence[float]) -> list[StageLoad]:
    """Waiting time and utilisation along a chain of stages.

    ``w`` is not clamped at zero: a bottleneck stage gets a negative waiting
    time and a utilisation above one.
    """
    loads = []
    w = 0.0
    for i, t in enumerate(times):
        if i > 0:
            w = w + times[i - 1] - t
        u = 1.0 - w / (w + t) if w + t != 0 else 1.0
        loads.append(StageLoad(t, w, u))
    return loads


def lls_rebalance(
    start: Sequence[int],
    state: Sequence[int],
    db: TimingDatabase,
    max_iters: int | None = None,
) -> RebalanceResult:
    """Least-loaded scheduling: shift layers from the most to the least utilised stage.

    Continues while each move strictly improves throughput; empty stages
    neither give nor receive layers.
    """
    start = tuple(start)
    state = tuple(state)
    check_config(start, db, state)
    if not any(start):
        raise ConfigError("start configuration is empty")
    if max_iters is None:
        max_iters = db.layer_count
    if max_iters < 1:
        raise ValueError("max_iters must be positive")

    current = start
    best_tp = _throughput(current, state, db)
    seen = {current}
    trials: list[Config] = []
    while len(trials) < max_iters:
        occupied = [i for i, c in enumerate(current) if c > 0]
        if len(occupied) < 2:
            break
        times = _stage_times(current, state, db)
        util = [load.u for load in stage_loads([times[i] for i in occupied])]
        most = max(range(len(occupied)), key=lambda j: (util[j], -j))
        least = min((j for j in range(len(occupied)) if j != most), key=lambda j: (util[j], j))
        candidate = move_layer(current, occupied[most], occupied[least])
        if candidate in seen:
            break
        tp = _throughput(candidate, state, db)
        trials.append(candidate)
        if tp <= best_tp:
            break
        current = candidate
        best_tp = tp
        seen.add(candidate)
    return RebalanceResult(current, best_tp, tuple(trials))
