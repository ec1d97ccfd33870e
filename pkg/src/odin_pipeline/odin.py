"""Online pipeline rebalancing heuristic.

Starting from the current configuration, work is pulled off the slowest
stage one layer at a time. The first move after every improvement removes a
layer from both ends of the slowest stage; later moves push a single layer
towards the lighter half of the pipeline, onto its lightest stage. The
search stops after ``alpha`` consecutive trials without a strict throughput
gain and returns the best configuration seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .pipeline import (
    Config,
    ConfigError,
    _stage_times,
    _throughput,
    bottleneck_index,
    check_config,
    move_layer,
)
from .timing_db import TimingDatabase


@dataclass(frozen=True)
class OdinParams:
    alpha: int = 2
    # None means alpha * layers * execution places
    max_trials: int | None = None

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.max_trials is not None and self.max_trials < self.alpha:
            raise ValueError(f"max_trials ({self.max_trials}) must be >= alpha ({self.alpha})")

    def trial_cap(self, layer_count: int, ep_count: int) -> int:
        if self.max_trials is not None:
            return self.max_trials
        return max(self.alpha, self.alpha * layer_count * ep_count)


@dataclass(frozen=True)
class RebalanceResult:
    """Best configuration found plus every configuration whose throughput was evaluated."""

    config: Config
    throughput: float
    trial_configs: tuple[Config, ...]

    @property
    def trials(self) -> int:
        return len(self.trial_configs)


def _perturb_both_ends(config: Config, affected: int) -> Config:
    # subsequent stage first, then preceding; stops early if the stage runs dry
    for neighbour in (affected + 1, affected - 1):
        if 0 <= neighbour < len(config) and config[affected] > 0:
            config = move_layer(config, affected, neighbour)
    return config


def _lightest_towards(times: Sequence[float], affected: int, direction: str) -> int | None:
    n = len(times)
    if direction == "left":
        side = range(affected - 1, -1, -1)
    else:
        side = range(affected + 1, n)
    if not side:
        return None
    # side is ordered outward from the affected stage, so min() keeps the nearest on ties
    return min(side, key=lambda i: times[i])


def odin_rebalance(
    start: Sequence[int],
    state: Sequence[int],
    db: TimingDatabase,
    params: OdinParams = OdinParams(),
) -> RebalanceResult:
    start = tuple(start)
    state = tuple(state)
    check_config(start, db, state)
    if not any(start):
        raise ConfigError("start configuration is empty")

    best_tp = _throughput(start, state, db)
    best = current = start
    n = len(start)
    if n == 1:
        return RebalanceResult(best, best_tp, ())

    cap = params.trial_cap(db.layer_count, n)
    trials: list[Config] = []
    gamma = 0
    while gamma < params.alpha and len(trials) < cap:
        times = _stage_times(current, state, db)
        affected = bottleneck_index(times, current)
        if gamma == 0:
            current = _perturb_both_ends(current, affected)
            times = _stage_times(current, state, db)

        left_sum = math.fsum(times[: affected + 1])
        right_sum = math.fsum(times[affected + 1 :])
        direction = "left" if left_sum < right_sum else "right"
        lightest = _lightest_towards(times, affected, direction)
        if lightest is None:
            lightest = _lightest_towards(times, affected, "right" if direction == "left" else "left")

        if current[affected] > 0:
            current = move_layer(current, affected, lightest)
        tp = _throughput(current, state, db)
        trials.append(current)

        if tp < best_tp:
            gamma += 1
        elif tp == best_tp:
            # plateau: push one more layer the same way to escape it
            if current[affected] > 0:
                current = move_layer(current, affected, lightest)
            gamma += 1
        else:
            gamma = 0
            best_tp = tp
            best = current

    return RebalanceResult(best, best_tp, tuple(trials))
