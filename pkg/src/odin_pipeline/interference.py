"""Interference timelines and bottleneck-based change detection."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .pipeline import State

BASELINE_MODE = 0


@dataclass(frozen=True)
class InterferenceEvent:
    start_query: int
    duration_queries: int
    ep: int
    mode: int

    @property
    def end_query(self) -> int:
        return self.start_query + self.duration_queries

    def covers(self, query: int) -> bool:
        return self.start_query <= query < self.end_query


@dataclass(frozen=True)
class TimelineSpec:
    window: int = 4000
    frequency_period: int = 10
    duration: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("window", "frequency_period", "duration"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def generate_timeline(spec: TimelineSpec, ep_count: int, mode_count: int) -> list[InterferenceEvent]:
    """One event every ``frequency_period`` queries on a random EP with a random non-baseline mode."""
    if mode_count < 2:
        raise ValueError("need at least one non-baseline mode to generate interference")
    if ep_count < 1:
        raise ValueError("need at least one execution place")
    rng = np.random.default_rng(spec.seed)
    events = []
    for start in range(0, spec.window, spec.frequency_period):
        ep = int(rng.integers(0, ep_count))
        mode = int(rng.integers(1, mode_count))
        events.append(InterferenceEvent(start, spec.duration, ep, mode))
    return events


def event_count(spec: TimelineSpec) -> int:
    return math.ceil(spec.window / spec.frequency_period)


def _by_start(timeline: Sequence[InterferenceEvent]) -> list[InterferenceEvent]:
    # stable: events sharing a start keep their listed order, later listed wins
    return sorted(timeline, key=lambda e: e.start_query)


def state_at(
    timeline: Sequence[InterferenceEvent], query: int, ep_count: int, baseline_mode: int = BASELINE_MODE
) -> State:
    """Mode per EP at ``query``; the most recently started covering event wins."""
    modes = [baseline_mode] * ep_count
    for event in _by_start(timeline):
        if event.start_query > query:
            break
        if event.covers(query):
            modes[event.ep] = event.mode
    return tuple(modes)


def resolve_states(
    timeline: Sequence[InterferenceEvent], window: int, ep_count: int, baseline_mode: int = BASELINE_MODE
) -> np.ndarray:
    """``states[q]`` equals ``state_at(timeline, q, ...)`` for every query; events are truncated at the window."""
    states = np.full((window, ep_count), baseline_mode, dtype=np.int64)
    for event in _by_start(timeline):
        if event.start_query >= window:
            continue
        states[event.start_query : min(event.end_query, window), event.ep] = event.mode
    return states


class Change(enum.Enum):
    INCREASED = "increased"
    DECREASED = "decreased"
    STABLE = "stable"


@dataclass
class DetectorState:
    reference_bottleneck: float
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


def detect_change(detector: DetectorState, observed_bottleneck: float) -> Change:
    if observed_bottleneck <= 0:
        raise ValueError("observed bottleneck must be positive")
    ref = detector.reference_bottleneck
    if observed_bottleneck > ref * (1 + detector.epsilon):
        return Change.INCREASED
    if observed_bottleneck < ref * (1 - detector.epsilon):
        return Change.DECREASED
    return Change.STABLE


TIMELINE_HEADER = ["start_query", "duration", "ep", "mode_id"]


def save_timeline(timeline: Sequence[InterferenceEvent], path: str | Path, mode_ids: Sequence[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMELINE_HEADER)
        for e in timeline:
            writer.writerow([e.start_query, e.duration_queries, e.ep, mode_ids[e.mode]])


def load_timeline(path: str | Path, mode_ids: Sequence[str]) -> list[InterferenceEvent]:
    path = Path(path)
    index = {mid: i for i, mid in enumerate(mode_ids)}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TIMELINE_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(TIMELINE_HEADER)}")
        events = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                start, duration, ep, mode_id = row
                event = InterferenceEvent(int(start), int(duration), int(ep), index[mode_id])
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad timeline row {row!r} ({exc})") from None
            if event.start_query < 0 or event.duration_queries < 1 or event.ep < 0:
                raise ValueError(f"{path}:{lineno}: out-of-range values in {row!r}")
            events.append(event)
    return events
