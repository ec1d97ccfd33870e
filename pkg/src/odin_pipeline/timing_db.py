"""Per-layer execution-time database.

A database holds one row per schedulable layer and one column per
interference mode. Column 0 is always the baseline (no co-location) mode.
Rows are "schedulable units": for residual networks a whole residual block
is one row.

Each row is treated as a self-contained cost; any framework overhead
between layers is assumed to be folded into the measured times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

#: Significant digits used when writing times to CSV.
CSV_SIG_DIGITS = 6

# Illustrative slowdowns for the eleven co-location modes B..L (memory
# bandwidth stressors, CPU stressors, then half-core splits). These are
# configuration data only and not hardware measurements.
ILLUSTRATIVE_MODE_IDS = tuple("ABCDEFGHIJKL")
ILLUSTRATIVE_SLOWDOWNS = (1.1, 1.25, 1.5, 2.0, 1.15, 1.35, 1.7, 2.4, 2.2, 2.6, 3.2)
# CNN layers differ a lot in cost; a 25x spread keeps synthetic rows heterogeneous.
DEFAULT_BASE_RANGE = (0.2, 5.0)


class DatabaseError(ValueError):
    """Raised for malformed or invalid timing databases."""


@dataclass(frozen=True)
class InterferenceMode:
    id: str
    description: str = ""


def format_time(value: float) -> str:
    return format(value, f".{CSV_SIG_DIGITS}g")


@dataclass(frozen=True, eq=False)
class TimingDatabase:
    """Immutable m x (n+1) matrix of per-layer times in milliseconds.

    ``times[l, k]`` is the time of layer ``l`` under mode ``k``; mode 0 is
    the baseline.
    """

    modes: tuple[InterferenceMode, ...]
    times: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        if times.ndim != 2:
            raise DatabaseError(f"times must be a 2-D matrix, got shape {times.shape}")
        m, k = times.shape
        if m < 1:
            raise DatabaseError("database needs at least one layer")
        if k != len(self.modes):
            raise DatabaseError(f"{k} time columns but {len(self.modes)} modes")
        seen = set()
        for col, mode in enumerate(self.modes):
            if mode.id in seen:
                raise DatabaseError(f"duplicate mode id {mode.id!r} in column {col + 1}")
            seen.add(mode.id)
        bad = ~(np.isfinite(times) & (times > 0))
        if bad.any():
            row, col = (int(i) for i in np.argwhere(bad)[0])
            raise DatabaseError(
                f"layer {row} mode {self.modes[col].id!r}: time must be positive and finite, "
                f"got {times[row, col]!r}"
            )
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def layer_count(self) -> int:
        return self.times.shape[0]

    @property
    def mode_count(self) -> int:
        return self.times.shape[1]

    @property
    def mode_ids(self) -> list[str]:
        return [mode.id for mode in self.modes]

    def mode_index(self, mode_id: str) -> int:
        try:
            return self.mode_ids.index(mode_id)
        except ValueError:
            raise DatabaseError(f"unknown mode id {mode_id!r}; known: {self.mode_ids}") from None

    @cached_property
    def segment_table(self) -> np.ndarray:
        """``table[k, a, b]`` = correctly rounded sum of layers ``a..b-1`` under mode ``k``.

        Sums use ``math.fsum`` so any two code paths summing the same
        layers get bit-identical results regardless of summation order.
        """
        m, n_modes = self.times.shape
        table = np.zeros((n_modes, m + 1, m + 1))
        cols = [self.times[:, k].tolist() for k in range(n_modes)]
        for k, col in enumerate(cols):
            for a in range(m):
                for b in range(a + 1, m + 1):
                    table[k, a, b] = math.fsum(col[a:b])
        table.setflags(write=False)
        return table

    def segment_time(self, start: int, stop: int, mode: int) -> float:
        return float(self.segment_table[mode, start, stop])

    def __eq__(self, other):
        if not isinstance(other, TimingDatabase):
            return NotImplemented
        # descriptions are not part of the file format
        return self.mode_ids == other.mode_ids and np.array_equal(self.times, other.times)

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class SyntheticDbSpec:
    layer_count: int
    base_time_range: tuple[float, float] = DEFAULT_BASE_RANGE
    mode_slowdowns: tuple[float, ...] = ILLUSTRATIVE_SLOWDOWNS
    seed: int = 0
    mode_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        low, high = self.base_time_range
        if self.layer_count < 1:
            raise DatabaseError("layer_count must be positive")
        if not (low > 0 and high >= low):
            raise DatabaseError(f"invalid base_time_range {self.base_time_range}")
        if any(s < 1.0 for s in self.mode_slowdowns):
            raise DatabaseError("all mode slowdowns must be >= 1.0")
        if not 0 <= self.seed < 2**64:
            raise DatabaseError("seed must be a 64-bit unsigned integer")
        if self.mode_ids is not None and len(self.mode_ids) != len(self.mode_slowdowns) + 1:
            raise DatabaseError("mode_ids needs one entry per slowdown plus the baseline")


def _default_mode_ids(count: int) -> list[str]:
    if count <= len(ILLUSTRATIVE_MODE_IDS):
        return list(ILLUSTRATIVE_MODE_IDS[:count])
    return [f"M{i}" for i in range(count)]


def synthesize_database(spec: SyntheticDbSpec) -> TimingDatabase:
    """Draw baseline times uniformly and scale them by each mode's slowdown."""
    rng = np.random.default_rng(spec.seed)
    low, high = spec.base_time_range
    base = rng.uniform(low, high, size=spec.layer_count) if high > low else np.full(spec.layer_count, low)
    columns = [base] + [base * s for s in spec.mode_slowdowns]
    ids = spec.mode_ids or _default_mode_ids(len(columns))
    modes = [InterferenceMode(ids[0], "baseline")] + [
        InterferenceMode(mid, f"illustrative slowdown x{s:g}") for mid, s in zip(ids[1:], spec.mode_slowdowns)
    ]
    return TimingDatabase(tuple(modes), np.column_stack(columns))


def uniform_database(layer_count: int, slowdowns: Sequence[float] = (2.0,), base: float = 1.0) -> TimingDatabase:
    """Every layer costs ``base`` at baseline and ``base * s`` under mode ``s``."""
    return synthesize_database(
        SyntheticDbSpec(layer_count, (base, base), tuple(slowdowns), seed=0)
    )


def load_database(path: str | Path) -> TimingDatabase:
    path = Path(path)
    if not path.is_file():
        raise DatabaseError(f"{path}: no such database file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatabaseError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0].strip() != "layer":
        raise DatabaseError(f"{path}:1: header must start with 'layer' followed by mode ids")
    mode_ids = [h.strip() for h in header[1:]]
    seen: dict[str, int] = {}
    for col, mid in enumerate(mode_ids, start=2):
        if not mid:
            raise DatabaseError(f"{path}:1:{col}: empty mode id")
        if mid in seen:
            raise DatabaseError(f"{path}:1:{col}: duplicate mode id {mid!r} (first in column {seen[mid]})")
        seen[mid] = col
    times = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatabaseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        values = []
        for col, cell in enumerate(row[1:], start=2):
            try:
                value = float(cell)
            except ValueError:
                raise DatabaseError(f"{path}:{lineno}:{col}: non-numeric cell {cell!r}") from None
            if not (math.isfinite(value) and value > 0):
                raise DatabaseError(f"{path}:{lineno}:{col}: time must be positive and finite, got {cell!r}")
            values.append(value)
        times.append(values)
    if not times:
        raise DatabaseError(f"{path}: no layer rows")
    return TimingDatabase(tuple(InterferenceMode(mid) for mid in mode_ids), np.array(times))


def save_database(db: TimingDatabase, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", *db.mode_ids])
        for layer, row in enumerate(db.times):
            writer.writerow([layer, *(format_time(float(v)) for v in row)])
