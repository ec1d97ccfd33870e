"""Online rebalancing of inference pipelines under co-location interference.

The package simulates a linear inference pipeline whose stages are bound to
execution places, drives it with an interference timeline and a per-layer
timing database, and compares an online heuristic rebalancer against a
least-loaded baseline and an exhaustive oracle.
"""

from .baselines import (
    OracleBudgetError,
    OracleResult,
    StageLoad,
    composition_count,
    iter_compositions,
    lls_rebalance,
    min_max_partition,
    oracle_search,
    peak_throughput,
    stage_loads,
)
from .interference import (
    Change,
    DetectorState,
    InterferenceEvent,
    TimelineSpec,
    detect_change,
    generate_timeline,
    load_timeline,
    resolve_states,
    save_timeline,
    state_at,
)
from .odin import OdinParams, RebalanceResult, odin_rebalance
from .pipeline import (
    ConfigError,
    balanced_initial_config,
    baseline_state,
    bottleneck,
    move_layer,
    pipelined_latency,
    serial_latency,
    stage_times,
    throughput,
)
from .reporting import SloReport, SummaryMetrics, run_grid, slo_violations, summarize
from .simulator import (
    ExperimentSpec,
    QueryKind,
    QueryRecord,
    SchedulerChoice,
    SchedulerKind,
    SimulationTrace,
    export_trace,
    load_trace,
    run_simulation,
)
from .timing_db import (
    DatabaseError,
    InterferenceMode,
    SyntheticDbSpec,
    TimingDatabase,
    load_database,
    save_database,
    synthesize_database,
    uniform_database,
)

__version__ = "0.1.0"
