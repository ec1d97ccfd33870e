"""Exit criteria. Each test prints one ``[criterion N] PASS|FAIL ...`` line."""

import os
import time

import numpy as np
import pytest

from conftest import brute_force_best
from odin_pipeline import (
    ExperimentSpec,
    OdinParams,
    QueryKind,
    SchedulerChoice,
    SyntheticDbSpec,
    TimelineSpec,
    balanced_initial_config,
    export_trace,
    generate_timeline,
    lls_rebalance,
    load_database,
    load_timeline,
    load_trace,
    odin_rebalance,
    oracle_search,
    run_grid,
    run_simulation,
    save_database,
    save_timeline,
    summarize,
    synthesize_database,
    throughput,
    uniform_database,
)
from odin_pipeline.cli import main as cli_main
from odin_pipeline.reporting import DEFAULT_SLO_LEVELS, pipelined_median_throughput

GRID_F = (2, 10, 100)
GRID_D = (2, 10, 100)
GRID_SEEDS = (0, 1, 2, 3, 4)
GRID_SCHEDULERS = ("odin-a2", "odin-a10", "lls")


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {detail}"
        with capsys.disabled():
            print("\n" + line)
        if not ok:
            pytest.fail(line, pytrace=False)
    return emit


def random_instance(rng, single_colocation=False):
    m = int(rng.integers(4, 17))
    n = int(rng.integers(2, 7))
    slowdowns = tuple(float(s) for s in rng.uniform(1.0, 8.0, size=3))
    db = synthesize_database(SyntheticDbSpec(m, mode_slowdowns=slowdowns, seed=int(rng.integers(2**32))))
    if single_colocation:
        state = [0] * n
        state[int(rng.integers(n))] = int(rng.integers(1, db.mode_count))
    else:
        state = [int(k) for k in rng.integers(0, db.mode_count, size=n)]
    return db, n, tuple(state)


def test_c1_worked_trace(report):
    t0 = time.perf_counter()
    db = uniform_database(8, (2.0,))
    state = (0, 0, 0, 1)
    odin = odin_rebalance((2, 2, 2, 2), state, db, OdinParams(alpha=2))
    lls = lls_rebalance((2, 2, 2, 2), state, db)
    oracle = oracle_search(state, db, 4)
    elapsed = time.perf_counter() - t0
    ok = (
        odin.config == (2, 3, 3, 0) and odin.throughput == 1 / 3 and odin.trials == 3
        and lls.config == (3, 2, 2, 1) and lls.throughput == 1 / 3 and lls.trials == 2
        and oracle.throughput == 1 / 3 and oracle.evaluated == 165
        and elapsed < 1.0
    )
    report(1, ok, f"odin={odin.config}/{odin.trials} lls={lls.config}/{lls.trials} "
                         f"oracle={oracle.throughput:.6f}/{oracle.evaluated} in {elapsed:.3f}s")


def test_c2_never_worse(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    failures = 0
    for _ in range(1000):
        db, n, state = random_instance(rng)
        m = db.layer_count
        cuts = np.sort(rng.integers(0, m + 1, size=n - 1))
        start = tuple(int(c) for c in np.diff(np.concatenate([[0], cuts, [m]])))
        alpha = int(rng.choice([1, 2, 10]))
        tp = odin_rebalance(start, state, db, OdinParams(alpha)).throughput
        best = oracle_search(state, db, n).throughput
        if not (throughput(start, state, db) <= tp <= best):
            failures += 1
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 30
    report(2, ok, f"{failures} violations in 1000 instances, {elapsed:.1f}s")


def test_c3_near_optimality(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(200):
        db, n, state = random_instance(rng, single_colocation=True)
        start = balanced_initial_config(db, n)
        tp = odin_rebalance(start, state, db, OdinParams(alpha=10)).throughput
        ratios.append(tp / oracle_search(state, db, n).throughput)
    ratios = np.array(ratios)
    share = float(np.mean(ratios >= 0.9))

    # informational: every EP may be interfered at once
    multi = []
    for _ in range(200):
        db, n, state = random_instance(rng)
        start = balanced_initial_config(db, n)
        multi.append(odin_rebalance(start, state, db, OdinParams(alpha=10)).throughput
                     / oracle_search(state, db, n).throughput)
    elapsed = time.perf_counter() - t0
    quantiles = np.percentile(ratios, [0, 5, 10, 25, 50])
    ok = share >= 0.8 and elapsed < 60
    report(3, ok, f"{share:.1%} of single-colocation instances >= 90% of oracle; "
                         f"ratio quantiles p0/p5/p10/p25/p50 = {np.round(quantiles, 3).tolist()}; "
                         f"multi-EP states: {np.mean(np.array(multi) >= 0.9):.1%}; {elapsed:.1f}s")


@pytest.fixture(scope="module")
def grid(tmp_path_factory):
    db = synthesize_database(SyntheticDbSpec(16, seed=0))
    base = ExperimentSpec(db, 4, SchedulerChoice("static"), TimelineSpec(4000))
    t0 = time.perf_counter()
    doc = run_grid(base, GRID_F, GRID_D, [SchedulerChoice.parse(s) for s in GRID_SCHEDULERS], GRID_SEEDS,
                   tmp_path_factory.mktemp("grid"), DEFAULT_SLO_LEVELS, jobs=min(8, os.cpu_count() or 1))
    doc["elapsed"] = time.perf_counter() - t0
    doc["by_group"] = {(g["scheduler"], g["freq"], g["dur"]): g for g in doc["groups"]}
    return doc


def _cells():
    return [(f, d) for f in GRID_F for d in GRID_D]


def test_c4_odin_vs_lls(grid, report):
    g = grid["by_group"]
    tp_wins = p99_wins = 0
    rows = []
    for f, d in _cells():
        odin, lls = g[("odin-a10", f, d)]["cell_mean"], g[("lls", f, d)]["cell_mean"]
        tp_wins += odin["mean_throughput"] >= lls["mean_throughput"]
        p99_wins += odin["p99_latency"] <= lls["p99_latency"]
        rows.append(f"F{f}/D{d}: tp {odin['mean_throughput']:.4f} vs {lls['mean_throughput']:.4f}, "
                    f"p99 {odin['p99_latency']:.1f} vs {lls['p99_latency']:.1f}")
    ok = tp_wins >= 7 and p99_wins >= 7 and grid["elapsed"] < 300
    report(4, ok, f"ODIN(a=10) throughput >= LLS in {tp_wins}/9 cells, p99 <= LLS in {p99_wins}/9 cells, "
                         f"grid {grid['elapsed']:.0f}s\n    " + "\n    ".join(rows))


def test_c5_overhead_ordering(grid, report):
    per = {}
    for sched in GRID_SCHEDULERS:
        groups = [g for g in grid["groups"] if g["scheduler"] == sched]
        serial = sum(g["pooled"]["serial_query_count"] for g in groups)
        rebalances = sum(g["pooled"]["rebalance_count"] for g in groups)
        per[sched] = serial / rebalances
    lls, a2, a10 = per["lls"], per["odin-a2"], per["odin-a10"]
    ok = lls < a2 < a10 and lls <= 2 and 2 <= a2 <= 8
    report(5, ok, f"serial queries per rebalance: LLS {lls:.2f}, ODIN(a=2) {a2:.2f}, ODIN(a=10) {a10:.2f}")


def test_c6_slo(grid, report):
    monotone = all(
        list(s["violation_fraction"]) == sorted(s["violation_fraction"])
        for cell in grid["cells"] for s in cell["slo"]
    )
    g = grid["by_group"]
    wins = []
    for k, level in enumerate(DEFAULT_SLO_LEVELS):
        count = 0
        for f, d in _cells():
            odin = g[("odin-a10", f, d)]["slo_cell_mean"][0]["violation_fraction"][k]
            lls = g[("lls", f, d)]["slo_cell_mean"][0]["violation_fraction"][k]
            count += odin <= lls
        wins.append(count)
    ok = monotone and all(w >= 7 for w in wins)
    detail = ", ".join(f"{lvl:.0%}: {w}/9" for lvl, w in zip(DEFAULT_SLO_LEVELS, wins))
    report(6, ok, f"monotone={monotone}; ODIN(a=10) violations <= LLS per peak-SLO level: {detail}")


def test_c7_scalability(report):
    db = synthesize_database(SyntheticDbSpec(52, seed=0))
    medians, latencies, times = [], [], []
    for n in (4, 8, 16, 32, 52):
        t0 = time.perf_counter()
        trace = run_simulation(ExperimentSpec(db, n, SchedulerChoice.odin(10), TimelineSpec(4000, 10, 10, 0)))
        times.append(time.perf_counter() - t0)
        medians.append(pipelined_median_throughput(trace))
        latencies.append(summarize(trace).median_latency)
    non_decreasing = all(b >= a for a, b in zip(medians, medians[1:]))
    spread = max(latencies) / min(latencies)
    ok = non_decreasing and times[-1] < 120 and spread < 2
    report(7, ok, f"median pipelined tp {np.round(medians, 4).tolist()}, "
                         f"median latency spread {spread:.2f}x, N=52 run {times[-1]:.2f}s")


def test_c8_oracle_cross_validation(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    mismatches = checked = 0
    for m in range(1, 9):
        db = synthesize_database(SyntheticDbSpec(m, seed=m))
        for n in range(1, 4):
            for _ in range(50):
                state = tuple(int(k) for k in rng.integers(0, db.mode_count, size=n))
                r = oracle_search(state, db, n)
                checked += 1
                mismatches += (r.config, r.throughput) != brute_force_best(state, db, n)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    report(8, ok, f"{mismatches} mismatches over {checked} searches, {elapsed:.2f}s")


def test_c9_determinism(tmp_path, report, capsys):
    db = tmp_path / "db.csv"
    cli_main(["synth-db", "--layers", "16", "--seed", "3", "--out", str(db)])
    outputs = []
    for rep in ("a", "b"):
        trace = tmp_path / f"{rep}.csv"
        cli_main(["run", "--db", str(db), "--eps", "4", "--scheduler", "odin", "--alpha", "10",
                  "--window", "1000", "--freq", "10", "--dur", "10", "--seed", "5", "--out", str(trace)])
        cli_main(["grid", "--db", str(db), "--eps", "4", "--window", "500", "--freq", "2", "10",
                  "--dur", "10", "--seeds", "0", "1", "--out-dir", str(tmp_path / f"grid-{rep}")])
        files = sorted((tmp_path / f"grid-{rep}").iterdir())
        outputs.append([trace.read_bytes()] + [f.read_bytes() for f in files])
    capsys.readouterr()
    ok = outputs[0] == outputs[1] and len(outputs[0]) == 1 + 2 * 3 * 2 + 1
    report(9, ok, f"{len(outputs[0])} files compared byte-for-byte")


def test_c10_round_trips(tmp_path, report):
    t0 = time.perf_counter()
    db = synthesize_database(SyntheticDbSpec(16, seed=9))
    save_database(db, tmp_path / "db1.csv")
    save_database(load_database(tmp_path / "db1.csv"), tmp_path / "db2.csv")
    db_ok = (tmp_path / "db1.csv").read_bytes() == (tmp_path / "db2.csv").read_bytes()

    events = generate_timeline(TimelineSpec(400, 10, 25, 9), 4, db.mode_count)
    save_timeline(events, tmp_path / "tl1.csv", db.mode_ids)
    save_timeline(load_timeline(tmp_path / "tl1.csv", db.mode_ids), tmp_path / "tl2.csv", db.mode_ids)
    tl_ok = (tmp_path / "tl1.csv").read_bytes() == (tmp_path / "tl2.csv").read_bytes()

    trace = run_simulation(ExperimentSpec(db, 4, SchedulerChoice.odin(2), TimelineSpec(400, 10, 25, 9)))
    export_trace(trace, tmp_path / "tr1.csv")
    loaded = load_trace(tmp_path / "tr1.csv")
    export_trace(loaded, tmp_path / "tr2.csv")
    tr_ok = ((tmp_path / "tr1.csv").read_bytes() == (tmp_path / "tr2.csv").read_bytes()
             and summarize(loaded) == summarize(trace)
             and sum(r.kind is QueryKind.SERIAL for r in loaded.records) == trace.serial_query_count)
    elapsed = time.perf_counter() - t0
    ok = db_ok and tl_ok and tr_ok and elapsed < 1.0
    report(10, ok, f"database={db_ok} timeline={tl_ok} trace={tr_ok} in {elapsed:.3f}s")
