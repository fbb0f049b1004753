"""Experiment orchestration: grids over (problem, d, D, noise level), persistence,
trend checks, and comparison against the published reference tables.

Each grid cell runs ``runs`` times with seeds derived deterministically from
the root seed and the cell coordinates, so any row can be reproduced exactly
in isolation.  Rows are appended to the output CSV as soon as they finish;
rerunning a sweep skips rows that are already on disk, which makes
interrupted sweeps resumable with identical final results.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from invlab.reference import ReferenceRow, reference_table
from invlab.sampling import ProblemSpec, problem_spec
from invlab.training import Dataset, TrainConfig, evaluate, gen_dataset, train

PROBLEM_IDS = {"transmissivity": 1, "euler-bernoulli": 2, "volterra": 3, "gravimetric": 4}


@dataclass(frozen=True)
class SweepSpec:
    problem: str
    d_values: tuple[int, ...]
    D_values: tuple[int, ...]
    delta_values: tuple[float, ...]
    runs: int = 3
    m_train: int = 20000
    m_test: int = 8000
    train_config: TrainConfig = field(default_factory=TrainConfig)
    root_seed: int = 0
    output_path: str = "results.csv"
    workers: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEM_IDS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if not (self.d_values and self.D_values and self.delta_values):
            raise ValueError("d_values, D_values, delta_values must be non-empty")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    def cells(self):
        for d in self.d_values:
            for D in self.D_values:
                for delta in self.delta_values:
                    yield d, D, delta


def desk_scale_spec(problem: str = "transmissivity", **overrides) -> SweepSpec:
    """Reduced grid sized so a full sweep stays within desktop minutes.

    Full scale (m_train=40000, runs=10, all published cells) is a matter of
    widening these fields.
    """
    defaults = dict(
        problem=problem,
        d_values=(4,),
        D_values=(20, 60, 100, 160),
        delta_values=(0.0, 0.01, 0.03),
        runs=3,
        m_train=20000,
        m_test=8000,
        train_config=TrainConfig(),
        root_seed=20240,
        output_path="results.csv",
    )
    defaults.update(overrides)
    return SweepSpec(**defaults)


@dataclass(frozen=True)
class ResultRow:
    problem: str
    d: int
    D: int
    delta: float
    run_id: int
    test_mse: float
    train_seconds: float
    max_abs_weight: float
    seed_train_data: str
    seed_test_data: str
    seed_model: str
    status: str = "ok"

    def __post_init__(self):
        if self.status == "ok" and self.test_mse < 0:
            raise ValueError("test_mse must be nonnegative")

    def key(self):
        return (self.problem, self.d, self.D, round(self.delta, 12), self.run_id)


CSV_FIELDS = [
    "problem", "d", "D", "delta", "run_id", "test_mse", "train_seconds",
    "max_abs_weight", "seed_train_data", "seed_test_data", "seed_model", "status",
]


def cell_seeds(root_seed: int, problem: str, d: int, D: int, delta: float, run_id: int) -> dict:
    """Three deterministic seed tuples per (cell, run): train data, test data, model."""
    delta_key = int(round(delta * 1e12))
    base = (int(root_seed), PROBLEM_IDS[problem], int(d), int(D), delta_key, int(run_id))
    return {
        "train_data": base + (1,),
        "test_data": base + (2,),
        "model": base + (3,),
    }


def run_cell(problem: str, d: int, D: int, delta: float, run_id: int,
             m_train: int, m_test: int, train_config: TrainConfig,
             root_seed: int) -> ResultRow:
    """One dataset/train/evaluate pass; everything derived from the seeds."""
    seeds = cell_seeds(root_seed, problem, d, D, delta, run_id)
    spec = problem_spec(problem, d=d, D=D)
    t0 = time.perf_counter()
    train_ds = gen_dataset(spec, delta, m_train, seeds["train_data"])
    test_ds = gen_dataset(spec, delta, m_test, seeds["test_data"])
    config = replace(train_config, seed=seeds["model"])
    model = train(train_ds, config)
    test_mse = evaluate(model, test_ds)
    elapsed = time.perf_counter() - t0
    return ResultRow(
        problem=problem, d=d, D=D, delta=delta, run_id=run_id,
        test_mse=test_mse, train_seconds=elapsed,
        max_abs_weight=model.max_abs_weight,
        seed_train_data=json.dumps(seeds["train_data"]),
        seed_test_data=json.dumps(seeds["test_data"]),
        seed_model=json.dumps(seeds["model"]),
    )


def _run_cell_args(args):
    return run_cell(*args)


def read_rows(path) -> list[ResultRow]:
    rows = []
    with open(path) as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ResultRow(
                    problem=rec["problem"], d=int(rec["d"]), D=int(rec["D"]),
                    delta=float(rec["delta"]), run_id=int(rec["run_id"]),
                    test_mse=float(rec["test_mse"]),
                    train_seconds=float(rec["train_seconds"]),
                    max_abs_weight=float(rec["max_abs_weight"]),
                    seed_train_data=rec["seed_train_data"],
                    seed_test_data=rec["seed_test_data"],
                    seed_model=rec["seed_model"],
                    status=rec.get("status", "ok"),
                )
            )
    return rows


def emit_csv(rows, path) -> None:
    """Write rows (ResultRow objects or dicts) with a stable column order."""
    with open(path, "w", newline="") as fh:
        if rows and not isinstance(rows[0], ResultRow):
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
            return
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: getattr(row, k) for k in CSV_FIELDS})


def _append_row(path, row: ResultRow) -> None:
    new_file = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new_file:
            writer.writeheader()
        writer.writerow({k: getattr(row, k) for k in CSV_FIELDS})


def run_sweep(spec: SweepSpec, progress=None) -> list[ResultRow]:
    """Execute every (cell, run) not already present in the output CSV.

    Per-cell failures are recorded as failed rows and the sweep continues.
    Returns the complete row list (previous plus new) in deterministic order.
    """
    done: dict = {}
    if spec.output_path and os.path.exists(spec.output_path):
        for row in read_rows(spec.output_path):
            done[row.key()] = row

    jobs = []
    for d, D, delta in spec.cells():
        for run_id in range(spec.runs):
            key = (spec.problem, d, D, round(delta, 12), run_id)
            if key not in done:
                jobs.append((spec.problem, d, D, delta, run_id,
                             spec.m_train, spec.m_test, spec.train_config, spec.root_seed))

    def finish(row: ResultRow):
        done[row.key()] = row
        if spec.output_path:
            _append_row(spec.output_path, row)
        if progress:
            progress(row)

    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for row in pool.map(_run_cell_args, jobs):
                finish(row)
    else:
        for job in jobs:
            try:
                row = _run_cell_args(job)
            except Exception as exc:  # keep sweeping; the row records the failure
                problem, d, D, delta, run_id = job[:5]
                row = ResultRow(problem, d, D, delta, run_id, 0.0, 0.0, 0.0,
                                "", "", "", status=f"failed: {exc}")
            finish(row)

    ordered = []
    for d, D, delta in spec.cells():
        for run_id in range(spec.runs):
            key = (spec.problem, d, D, round(delta, 12), run_id)
            if key in done:
                ordered.append(done[key])
    return ordered


@dataclass(frozen=True)
class CellStats:
    problem: str
    d: int
    D: int
    delta: float
    mean_mse: float
    std_mse: float
    count: int


def aggregate(rows) -> list[CellStats]:
    """Per-cell mean and standard deviation of the test MSE."""
    if not rows:
        raise ValueError("no rows to aggregate")
    groups: dict = {}
    for row in rows:
        if row.status != "ok":
            continue
        groups.setdefault((row.problem, row.d, row.D, round(row.delta, 12)), []).append(row.test_mse)
    stats = []
    for (problem, d, D, delta), vals in sorted(groups.items()):
        arr = np.asarray(vals)
        stats.append(CellStats(problem, d, D, float(delta), float(arr.mean()),
                               float(arr.std(ddof=0)), arr.size))
    return stats


@dataclass(frozen=True)
class TrendCheck:
    axis: str
    fixed: tuple
    passed: bool
    detail: str


def check_trends(aggregated) -> list[TrendCheck]:
    """Three monotonicity checks on aggregated cells.

    For fixed (d, delta): more measurements must not hurt -- flag if the mean
    MSE at the largest D exceeds 1.2x the mean at the smallest D.  For fixed
    (D, delta): MSE must be non-decreasing in d up to 20% slack.  For fixed
    (d, D): MSE must be non-decreasing in the noise level, no slack.
    """
    cells = {(s.problem, s.d, s.D, s.delta): s.mean_mse for s in aggregated}
    problems = sorted({s.problem for s in aggregated})
    checks = []
    for problem in problems:
        ds = sorted({s.d for s in aggregated if s.problem == problem})
        Ds = sorted({s.D for s in aggregated if s.problem == problem})
        deltas = sorted({s.delta for s in aggregated if s.problem == problem})

        for d in ds:
            for delta in deltas:
                series = [(D, cells[(problem, d, D, delta)]) for D in Ds
                          if (problem, d, D, delta) in cells]
                if len(series) < 2:
                    continue
                first, last = series[0][1], series[-1][1]
                ok = last <= 1.2 * first
                checks.append(TrendCheck(
                    "D", (problem, d, delta), ok,
                    f"mse(D={series[-1][0]})={last:.3g} vs 1.2*mse(D={series[0][0]})={1.2 * first:.3g}"))

        for D in Ds:
            for delta in deltas:
                series = [(d, cells[(problem, d, D, delta)]) for d in ds
                          if (problem, d, D, delta) in cells]
                if len(series) < 2:
                    continue
                ok = all(b >= 0.8 * a for (_, a), (_, b) in zip(series, series[1:]))
                checks.append(TrendCheck(
                    "d", (problem, D, delta), ok,
                    " -> ".join(f"{v:.3g}" for _, v in series)))

        for d in ds:
            for D in Ds:
                series = [(delta, cells[(problem, d, D, delta)]) for delta in deltas
                          if (problem, d, D, delta) in cells]
                if len(series) < 2:
                    continue
                ok = all(b >= a for (_, a), (_, b) in zip(series, series[1:]))
                checks.append(TrendCheck(
                    "delta", (problem, d, D), ok,
                    " -> ".join(f"{v:.3g}" for _, v in series)))
    return checks


@dataclass(frozen=True)
class ComparisonEntry:
    problem: str
    d: int
    D: int
    delta: float
    measured: float
    reference: float
    ratio: float
    passed: bool


def compare_reference(aggregated, reference: list[ReferenceRow] | None = None,
                      factor: float = 5.0) -> list[ComparisonEntry]:
    """Ratio measured/published per overlapping cell; pass iff within [1/factor, factor]."""
    if factor < 1.0:
        raise ValueError("factor must be >= 1")
    if reference is None:
        reference = reference_table()
    ref = {(r.problem, r.d, r.D, round(r.delta, 12)): r.mse for r in reference}
    out = []
    for s in aggregated:
        key = (s.problem, s.d, s.D, round(s.delta, 12))
        if key not in ref:
            continue
        ratio = s.mean_mse / ref[key]
        out.append(ComparisonEntry(s.problem, s.d, s.D, s.delta, s.mean_mse,
                                   ref[key], ratio, 1.0 / factor <= ratio <= factor))
    return out


def reference_as_stats(reference: list[ReferenceRow]) -> list[CellStats]:
    """View reference rows as aggregated cells (for trend checks and plot data)."""
    return [CellStats(r.problem, r.d, r.D, r.delta, r.mse, 0.0, 1) for r in reference]


def emit_plotdata(aggregated, axis: str, path) -> None:
    """Long-form plot series: one series per noise level along the chosen axis."""
    if axis not in ("D", "d"):
        raise ValueError("axis must be 'D' or 'd'")
    rows = [
        {
            "series_delta": s.delta,
            "axis": axis,
            "value": getattr(s, axis),
            "mean_mse": s.mean_mse,
            "std_mse": s.std_mse,
            "problem": s.problem,
        }
        for s in sorted(aggregated, key=lambda s: (s.delta, getattr(s, axis)))
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["series_delta", "axis", "value", "mean_mse", "std_mse", "problem"])
        writer.writeheader()
        writer.writerows(rows)
