"""Published mean-squared-error tables used as desk-scale comparison targets.

Six tables, one reference row set per experiment: transmissivity across
measurement counts (d=4) and across intrinsic dimensions (D=100), the beam
problem, the Volterra problem at d=4 and d=8, and the gravimetric problem.
Values are kept verbatim; a checksum test guards the transcription.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

_D_GRID = (20, 40, 60, 80, 100, 120, 140, 160)
_GRAV_D_GRID = (8, 12, 16, 20, 24, 36, 40)


@dataclass(frozen=True)
class ReferenceRow:
    table: str
    problem: str
    d: int
    D: int
    delta: float
    mse: float


def _rows(table, problem, d, D_values, delta, values):
    return [
        ReferenceRow(table, problem, d, D, delta, v) for D, v in zip(D_values, values)
    ]


def _table1():
    rows = []
    data = {
        0.0: (3.02e-5, 1.08e-5, 7.86e-6, 4.27e-6, 5.49e-6, 4.14e-6, 3.59e-6, 5.27e-6),
        0.005: (1.79e-4, 9.53e-5, 6.70e-5, 5.88e-5, 5.48e-5, 4.07e-5, 3.25e-5, 3.52e-5),
        0.01: (3.73e-4, 2.03e-4, 1.49e-4, 1.30e-4, 9.98e-5, 8.87e-5, 6.59e-5, 6.60e-5),
        0.02: (7.20e-4, 2.90e-4, 2.18e-4, 1.68e-4, 1.51e-4, 1.23e-4, 1.00e-4, 1.03e-4),
        0.03: (1.48e-3, 8.77e-4, 6.55e-4, 5.17e-4, 4.54e-4, 3.80e-4, 2.99e-4, 3.00e-4),
    }
    for delta, vals in data.items():
        rows += _rows("table1", "transmissivity", 4, _D_GRID, delta, vals)
    return rows


def _table2():
    rows = []
    data = {
        0.0: (1.20e-6, 9.93e-6, 3.33e-5, 1.06e-4, 1.16e-4),
        0.005: (1.52e-5, 9.94e-5, 2.64e-4, 4.73e-4, 7.97e-4),
        0.008: (2.97e-5, 1.88e-4, 4.65e-4, 8.11e-4, 1.18e-2),
        0.01: (4.75e-5, 2.51e-4, 5.90e-4, 1.02e-3, 1.30e-3),
        0.02: (1.31e-4, 6.33e-4, 1.26e-3, 1.81e-3, 1.91e-3),
    }
    for delta, vals in data.items():
        rows += [
            ReferenceRow("table2", "transmissivity", d, 100, delta, v)
            for d, v in zip((4, 8, 12, 16, 20), vals)
        ]
    return rows


def _table3():
    rows = []
    data = {
        0.0: (5.90e-5, 6.28e-5, 8.31e-5, 8.69e-5, 7.50e-5, 1.02e-4, 1.57e-4, 9.52e-5),
        0.005: (3.95e-4, 3.25e-4, 2.74e-4, 2.22e-4, 2.11e-4, 2.51e-4, 1.69e-4, 1.70e-4),
        0.008: (6.24e-4, 4.75e-4, 3.48e-4, 3.45e-4, 3.27e-4, 3.67e-4, 3.84e-4, 2.98e-4),
        0.01: (1.17e-3, 5.66e-4, 5.14e-4, 5.48e-4, 3.56e-4, 3.88e-4, 3.50e-4, 3.85e-4),
        0.02: (2.11e-3, 1.71e-3, 1.15e-2, 1.39e-3, 1.02e-3, 8.63e-4, 9.25e-4, 1.03e-3),
    }
    for delta, vals in data.items():
        rows += _rows("table3", "euler-bernoulli", 4, _D_GRID, delta, vals)
    return rows


def _table4():
    rows = []
    data = {
        0.0: (5.46e-6, 4.39e-6, 4.72e-6, 5.85e-6, 5.80e-6, 4.69e-6, 5.72e-6, 6.73e-6),
        0.005: (2.23e-4, 1.05e-4, 7.88e-5, 7.52e-5, 5.50e-5, 4.50e-5, 3.64e-5, 3.65e-5),
        0.008: (6.14e-4, 3.35e-4, 2.51e-4, 1.93e-4, 1.88e-4, 1.37e-4, 1.11e-4, 1.10e-4),
        0.01: (1.19e-3, 6.63e-4, 4.85e-4, 3.77e-4, 3.30e-4, 2.74e-4, 2.20e-4, 2.13e-4),
        0.02: (1.86e-3, 1.06e-3, 7.74e-4, 6.23e-4, 5.13e-4, 4.35e-4, 3.50e-4, 3.38e-4),
    }
    for delta, vals in data.items():
        rows += _rows("table4", "volterra", 4, _D_GRID, delta, vals)
    return rows


def _table5():
    rows = []
    data = {
        0.0: (5.62e-5, 7.07e-5, 5.58e-5, 1.11e-5, 9.60e-5, 8.32e-5, 7.90e-5, 6.93e-5),
        0.005: (2.48e-4, 1.98e-4, 1.49e-4, 1.66e-4, 1.49e-4, 1.45e-4, 1.23e-4, 1.36e-4),
        0.008: (5.28e-5, 3.29e-4, 2.85e-4, 2.63e-4, 2.05e-4, 1.96e-4, 1.47e-4, 1.92e-4),
        0.01: (7.01e-4, 4.60e-4, 3.69e-4, 3.15e-4, 3.07e-4, 2.56e-4, 2.06e-4, 2.09e-4),
        0.02: (2.05e-3, 1.25e-3, 9.10e-4, 7.72e-4, 7.25e-4, 6.37e-4, 4.95e-4, 4.77e-4),
    }
    for delta, vals in data.items():
        rows += _rows("table5", "volterra", 8, _D_GRID, delta, vals)
    return rows


def _table6():
    rows = []
    data = {
        0.0: (2.50e-5, 2.74e-5, 2.68e-5, 2.94e-5, 2.83e-5, 2.66e-5, 2.16e-5),
        1e-5: (2.87e-4, 1.89e-4, 1.53e-4, 1.23e-4, 1.13e-4, 8.33e-5, 8.22e-5),
        1e-4: (5.31e-3, 4.5e-3, 3.77e-3, 3.46e-3, 3.28e-3, 2.63e-3, 2.43e-3),
        1e-3: (1.64e-2, 1.61e-2, 1.50e-2, 1.52e-2, 1.49e-2, 1.39e-2, 1.40e-2),
    }
    for delta, vals in data.items():
        rows += _rows("table6", "gravimetric", 4, _GRAV_D_GRID, delta, vals)
    return rows


def reference_table(tables=None) -> list[ReferenceRow]:
    """All transcribed reference rows, optionally filtered to specific tables."""
    rows = _table1() + _table2() + _table3() + _table4() + _table5() + _table6()
    if tables is not None:
        wanted = set(tables)
        rows = [r for r in rows if r.table in wanted]
    return rows


def reference_cell(problem: str, d: int, D: int, delta: float,
                   table: str | None = None) -> ReferenceRow:
    for row in reference_table(None if table is None else [table]):
        if (row.problem, row.d, row.D) == (problem, d, D) and abs(row.delta - delta) < 1e-15:
            return row
    raise KeyError(f"no reference cell for {(problem, d, D, delta)}")


def transcription_checksum() -> str:
    """SHA-256 over the canonical serialization of every reference row."""
    canon = "\n".join(
        f"{r.table},{r.problem},{r.d},{r.D},{r.delta!r},{r.mse!r}" for r in reference_table()
    )
    return hashlib.sha256(canon.encode()).hexdigest()
