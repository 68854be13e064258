"""Run traces: per-iteration rows, summaries, and deterministic CSV output."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Fixed column order of the trace CSV.  The first block is common to all
# solvers; the rest are solver-specific diagnostics left empty elsewhere.
COLUMNS = (
    "k", "A", "gamma", "L", "alpha", "dist_sq", "f_val", "gap_increment",
    "oracle_calls", "inner_iters",
    "A_before", "newton_iters", "phi_acc", "backtracks", "potential",
    "a1_diag", "a2_diag",
)

_INT_COLUMNS = {"k", "oracle_calls", "inner_iters", "newton_iters", "backtracks"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class StoppingRule:
    """Extra stopping criteria on top of the iteration cap.

    ``eps_rel`` stops when |v_k - x*| / |x0 - x*| drops below the threshold
    (requires a known optimum); ``grad_tol`` stops on the dual norm of the
    latest (composite) gradient.
    """

    eps_rel: float | None = None
    grad_tol: float | None = None

    def __post_init__(self):
        if self.eps_rel is not None and not (0.0 < self.eps_rel < 1.0):
            raise ValueError("eps_rel must lie in (0, 1)")


@dataclass
class RunRecord:
    """Per-iteration trace plus run summary.

    ``rows`` holds one dict per recorded iteration (initial state included),
    keyed by :data:`COLUMNS`; missing values are None.  ``points`` optionally
    keeps the per-iteration vectors (y, x, v, g) for diagnostics that need
    them; they are never serialized to CSV.
    """

    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    points: list[dict] | None = None

    def add(self, **kw):
        unknown = set(kw) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown trace columns: {sorted(unknown)}")
        self.rows.append({c: kw.get(c) for c in COLUMNS})

    def column(self, name: str, default=np.nan) -> np.ndarray:
        vals = [(default if r[name] is None else r[name]) for r in self.rows]
        return np.array(vals, dtype=float)

    @property
    def iterations(self) -> int:
        return len(self.rows) - 1

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in COLUMNS])

    @classmethod
    def read_csv(cls, path) -> "RunRecord":
        rec = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                raise ValueError(f"unexpected trace header in {path}")
            for line in reader:
                row = {}
                for c, cell in zip(COLUMNS, line):
                    if cell == "":
                        row[c] = None
                    elif c in _INT_COLUMNS:
                        row[c] = int(cell)
                    else:
                        row[c] = float(cell)
                rec.rows.append(row)
        return rec

    def write_summary(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(_jsonable(self.summary), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def iterations_to_threshold(record: RunRecord, eps_rel: float,
                            dist0_sq: float) -> int | None:
    """First recorded k with |v_k - x*| / |x0 - x*| < eps_rel, if any."""
    thr = eps_rel * eps_rel * dist0_sq
    for row in record.rows:
        d = row["dist_sq"]
        if d is not None and d < thr:
            return row["k"]
    return None
