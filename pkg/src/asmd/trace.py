"""Per-stage solver records and their CSV serialisation."""

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

GAP_FLOOR = 1e-16
CSV_COLUMNS = ("stage_or_iter", "grads_over_n", "objective", "gap", "wall_ms", "max_z_norm")


@dataclass
class TraceRecord:
    stage: int
    gradients: int
    objective: float
    gap: Optional[float] = None
    wall_ms: float = 0.0
    max_z_norm: float = math.nan
    # nonsmooth objective for smoothed problems, when it differs from ``objective``
    original_objective: Optional[float] = None


@dataclass
class SolverTrace:
    solver: str
    n: int
    records: list = field(default_factory=list)
    final_point: Optional[np.ndarray] = None
    reference_value: Optional[float] = None
    iterates: Optional[list] = None
    stage_points: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, stage, gradients, objective, wall_ms=0.0, max_z_norm=math.nan, original_objective=None):
        gap = None
        if self.reference_value is not None:
            gap = max(objective - self.reference_value, GAP_FLOOR)
        rec = TraceRecord(stage, gradients, objective, gap, wall_ms, max_z_norm, original_objective)
        self.records.append(rec)
        return rec

    def __len__(self):
        return len(self.records)

    @property
    def stages(self):
        return np.array([r.stage for r in self.records])

    @property
    def gradients(self):
        return np.array([r.gradients for r in self.records])

    @property
    def grads_over_n(self):
        return self.gradients / self.n

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    @property
    def gaps(self):
        return np.array([math.nan if r.gap is None else r.gap for r in self.records])

    def gradients_to_reach(self, gap):
        """Gradient count at the first record whose gap is at most ``gap`` (``None`` if never)."""
        for r in self.records:
            if r.gap is not None and r.gap <= gap:
                return r.gradients
        return None

    def to_csv(self, timing=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([
                r.stage,
                repr(r.gradients / self.n),
                repr(float(r.objective)),
                "" if r.gap is None else repr(float(r.gap)),
                repr(round(r.wall_ms, 3)) if timing else "0",
                repr(float(r.max_z_norm)),
            ])
        return buf.getvalue()


def read_trace_csv(path):
    """Load a trace CSV into a dict of numpy columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    missing = set(CSV_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    out = {}
    for col in CSV_COLUMNS:
        out[col] = np.array([float(r[col]) if r[col] != "" else math.nan for r in rows])
    return out
