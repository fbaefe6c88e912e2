"""Per-iteration solver diagnostics.

A Trace is the sink contract the solver runners write into and the bench
harness persists: one row per outer iteration plus a flat metadata map.
Absent quantities (for example the angle at the first iteration, or
distances when no reference solution exists) are stored as None and must
never be serialized as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass
class TraceRow:
    k: int
    norm_v: float
    cos_theta: Optional[float]
    dist_z: Optional[float]
    dist_x: Optional[float]
    objective: Optional[float]
    extrapolated: bool
    ms: float


class Trace:
    """Append-only iteration log with run metadata."""

    def __init__(self, meta=None):
        self.rows: list[TraceRow] = []
        self.meta: dict[str, str] = dict(meta or {})
        # applied acceleration increments ||a_k * E_k||, not persisted to CSV
        self.applied_increments: list[float] = []

    def append(self, row):
        if self.rows and row.k <= self.rows[-1].k:
            raise ValueError("iteration counter must be strictly increasing")
        self.rows.append(row)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return self.rows == other.rows and self.meta == other.meta

    def iterations_to(self, name, threshold):
        """First k whose column value is <= threshold, or None."""
        for r in self.rows:
            val = getattr(r, name)
            if val is not None and val <= threshold:
                return r.k
        return None
