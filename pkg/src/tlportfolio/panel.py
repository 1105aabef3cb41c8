"""
Excess-return panels: one target market plus any number of source markets.

Datasets may have different lengths. They are aligned positionally from the
tail, so the last ``n_tilde`` rows of every dataset share the same calendar
periods. Aligned time indices run from ``-(N_m - n_tilde - 1)`` up to
``n_tilde`` for a dataset with ``N_m`` rows; time 1 is the first period that
every dataset covers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ReturnMatrix:
    """Time-ascending excess returns of ``d`` assets, one row per period."""

    label: str
    values: np.ndarray
    timestamps: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] < 1:
            raise InputError(f"{self.label}: returns must be a 2-D array with at least one column")
        if values.shape[0] < 2:
            raise InputError(f"{self.label}: need at least 2 rows, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise InputError(f"{self.label}: returns contain non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            stamps = tuple(str(s) for s in self.timestamps)
            if len(stamps) != values.shape[0]:
                raise InputError(f"{self.label}: {len(stamps)} timestamps for {values.shape[0]} rows")
            object.__setattr__(self, "timestamps", stamps)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def head(self, n: int) -> "ReturnMatrix":
        """First ``n`` rows (used to truncate history in walk-forward runs)."""
        stamps = None if self.timestamps is None else self.timestamps[:n]
        return ReturnMatrix(self.label, self.values[:n], stamps)


@dataclass(frozen=True)
class RiskFreeSeries:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise InputError("risk-free series contains non-finite entries")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class AlignedPanel:
    """Target (index 0) and sources (indices 1..M) sharing ``d`` assets."""

    target: ReturnMatrix
    sources: tuple[ReturnMatrix, ...] = field(default_factory=tuple)

    def __post_init__(self):
        sources = tuple(self.sources)
        object.__setattr__(self, "sources", sources)
        dims = {self.target.d} | {s.d for s in sources}
        if len(dims) != 1:
            labels = ", ".join(f"{m.label}={m.d}" for m in self.datasets)
            raise InputError(f"datasets disagree on asset count: {labels}")

    @property
    def datasets(self) -> tuple[ReturnMatrix, ...]:
        return (self.target,) + tuple(self.sources)

    @property
    def M(self) -> int:
        return len(self.sources)

    @property
    def d(self) -> int:
        return self.target.d

    @property
    def n_tilde(self) -> int:
        return min(m.n_rows for m in self.datasets)

    def truncate(self, t: int) -> "AlignedPanel":
        """Keep only periods strictly before aligned time ``t`` in every dataset."""
        nt = self.n_tilde
        keep = [m.n_rows - nt + t - 1 for m in self.datasets]
        if t > nt + 1 or min(keep) < 2:
            raise InputError(f"cannot truncate before time {t} (n_tilde={nt})")
        cut = [m.head(n) for m, n in zip(self.datasets, keep)]
        return AlignedPanel(cut[0], tuple(cut[1:]))


def aligned_time_to_index(t: int, n_rows: int, n_tilde: int) -> int:
    """0-based row index of aligned time ``t`` in a dataset with ``n_rows`` rows."""
    lo, hi = -(n_rows - n_tilde - 1), n_tilde
    if not lo <= t <= hi:
        raise InputError(f"aligned time {t} outside [{lo}, {hi}]")
    return t + n_rows - n_tilde - 1


def index_to_aligned_time(p: int, n_rows: int, n_tilde: int) -> int:
    if not 0 <= p < n_rows:
        raise InputError(f"row index {p} outside [0, {n_rows})")
    return p - n_rows + n_tilde + 1


def align_panel(target: ReturnMatrix, sources: Sequence[ReturnMatrix] = ()) -> AlignedPanel:
    return AlignedPanel(target, tuple(sources))


def to_excess(returns: ReturnMatrix, rf: RiskFreeSeries) -> ReturnMatrix:
    """Subtract a per-period risk-free rate from every asset."""
    if rf.values.shape[0] != returns.n_rows:
        raise InputError(f"risk-free length {rf.values.shape[0]} != {returns.n_rows} return rows")
    return ReturnMatrix(returns.label, returns.values - rf.values[:, None], returns.timestamps)


def load_returns_csv(path, has_header: bool = True, label: Optional[str] = None) -> ReturnMatrix:
    """
    Read a return file.

    The file is plain CSV, one period per row in ascending time. When the header's
    first field is ``date`` that column is kept as timestamps; all remaining
    columns are asset returns. Missing or non-numeric cells are rejected.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    has_date = False
    if has_header:
        if not rows:
            raise InputError(f"{path}: empty file")
        header, rows = rows[0], rows[1:]
        has_date = header[0].strip().lower() == "date"
    if len(rows) < 2:
        raise InputError(f"{path}: need at least 2 data rows, got {len(rows)}")

    width = len(rows[0])
    stamps, data = [], []
    for lineno, row in enumerate(rows, start=2 if has_header else 1):
        if len(row) != width:
            raise InputError(f"{path}:{lineno}: ragged row ({len(row)} fields, expected {width})")
        if has_date:
            stamps.append(row[0].strip())
            row = row[1:]
        try:
            data.append([float(c) for c in row])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
    if not data[0]:
        raise InputError(f"{path}: no asset columns")
    return ReturnMatrix(label or path.stem, np.array(data), tuple(stamps) if has_date else None)
