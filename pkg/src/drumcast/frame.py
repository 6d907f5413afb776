"""Timestamp-indexed multivariate series and its CSV format."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    DataError,
    DuplicateTimestamp,
    IrregularSampling,
    MalformedRow,
    NonMonotonicTimestamp,
    SchemaMismatch,
    UnknownVariable,
)

__all__ = ["SeriesFrame", "as_frame", "load_csv", "write_csv", "format_float"]

TIMESTAMP = "timestamp"


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """Uniformly sampled multivariate series with named variables.

    Arrays are copied on construction and marked read-only, so a frame can
    be shared between threads and never changes under a caller. Gaps are
    stored as NaN until :func:`~drumcast.preprocessing.interpolate_missing`
    fills them.
    """

    timestamps: np.ndarray
    variables: Mapping[str, np.ndarray]
    sample_period_s: int = 1
    _names: tuple = field(init=False, repr=False)

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        if ts.ndim != 1:
            raise DataError("timestamps must be one-dimensional")
        variables = {}
        for name, values in self.variables.items():
            col = _frozen(values, np.float64)
            if col.shape != ts.shape:
                raise DataError(
                    f"variable '{name}' has length {col.size}, expected {ts.size}"
                )
            variables[str(name)] = col
        if int(self.sample_period_s) < 1:
            raise DataError("sample_period_s must be a positive integer")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "sample_period_s", int(self.sample_period_s))
        object.__setattr__(self, "_names", tuple(variables))

    @classmethod
    def from_arrays(cls, columns: Mapping[str, Sequence[float]], start=0, sample_period_s=1):
        """Build a frame with timestamps ``start, start + period, ...``."""
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise DataError("all columns must have the same length")
        n = lengths.pop() if lengths else 0
        ts = start + sample_period_s * np.arange(n, dtype=np.int64)
        return cls(ts, dict(columns), sample_period_s)

    @classmethod
    def from_pandas(cls, df, sample_period_s=None):
        """Build a frame from a DataFrame with a ``timestamp`` column or integer index."""
        if TIMESTAMP in df.columns:
            ts = df[TIMESTAMP].to_numpy(dtype=np.int64)
            data = df.drop(columns=[TIMESTAMP])
        else:
            ts = np.asarray(df.index, dtype=np.int64)
            data = df
        cols = {str(c): data[c].to_numpy(dtype=np.float64) for c in data.columns}
        if sample_period_s is None:
            sample_period_s = int(ts[1] - ts[0]) if ts.size > 1 else 1
        return cls(ts, cols, sample_period_s)

    def to_pandas(self):
        import pandas as pd

        return pd.DataFrame(dict(self.variables), index=pd.Index(self.timestamps, name=TIMESTAMP))

    def __repr__(self):
        return (
            f"SeriesFrame(n={len(self)}, variables={list(self.names)}, "
            f"sample_period_s={self.sample_period_s})"
        )

    @property
    def names(self) -> tuple:
        return self._names

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __contains__(self, name) -> bool:
        return name in self.variables

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.variables[name]
        except KeyError:
            raise UnknownVariable(f"unknown variable '{name}'") from None

    def require(self, names: Iterable[str]) -> None:
        missing = [n for n in names if n not in self.variables]
        if missing:
            raise UnknownVariable(f"unknown variable(s): {', '.join(missing)}")

    def to_array(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Stack the named columns into an ``(n_samples, n_vars)`` array."""
        names = self.names if names is None else list(names)
        self.require(names)
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self.variables[n] for n in names])

    def with_variables(self, variables: Mapping[str, np.ndarray]) -> "SeriesFrame":
        return SeriesFrame(self.timestamps, variables, self.sample_period_s)

    def select(self, names: Sequence[str]) -> "SeriesFrame":
        self.require(names)
        return self.with_variables({n: self.variables[n] for n in names})

    def slice(self, start: int | None = None, stop: int | None = None) -> "SeriesFrame":
        sl = slice(start, stop)
        return SeriesFrame(
            self.timestamps[sl],
            {n: v[sl] for n, v in self.variables.items()},
            self.sample_period_s,
        )

    def gap_mask(self) -> dict:
        return {n: np.isnan(v) for n, v in self.variables.items()}

    def has_gaps(self) -> bool:
        return any(np.isnan(v).any() for v in self.variables.values())

    def validate(self) -> "SeriesFrame":
        """Check timestamp spacing; returns ``self`` so calls can chain."""
        _check_timestamps(self.timestamps, self.sample_period_s)
        return self

    def equals(self, other: "SeriesFrame") -> bool:
        """Bitwise equality (NaN gaps compare equal)."""
        if self.names != other.names or self.sample_period_s != other.sample_period_s:
            return False
        if not np.array_equal(self.timestamps, other.timestamps):
            return False
        return all(
            np.array_equal(self.variables[n], other.variables[n], equal_nan=True)
            for n in self.names
        )

    @staticmethod
    def concat(frames: Sequence["SeriesFrame"]) -> "SeriesFrame":
        first = frames[0]
        ts = np.concatenate([f.timestamps for f in frames])
        cols = {n: np.concatenate([f.variables[n] for f in frames]) for n in first.names}
        return SeriesFrame(ts, cols, first.sample_period_s)


def as_frame(data) -> SeriesFrame:
    """Coerce a SeriesFrame, pandas DataFrame or mapping of columns to a SeriesFrame."""
    if isinstance(data, SeriesFrame):
        return data
    if hasattr(data, "columns") and hasattr(data, "to_numpy"):
        return SeriesFrame.from_pandas(data)
    if isinstance(data, Mapping):
        return SeriesFrame.from_arrays(data)
    raise TypeError(f"cannot interpret {type(data).__name__} as a SeriesFrame")


def _check_timestamps(ts: np.ndarray, period: int | None) -> int:
    if ts.size < 2:
        return period or 1
    step = np.diff(ts)
    bad = np.flatnonzero(step == 0)
    if bad.size:
        raise DuplicateTimestamp(f"duplicate timestamp {ts[bad[0]]} at row {bad[0] + 1}")
    bad = np.flatnonzero(step < 0)
    if bad.size:
        i = bad[0] + 1
        raise NonMonotonicTimestamp(f"timestamp {ts[i]} at row {i} follows {ts[i - 1]}")
    period = int(step[0]) if period is None else period
    bad = np.flatnonzero(step != period)
    if bad.size:
        i = bad[0] + 1
        raise IrregularSampling(
            f"timestamp step {step[bad[0]]} at row {i} differs from sample period {period}"
        )
    return period


def load_csv(path, schema: Sequence[str] | None = None) -> SeriesFrame:
    """Read a frame from CSV.

    The first column must be ``timestamp`` (integer seconds). Empty cells are
    gaps and come back as NaN; anything else that does not parse as a finite
    float raises :class:`MalformedRow`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        return _read_csv(fh, schema, str(path))


def _read_csv(fh, schema, source) -> SeriesFrame:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedRow(f"{source}: empty file") from None
    if not header or header[0] != TIMESTAMP:
        raise SchemaMismatch(f"{source}: first column must be '{TIMESTAMP}'")
    names = header[1:]
    if len(set(names)) != len(names):
        raise SchemaMismatch(f"{source}: duplicate column names")
    if schema and list(schema) != names:
        raise SchemaMismatch(f"{source}: columns {names} do not match expected {list(schema)}")

    ts = []
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(f"{source}:{lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            ts.append(int(row[0]))
        except ValueError:
            raise MalformedRow(f"{source}:{lineno}: bad timestamp {row[0]!r}") from None
        values = []
        for name, cell in zip(names, row[1:]):
            cell = cell.strip()
            if cell == "":
                values.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise MalformedRow(f"{source}:{lineno}: non-numeric {name}={cell!r}") from None
            if not math.isfinite(v):
                raise MalformedRow(f"{source}:{lineno}: non-finite {name}={cell!r}")
            values.append(v)
        rows.append(values)

    ts = np.asarray(ts, dtype=np.int64)
    period = _check_timestamps(ts, None)
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
    return SeriesFrame(ts, {n: data[:, j] for j, n in enumerate(names)}, period)


def format_float(v: float) -> str:
    """17 significant digits: parsing the text gives back the same double."""
    if math.isnan(v):
        return ""
    return format(v, ".17g")


def write_csv(frame: SeriesFrame, path=None) -> str:
    """Write ``frame`` as CSV (LF line endings); returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([TIMESTAMP, *frame.names])
    cols = [frame.variables[n] for n in frame.names]
    for i, t in enumerate(frame.timestamps.tolist()):
        writer.writerow([t, *(format_float(c[i]) for c in cols)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
