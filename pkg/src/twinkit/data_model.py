"""Synchronized sample store and the time-indexed data API.

Every observable of the plant at time t is one float in a fixed-width
signal vector.  The store keeps only complete, strictly time-ordered
samples; queries between samples interpolate linearly per entry.
Partial vectors (with missing entries) exist only at the prediction API
boundary and are represented as NaN entries there.

Concurrency: one writer at a time (``ingest`` holds an internal lock),
any number of concurrent readers; readers bind the sample list once per
call and therefore see a consistent snapshot.
"""

from __future__ import annotations

import math
import threading
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyStore,
    IndexOutOfRange,
    NonMonotonicTime,
    SchemaMismatch,
    TimeOutOfRange,
)

#: Two timestamps closer than this are the same instant.
TIME_EPS = 1e-9

#: Floats are written with 17 significant digits so CSV round-trips bitwise.
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class SignalSpec:
    """One named entry of the signal vector."""

    index: int
    name: str
    unit: str = ""


class SignalSchema:
    """Ordered, gap-free list of signal definitions.

    Indices run 0..n-1 and names are unique; the schema fixes the width
    and column order of every vector, sample and CSV handled by the twin.
    """

    def __init__(self, signals: Sequence[SignalSpec]):
        signals = tuple(signals)
        if [s.index for s in signals] != list(range(len(signals))):
            raise SchemaMismatch("signal indices must be 0..n-1 without gaps")
        names = [s.name for s in signals]
        if len(set(names)) != len(names):
            raise SchemaMismatch("signal names must be unique")
        self.signals = signals
        self.names = names
        self._index = {s.name: s.index for s in signals}

    @classmethod
    def from_names(cls, names: Iterable[str], units: Iterable[str] | None = None) -> "SignalSchema":
        names = list(names)
        units = list(units) if units is not None else [""] * len(names)
        return cls([SignalSpec(i, n, u) for i, (n, u) in enumerate(zip(names, units))])

    def __len__(self) -> int:
        return len(self.signals)

    def __eq__(self, other) -> bool:
        return isinstance(other, SignalSchema) and self.names == other.names

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaMismatch(f"unknown signal name {name!r}") from None

    def validate_vector(self, x, allow_missing: bool = False) -> np.ndarray:
        """Coerce ``x`` to a float vector of schema width.

        NaN marks a missing entry and is only legal when
        ``allow_missing``; infinities are never legal.
        """
        arr = np.asarray(x, dtype=float)
        if arr.shape != (len(self),):
            raise SchemaMismatch(
                f"expected vector of length {len(self)}, got shape {arr.shape}"
            )
        if np.isinf(arr).any():
            raise SchemaMismatch("signal values must be finite")
        if not allow_missing and np.isnan(arr).any():
            raise SchemaMismatch("vector has missing entries")
        return arr


@dataclass(frozen=True)
class Sample:
    """A fully populated observation at one instant."""

    at: float
    x: np.ndarray

    def __post_init__(self):
        if not math.isfinite(self.at) or self.at < 0.0:
            raise NonMonotonicTime(f"timestamp must be finite and >= 0, got {self.at}")


def is_missing(x) -> np.ndarray:
    """Boolean mask of the missing (NaN) entries of a partial vector."""
    return np.isnan(np.asarray(x, dtype=float))


class DataStore:
    """Time-ordered store of complete samples with interpolating reads."""

    def __init__(self, schema: SignalSchema):
        self.schema = schema
        self._t: list[float] = []
        self._x: list[np.ndarray] = []
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._t)

    # --- writing ---

    def ingest(self, sample: Sample) -> None:
        """Append one sample; its timestamp must strictly advance the store."""
        x = self.schema.validate_vector(sample.x)
        with self._write_lock:
            if self._t and sample.at <= self._t[-1]:
                raise NonMonotonicTime(
                    f"t={sample.at} does not advance past last t={self._t[-1]}"
                )
            self._t.append(float(sample.at))
            self._x.append(x.copy())

    def extend(self, samples: Iterable[Sample]) -> None:
        for s in samples:
            self.ingest(s)

    # --- reading ---

    def samples(self) -> list[Sample]:
        t, x = self._snapshot()
        return [Sample(ti, xi.copy()) for ti, xi in zip(t, x)]

    def time_range(self) -> tuple[float, float]:
        """(first, last) stored timestamp."""
        t, _ = self._snapshot()
        if not t:
            raise EmptyStore("store holds no samples")
        return (t[0], t[-1])

    def get_data(self, t: float) -> np.ndarray:
        """All signals at time t.

        Returns the stored vector when t hits a sample within
        ``TIME_EPS``, otherwise the entrywise linear interpolation of the
        two neighboring samples.  t outside the recorded range is an
        error; extrapolation is deliberately not offered here.
        """
        ts, xs = self._snapshot()
        if not ts:
            raise EmptyStore("store holds no samples")
        if t < ts[0] - TIME_EPS or t > ts[-1] + TIME_EPS:
            raise TimeOutOfRange(f"t={t} outside [{ts[0]}, {ts[-1]}]")
        i = bisect_left(ts, t)
        if i < len(ts) and abs(ts[i] - t) <= TIME_EPS:
            return xs[i].copy()
        if i > 0 and abs(ts[i - 1] - t) <= TIME_EPS:
            return xs[i - 1].copy()
        lo, hi = i - 1, i
        w = (t - ts[lo]) / (ts[hi] - ts[lo])
        return (1.0 - w) * xs[lo] + w * xs[hi]

    def get_signal(self, i: int, t: float) -> float:
        """Signal i at time t; equal to ``get_data(t)[i]`` by construction."""
        if not 0 <= i < len(self.schema):
            raise IndexOutOfRange(f"signal index {i} outside 0..{len(self.schema) - 1}")
        return float(self.get_data(t)[i])

    def matrix(self) -> np.ndarray:
        """(N, n) array of all stored vectors in time order."""
        _, xs = self._snapshot()
        if not xs:
            return np.empty((0, len(self.schema)))
        return np.stack(xs)

    def times(self) -> np.ndarray:
        t, _ = self._snapshot()
        return np.asarray(t, dtype=float)

    def _snapshot(self) -> tuple[list[float], list[np.ndarray]]:
        # Bind both lists once; appends by a concurrent writer extend new
        # list tails and never mutate the prefix a reader iterates.
        t = self._t
        x = self._x
        n = min(len(t), len(x))
        return t[:n], x[:n]

    # --- CSV persistence ---

    def save_csv(self, path) -> None:
        """Write ``t`` plus one column per signal, 17 significant digits."""
        t, xs = self._snapshot()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(["t"] + self.schema.names) + "\n")
            for ti, xi in zip(t, xs):
                row = [FLOAT_FMT % ti] + [FLOAT_FMT % v for v in xi]
                fh.write(",".join(row) + "\n")

    @classmethod
    def load_csv(cls, path, schema: SignalSchema | None = None) -> "DataStore":
        """Load a store written by :meth:`save_csv`.

        When ``schema`` is given the file header must match it exactly.
        """
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            cols = header.split(",") if header else []
            if not cols or cols[0] != "t":
                raise SchemaMismatch(f"{path}: first CSV column must be 't'")
            file_schema = SignalSchema.from_names(cols[1:])
            if schema is not None:
                if schema.names != file_schema.names:
                    raise SchemaMismatch(
                        f"{path}: CSV columns {file_schema.names} do not match schema {schema.names}"
                    )
                file_schema = schema
            store = cls(file_schema)
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != len(cols):
                    raise SchemaMismatch(
                        f"{path}:{lineno}: expected {len(cols)} fields, got {len(parts)}"
                    )
                values = [float(p) for p in parts]
                store.ingest(Sample(values[0], np.array(values[1:])))
        return store
