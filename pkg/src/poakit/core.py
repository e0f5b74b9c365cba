"""Domain types and segment algebra shared by the whole toolkit.

Index convention: everything in memory is 0-based and inclusive: a
:class:`Segment` with ``start=3, length=2`` covers indices {3, 4}. File
readers/writers translate to 1-based indices when asked (see ``poakit.io``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract."""


class DataFormatError(ValidationError):
    """Raised when a file's content does not match its declared format."""


class NumericError(ArithmeticError):
    """Raised when a computation produces non-finite values."""


@dataclass(frozen=True)
class TimeSeries:
    """Multivariate series: ``values`` is a T x c matrix, one row per step.

    Timestamps must increase with unit step; they may start anywhere, but
    window origins and segment indices are always row positions (0-based).
    """

    timestamps: np.ndarray
    values: np.ndarray
    variable_names: tuple[str, ...] | None = None

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValidationError(f"values must be 2-D (T x c), got shape {vals.shape}")
        if vals.shape[0] < 1:
            raise ValidationError("series must contain at least one row")
        if ts.shape != (vals.shape[0],):
            raise ValidationError(
                f"timestamps length {ts.shape} does not match {vals.shape[0]} rows"
            )
        if ts.shape[0] > 1 and not np.all(np.diff(ts) == 1):
            raise ValidationError("timestamps must be strictly increasing with unit step")
        if not np.all(np.isfinite(vals)):
            bad = int(np.argwhere(~np.isfinite(vals))[0][0])
            raise ValidationError(f"non-finite value in row {bad}")
        if self.variable_names is not None and len(self.variable_names) != vals.shape[1]:
            raise ValidationError(
                f"{len(self.variable_names)} variable names for {vals.shape[1]} variables"
            )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        self.timestamps.setflags(write=False)
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelSequence:
    """Per-instance anomaly flags (0/1), positionally aligned to a series."""

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=np.int8)
        if flags.ndim != 1:
            raise ValidationError("label flags must be 1-D")
        if not np.all((flags == 0) | (flags == 1)):
            raise ValidationError("label flags must be 0 or 1")
        object.__setattr__(self, "flags", flags)
        self.flags.setflags(write=False)

    def __len__(self) -> int:
        return self.flags.shape[0]


@dataclass(frozen=True, order=True)
class Segment:
    """Run of consecutive indices [start, start + length - 1], inclusive."""

    start: int
    length: int

    def __post_init__(self):
        if self.start < 0:
            raise ValidationError(f"segment start must be >= 0, got {self.start}")
        if self.length < 1:
            raise ValidationError(f"segment length must be >= 1, got {self.length}")

    @property
    def end(self) -> int:
        """Last covered index (inclusive)."""
        return self.start + self.length - 1

    def indices(self) -> range:
        return range(self.start, self.start + self.length)

    def overlap_len(self, other: "Segment | None") -> int:
        """Number of indices covered by both segments."""
        if other is None:
            return 0
        return max(0, min(self.end, other.end) - max(self.start, other.start) + 1)


def _check_disjoint_sorted(segments: list[Segment], name: str) -> None:
    for prev, cur in zip(segments, segments[1:]):
        if cur.start <= prev.end:
            raise ValidationError(
                f"{name} segments must be disjoint and sorted by start: "
                f"{prev} followed by {cur}"
            )


@dataclass(frozen=True)
class SegmentSet:
    """Ground-truth anomalies with the prediction/precursor/ambiguous structure.

    ``precursors[i]`` is the early-warning run directly preceding
    ``predictions[i]`` (None = no precursor). ``ambiguous[i]`` is the
    tolerated trailing window after ``anomalies[i]`` (None = empty), at most
    ``delta`` long and truncated at the series end or the next anomaly.
    """

    anomalies: tuple[Segment, ...]
    predictions: tuple[Segment, ...]
    precursors: tuple[Segment | None, ...]
    ambiguous: tuple[Segment | None, ...]
    delta: int

    def __post_init__(self):
        object.__setattr__(self, "anomalies", tuple(self.anomalies))
        object.__setattr__(self, "predictions", tuple(self.predictions))
        object.__setattr__(self, "precursors", tuple(self.precursors))
        object.__setattr__(self, "ambiguous", tuple(self.ambiguous))
        if self.delta < 0:
            raise ValidationError("delta must be >= 0")
        _check_disjoint_sorted(list(self.anomalies), "anomaly")
        _check_disjoint_sorted(list(self.predictions), "prediction")
        if len(self.precursors) != len(self.predictions):
            raise ValidationError("need one precursor slot per prediction")
        if len(self.ambiguous) != len(self.anomalies):
            raise ValidationError("need one ambiguous slot per anomaly")
        for p, pp in zip(self.predictions, self.precursors):
            if pp is not None and pp.end != p.start - 1:
                raise ValidationError(
                    f"precursor {pp} must end exactly at prediction start-1 ({p})"
                )
        for a, amb in zip(self.anomalies, self.ambiguous):
            if amb is None:
                continue
            if amb.start != a.end + 1:
                raise ValidationError(
                    f"ambiguous window {amb} must start at anomaly end+1 ({a})"
                )
            if amb.length > self.delta:
                raise ValidationError(
                    f"ambiguous window {amb} longer than delta={self.delta}"
                )


@dataclass(frozen=True)
class ScoreSeries:
    """Per-timestamp precursor scores; NaN marks timestamps never scored.

    ``lead_times[t]`` is the number of steps between the emitting window's
    origin and t (NaN wherever the score is missing).
    """

    scores: np.ndarray
    lead_times: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        leads = np.asarray(self.lead_times, dtype=np.float64)
        if scores.ndim != 1 or leads.shape != scores.shape:
            raise ValidationError("scores and lead_times must be 1-D and equal length")
        defined = ~np.isnan(scores)
        if np.any(np.isnan(leads[defined])) or np.any(~np.isnan(leads[~defined])):
            raise ValidationError("lead_time must be defined exactly where score is")
        if np.any(np.isinf(scores)):
            raise ValidationError("defined scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "lead_times", leads)
        self.scores.setflags(write=False)
        self.lead_times.setflags(write=False)

    def __len__(self) -> int:
        return self.scores.shape[0]

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.scores)


def segments_from_flags(flags) -> list[Segment]:
    """Maximal runs of 1s in a binary sequence, as sorted disjoint segments."""
    arr = np.asarray(flags, dtype=np.int8)
    if arr.ndim != 1:
        raise ValidationError("flags must be 1-D")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError("flags must be 0 or 1")
    if arr.size == 0:
        return []
    padded = np.concatenate(([0], arr, [0]))
    diff = np.diff(padded)
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1)  # exclusive
    return [Segment(int(s), int(e - s)) for s, e in zip(starts, ends)]


def flags_from_segments(segments: list[Segment], length: int) -> np.ndarray:
    """Inverse of :func:`segments_from_flags` for disjoint sorted segments."""
    flags = np.zeros(length, dtype=np.int8)
    for seg in segments:
        if seg.end >= length:
            raise ValidationError(f"segment {seg} exceeds sequence length {length}")
        flags[seg.start : seg.end + 1] = 1
    return flags


def ambiguous_extensions(
    anomalies: list[Segment], delta: int, series_len: int
) -> list[Segment | None]:
    """Trailing tolerated window after each anomaly, None where it is empty.

    Each window starts right after its anomaly and runs for at most ``delta``
    steps, truncated at the series end and at the next anomaly's start (an
    instance inside a later true anomaly must not count as ambiguous trailing
    of an earlier one).
    """
    if delta < 0:
        raise ValidationError("delta must be >= 0")
    _check_disjoint_sorted(anomalies, "anomaly")
    out: list[Segment | None] = []
    for idx, a in enumerate(anomalies):
        limit = series_len - 1 - a.end
        if idx + 1 < len(anomalies):
            limit = min(limit, anomalies[idx + 1].start - a.end - 1)
        length = max(0, min(delta, limit))
        out.append(Segment(a.end + 1, length) if length > 0 else None)
    return out
