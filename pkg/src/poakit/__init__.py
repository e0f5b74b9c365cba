"""Precursor-of-anomaly detection and segment-aware evaluation toolkit."""

from poakit.core import (
    DataFormatError,
    LabelSequence,
    NumericError,
    ScoreSeries,
    Segment,
    SegmentSet,
    TimeSeries,
    ValidationError,
    ambiguous_extensions,
    flags_from_segments,
    segments_from_flags,
)

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "LabelSequence",
    "NumericError",
    "ScoreSeries",
    "Segment",
    "SegmentSet",
    "TimeSeries",
    "ValidationError",
    "ambiguous_extensions",
    "flags_from_segments",
    "segments_from_flags",
    "__version__",
]
