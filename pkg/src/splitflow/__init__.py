"""Deterministic multipath traffic splitting: weighted fair routing vs round robin."""

from splitflow.core import (
    Call,
    CallClose,
    Packet,
    RoutingWeightVector,
    Trace,
    TrafficClass,
    normalize_weights,
    validate_trace,
    validate_weights,
)
from splitflow.metrics import DeviationAccumulator
from splitflow.splitters import SplitterKind, make_splitter

__all__ = [
    "Call",
    "CallClose",
    "DeviationAccumulator",
    "Packet",
    "RoutingWeightVector",
    "SplitterKind",
    "Trace",
    "TrafficClass",
    "make_splitter",
    "normalize_weights",
    "validate_trace",
    "validate_weights",
]
