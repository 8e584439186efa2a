"""Domain types shared by the splitters, traffic generator, metric and harness."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

SUM_TOLERANCE = 1e-9


class SplitflowError(Exception):
    """Base class for every error raised by this package."""


class WeightError(SplitflowError, ValueError):
    pass


class EmptyVector(WeightError):
    def __init__(self) -> None:
        super().__init__("weight vector is empty")


class NegativeWeight(WeightError):
    def __init__(self, index: int, value: float) -> None:
        self.index = index
        self.value = value
        super().__init__(f"weight {index} is negative: {value!r}")


class SumNotOne(WeightError):
    def __init__(self, actual_sum: float) -> None:
        self.actual_sum = actual_sum
        super().__init__(f"weights sum to {actual_sum!r}, expected 1")


class AllZero(WeightError):
    def __init__(self) -> None:
        super().__init__("cannot normalize an all-zero weight vector")


class DuplicateCall(SplitflowError):
    def __init__(self, call_id: int) -> None:
        self.call_id = call_id
        super().__init__(f"call {call_id} is already open")


class UnknownCall(SplitflowError):
    def __init__(self, call_id: Optional[int]) -> None:
        self.call_id = call_id
        super().__init__(f"call {call_id} is not open")


class IncompatibleTraffic(SplitflowError):
    def __init__(self, algorithm: str, traffic_class: "TrafficClass") -> None:
        self.algorithm = algorithm
        self.traffic_class = traffic_class
        super().__init__(f"{algorithm} cannot route {traffic_class.name} packets")


class PathOutOfRange(SplitflowError):
    def __init__(self, path: int, n: int) -> None:
        super().__init__(f"path {path} outside 1..{n}")


class MalformedTrace(SplitflowError):
    def __init__(self, index: int, reason: str) -> None:
        self.index = index
        self.reason = reason
        super().__init__(f"event {index}: {reason}")


class TrafficClass(enum.Enum):
    CONNECTIONLESS = "U"
    CONNECTION_ORIENTED = "T"


U = TrafficClass.CONNECTIONLESS
T = TrafficClass.CONNECTION_ORIENTED


@dataclass(frozen=True)
class RoutingWeightVector:
    """Target share of load per path, ``weights[i - 1]`` for path ``i``."""

    weights: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.weights)

    def __getitem__(self, path: int) -> float:
        if not 1 <= path <= self.n:
            raise PathOutOfRange(path, self.n)
        return self.weights[path - 1]

    def __iter__(self):
        return iter(self.weights)

    def __len__(self) -> int:
        return self.n

    def permuted(self, order: Sequence[int]) -> "RoutingWeightVector":
        """New vector whose path ``k`` carries the weight of old path ``order[k-1]``."""
        return RoutingWeightVector(tuple(self.weights[i - 1] for i in order))


def _check_entries(raw: Sequence[float]) -> list[float]:
    values = [float(x) for x in raw]
    if not values:
        raise EmptyVector()
    for i, x in enumerate(values, start=1):
        if math.isnan(x) or x < 0:
            raise NegativeWeight(i, x)
    return values


def validate_weights(raw: Iterable[float]) -> RoutingWeightVector:
    """Accept ``raw`` as a routing weight vector if it is nonnegative and sums to 1.

    The stored weights are rescaled by their float sum so that residual
    bookkeeping does not drift by the (tolerated) config round-off.
    """
    values = _check_entries(list(raw))
    total = math.fsum(values)
    if not abs(total - 1.0) <= SUM_TOLERANCE:
        raise SumNotOne(total)
    return RoutingWeightVector(tuple(x / total for x in values))


def normalize_weights(raw: Iterable[float]) -> RoutingWeightVector:
    values = _check_entries(list(raw))
    total = math.fsum(values)
    if total <= 0:
        raise AllZero()
    return validate_weights([x / total for x in values])


@dataclass(frozen=True, slots=True)
class Packet:
    seq: int
    size: int
    cls: TrafficClass
    call_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"packet {self.seq}: size must be >= 1, got {self.size}")
        if (self.cls is T) != (self.call_id is not None):
            raise ValueError(
                f"packet {self.seq}: call_id must be set iff the packet is connection oriented"
            )


@dataclass(frozen=True, slots=True)
class Call:
    """A connection; its appearance in a trace is the call-open event."""

    id: int
    bandwidth: float

    def __post_init__(self) -> None:
        if not self.bandwidth > 0:
            raise ValueError(f"call {self.id}: bandwidth must be > 0, got {self.bandwidth}")


@dataclass(frozen=True, slots=True)
class CallClose:
    id: int


TrafficEvent = Union[Packet, Call, CallClose]


@dataclass(frozen=True)
class Trace:
    events: tuple[TrafficEvent, ...]
    n_paths_hint: Optional[int] = None

    @property
    def packets(self) -> list[Packet]:
        return [e for e in self.events if type(e) is Packet]

    def total_bytes(self) -> int:
        return sum(p.size for p in self.packets)


def validate_trace(trace: Trace) -> Trace:
    """Check event ordering in one forward pass; returns the trace unchanged."""
    open_calls: set[int] = set()
    seen: set[int] = set()
    last_seq: Optional[int] = None
    for index, ev in enumerate(trace.events):
        if type(ev) is Packet:
            if last_seq is not None and ev.seq <= last_seq:
                raise MalformedTrace(index, f"packet seq {ev.seq} does not increase")
            last_seq = ev.seq
            if ev.cls is T and ev.call_id not in open_calls:
                raise MalformedTrace(index, f"packet {ev.seq} for call {ev.call_id} outside its call")
        elif type(ev) is Call:
            if ev.id in seen:
                raise MalformedTrace(index, f"call {ev.id} opened twice")
            seen.add(ev.id)
            open_calls.add(ev.id)
        elif type(ev) is CallClose:
            if ev.id not in open_calls:
                raise MalformedTrace(index, f"close of call {ev.id} that is not open")
            open_calls.remove(ev.id)
        else:
            raise MalformedTrace(index, f"unknown event {ev!r}")
    return trace
