"""Traffic splitters: round robin and weighted fair routing at packet, call and mixed granularity.

Every splitter exposes ``route_packet``, ``open_call`` and ``close_call``.
Paths are 1-based. Packet-level splitters ignore call structure and return
``None`` from ``open_call``; call-level splitters reject connectionless
packets; the mixed splitters dispatch on the packet's traffic class.
"""

from __future__ import annotations

import enum
import math
from typing import Optional, Sequence

from splitflow.core import (
    Call,
    CallClose,
    DuplicateCall,
    IncompatibleTraffic,
    Packet,
    RoutingWeightVector,
    TrafficEvent,
    U,
    UnknownCall,
)


class SplitterKind(enum.Enum):
    PGRR = "pgrr"
    CGRR = "cgrr"
    MRR = "mrr"
    PWFR = "pwfr"
    CWFR = "cwfr"
    MWFR = "mwfr"


class RrMode(enum.Enum):
    PURE_CYCLIC = "cyclic"
    WEIGHTED_COUNT = "weighted"


def tiebreak_order(weights: RoutingWeightVector) -> list[int]:
    """0-based path indices by descending weight, then ascending path id."""
    return sorted(range(weights.n), key=lambda i: (-weights.weights[i], i))


def select_max(values: Sequence[float], order: Sequence[int]) -> int:
    """0-based index of the largest value; ties go to the earliest index in ``order``."""
    best = order[0]
    best_value = values[best]
    for i in order:
        v = values[i]
        if v > best_value:
            best = i
            best_value = v
    return best


class Splitter:
    kind: SplitterKind

    def __init__(self, weights: RoutingWeightVector) -> None:
        self.weights = weights
        self.n = weights.n

    def route_packet(self, packet: Packet) -> int:
        raise NotImplementedError

    def open_call(self, call: Call) -> Optional[int]:
        return None

    def close_call(self, call_id: int) -> None:
        return None

    def handle(self, event: TrafficEvent) -> Optional[int]:
        """Feed one trace event; returns the chosen path for packet arrivals only."""
        if type(event) is Packet:
            return self.route_packet(event)
        if type(event) is Call:
            self.open_call(event)
        elif type(event) is CallClose:
            self.close_call(event.id)
        return None


class SurplusCounter:
    """Residual bookkeeping: credit every path its weighted share, pick the max, debit it.

    With ``amount`` set to packet bytes this is the packet-level WFR rule; with
    ``amount`` fixed at 1 it is weighted round robin over counts.
    """

    def __init__(self, weights: RoutingWeightVector) -> None:
        self.p = list(weights.weights)
        self.order = tiebreak_order(weights)
        self.residuals = [0.0] * weights.n

    def take(self, amount: float) -> int:
        r = self.residuals
        p = self.p
        for i in range(len(r)):
            r[i] += p[i] * amount
        j = select_max(r, self.order)
        r[j] -= amount
        return j + 1


class PwfrSplitter(Splitter):
    """Packet-by-packet weighted fair routing over byte residuals."""

    kind = SplitterKind.PWFR

    def __init__(self, weights: RoutingWeightVector) -> None:
        super().__init__(weights)
        self._surplus = SurplusCounter(weights)
        self.max_size = 0

    @property
    def residuals(self) -> list[float]:
        return self._surplus.residuals

    def route_packet(self, packet: Packet) -> int:
        if packet.size > self.max_size:
            self.max_size = packet.size
        return self._surplus.take(packet.size)


class CwfrSplitter(Splitter):
    """Call-by-call weighted fair routing over reserved bandwidth."""

    kind = SplitterKind.CWFR

    def __init__(self, weights: RoutingWeightVector) -> None:
        super().__init__(weights)
        self.reserved = [0.0] * self.n
        self.assignments: dict[int, int] = {}
        self._bandwidth: dict[int, float] = {}
        self._order = tiebreak_order(weights)
        # bandwidth deviations at the most recent open, for inspection
        self.last_deviation: list[float] = []

    def deviations(self, bandwidth: float) -> list[float]:
        # fsum keeps the total independent of path order
        total = math.fsum(self.reserved) + bandwidth
        return [p * total - w for p, w in zip(self.weights.weights, self.reserved)]

    def open_call(self, call: Call) -> int:
        if call.id in self.assignments:
            raise DuplicateCall(call.id)
        dev = self.deviations(call.bandwidth)
        j = select_max(dev, self._order)
        self.reserved[j] += call.bandwidth
        self.assignments[call.id] = j + 1
        self._bandwidth[call.id] = call.bandwidth
        self.last_deviation = dev
        return j + 1

    def close_call(self, call_id: int) -> None:
        try:
            path = self.assignments.pop(call_id)
        except KeyError:
            raise UnknownCall(call_id) from None
        q = self._bandwidth.pop(call_id)
        # clamp float residue so reservations never go negative
        self.reserved[path - 1] = max(0.0, self.reserved[path - 1] - q)
        if not self.assignments:
            self.reserved = [0.0] * self.n

    def route_packet(self, packet: Packet) -> int:
        if packet.cls is U:
            raise IncompatibleTraffic(self.kind.name, packet.cls)
        try:
            return self.assignments[packet.call_id]
        except KeyError:
            raise UnknownCall(packet.call_id) from None


class PgrrSplitter(Splitter):
    """Packet round robin; sizes never influence the choice."""

    kind = SplitterKind.PGRR

    def __init__(self, weights: RoutingWeightVector, mode: RrMode = RrMode.WEIGHTED_COUNT) -> None:
        super().__init__(weights)
        self.mode = mode
        self.cursor = self.n
        self._counts = SurplusCounter(weights)

    @property
    def count_residuals(self) -> list[float]:
        return self._counts.residuals

    def _next(self) -> int:
        if self.mode is RrMode.WEIGHTED_COUNT:
            return self._counts.take(1)
        self.cursor = 1 if self.cursor >= self.n else self.cursor + 1
        return self.cursor

    def route_packet(self, packet: Packet) -> int:
        return self._next()


class CgrrSplitter(PgrrSplitter):
    """Call round robin: counts calls, ignores their bandwidth."""

    kind = SplitterKind.CGRR

    def __init__(self, weights: RoutingWeightVector, mode: RrMode = RrMode.WEIGHTED_COUNT) -> None:
        super().__init__(weights, mode)
        self.assignments: dict[int, int] = {}

    def open_call(self, call: Call) -> int:
        if call.id in self.assignments:
            raise DuplicateCall(call.id)
        path = self._next()
        self.assignments[call.id] = path
        return path

    def close_call(self, call_id: int) -> None:
        if self.assignments.pop(call_id, None) is None:
            raise UnknownCall(call_id)

    def route_packet(self, packet: Packet) -> int:
        if packet.cls is U:
            raise IncompatibleTraffic(self.kind.name, packet.cls)
        try:
            return self.assignments[packet.call_id]
        except KeyError:
            raise UnknownCall(packet.call_id) from None


class MixedSplitter(Splitter):
    """Connectionless packets go to a packet splitter, calls and their packets to a call splitter.

    The two inner splitters keep independent state.
    """

    def __init__(self, kind: SplitterKind, packet_splitter: Splitter, call_splitter: Splitter) -> None:
        super().__init__(packet_splitter.weights)
        self.kind = kind
        self.packet_splitter = packet_splitter
        self.call_splitter = call_splitter

    def route_packet(self, packet: Packet) -> int:
        if packet.cls is U:
            return self.packet_splitter.route_packet(packet)
        return self.call_splitter.route_packet(packet)

    def open_call(self, call: Call) -> int:
        return self.call_splitter.open_call(call)

    def close_call(self, call_id: int) -> None:
        self.call_splitter.close_call(call_id)


def make_splitter(
    kind: SplitterKind | str,
    weights: RoutingWeightVector,
    rr_mode: RrMode | str | None = None,
) -> Splitter:
    kind = SplitterKind(kind.lower()) if isinstance(kind, str) else kind
    mode = RrMode(rr_mode) if rr_mode is not None else RrMode.WEIGHTED_COUNT
    if kind is SplitterKind.PWFR:
        return PwfrSplitter(weights)
    if kind is SplitterKind.CWFR:
        return CwfrSplitter(weights)
    if kind is SplitterKind.PGRR:
        return PgrrSplitter(weights, mode)
    if kind is SplitterKind.CGRR:
        return CgrrSplitter(weights, mode)
    if kind is SplitterKind.MWFR:
        return MixedSplitter(kind, PwfrSplitter(weights), CwfrSplitter(weights))
    return MixedSplitter(kind, PgrrSplitter(weights, mode), CgrrSplitter(weights, mode))


PACKET_LEVEL = frozenset({SplitterKind.PGRR, SplitterKind.PWFR})
CALL_LEVEL = frozenset({SplitterKind.CGRR, SplitterKind.CWFR})
MIXED = frozenset({SplitterKind.MRR, SplitterKind.MWFR})
WEIGHT_AWARE = frozenset({SplitterKind.PWFR, SplitterKind.CWFR, SplitterKind.MWFR})
