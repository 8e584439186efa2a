"""Seeded synthetic traces for connectionless, connection-oriented and mixed traffic.

Randomness comes from numpy's PCG64 bit generator, consumed only through its
raw 64-bit outputs; every derived sample (uniform integers, exponentials,
shuffles) is computed here, so a seed maps to the same trace on any platform
and numpy release that keeps PCG64's stream.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np

from splitflow.core import Call, CallClose, Packet, SplitflowError, T, Trace, U, validate_trace

TRACE_HEADER = "#splitflow-trace v1"
_BATCH = 4096
_TWO_M53 = 2.0**-53


class InvalidConfig(SplitflowError, ValueError):
    def __init__(self, field_name: str, reason: str) -> None:
        self.field = field_name
        super().__init__(f"{field_name}: {reason}")


class ParseError(SplitflowError):
    def __init__(self, line_no: int, reason: str) -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class Rng:
    """Buffered view over PCG64 raw outputs."""

    def __init__(self, seed: int) -> None:
        self._bits = np.random.PCG64(seed)
        self._buf: list[int] = []
        self._pos = 0

    def raw(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = self._bits.random_raw(_BATCH).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x

    def uniform(self) -> float:
        """Float strictly inside (0, 1)."""
        return ((self.raw() >> 11) + 0.5) * _TWO_M53

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.raw()
            if x < limit:
                return x % bound

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class Fixed:
    value: float

    def validate(self, name: str) -> None:
        if not self.value > 0:
            raise InvalidConfig(name, "fixed value must be positive")

    def sample(self, rng: Rng) -> float:
        return self.value

    def mean(self) -> float:
        return self.value

    def __str__(self) -> str:
        return f"fixed:{_num(self.value)}"


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int

    def validate(self, name: str) -> None:
        if not (1 <= self.lo <= self.hi):
            raise InvalidConfig(name, "uniform bounds need 1 <= lo <= hi")

    def sample(self, rng: Rng) -> float:
        return self.lo + rng.below(self.hi - self.lo + 1)

    def mean(self) -> float:
        return (self.lo + self.hi) / 2

    def __str__(self) -> str:
        return f"uniform:{self.lo}:{self.hi}"


@dataclass(frozen=True)
class Exponential:
    mean_value: float
    cap: float

    def validate(self, name: str) -> None:
        if not (self.mean_value > 0 and self.cap > 0):
            raise InvalidConfig(name, "exponential mean and cap must be positive")

    def sample(self, rng: Rng) -> float:
        return min(-self.mean_value * math.log(rng.uniform()), self.cap)

    def mean(self) -> float:
        return self.mean_value

    def __str__(self) -> str:
        return f"exp:{_num(self.mean_value)}:{_num(self.cap)}"


Distribution = Union[Fixed, UniformInt, Exponential]


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_distribution(text: str) -> Distribution:
    """Parse ``fixed:V``, ``uniform:LO:HI`` or ``exp:MEAN[:CAP]`` (cap defaults to 10x mean)."""
    name, _, rest = text.strip().partition(":")
    args = rest.split(":") if rest else []
    try:
        if name == "fixed" and len(args) == 1:
            return Fixed(float(args[0]))
        if name == "uniform" and len(args) == 2:
            return UniformInt(int(args[0]), int(args[1]))
        if name in ("exp", "exponential") and len(args) in (1, 2):
            mean = float(args[0])
            return Exponential(mean, float(args[1]) if len(args) == 2 else 10 * mean)
    except ValueError:
        pass
    raise ValueError(f"bad distribution {text!r}; use fixed:V, uniform:LO:HI or exp:MEAN[:CAP]")


def positive_int(dist: Distribution, rng: Rng) -> int:
    return max(1, int(round(dist.sample(rng))))


@dataclass(frozen=True)
class TrafficConfig:
    class_mix: float = 0.5
    n_packets: int = 100_000
    size_dist: Distribution = UniformInt(64, 1500)
    call_bandwidth_dist: Distribution = Exponential(64.0, 640.0)
    packets_per_call_dist: Distribution = UniformInt(5, 50)
    max_concurrent_calls: int = 128
    seed: int = 0
    # one size drawn per call instead of per packet
    uniform_call_sizes: bool = False
    # packet count of a call scaled by bandwidth / mean bandwidth, so load follows Q
    length_scales_with_bandwidth: bool = True

    def validate(self) -> "TrafficConfig":
        if not 0.0 <= self.class_mix <= 1.0:
            raise InvalidConfig("class_mix", f"must be in [0, 1], got {self.class_mix}")
        if self.n_packets < 1:
            raise InvalidConfig("n_packets", "must be >= 1")
        if self.max_concurrent_calls < 1:
            raise InvalidConfig("max_concurrent_calls", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed", "must be a 64-bit unsigned integer")
        self.size_dist.validate("size_dist")
        self.call_bandwidth_dist.validate("call_bandwidth_dist")
        self.packets_per_call_dist.validate("packets_per_call_dist")
        return self

    def with_(self, **changes) -> "TrafficConfig":
        return replace(self, **changes)


def generate(config: TrafficConfig) -> Trace:
    """Build a well-formed trace; a pure function of ``config``.

    Exactly ``round(class_mix * n_packets)`` packets are connectionless, placed
    at shuffled positions. Calls open lazily up to the concurrency cap and
    emit packets at a rate proportional to their bandwidth: the next packet
    comes from the open call with the earliest virtual finish time, each
    emission advancing that call by ``1 / bandwidth``.
    """
    config.validate()
    rng = Rng(config.seed)
    n = config.n_packets
    n_u = int(round(config.class_mix * n))
    slots = [True] * n_u + [False] * (n - n_u)
    rng.shuffle(slots)

    events: list = []
    unallocated = n - n_u
    heap: list[tuple[float, int]] = []
    remaining: dict[int, int] = {}
    bandwidth: dict[int, float] = {}
    call_size: dict[int, int] = {}
    next_id = 1
    now = 0.0
    mean_q = config.call_bandwidth_dist.mean()

    for seq, connectionless in enumerate(slots, start=1):
        if connectionless:
            events.append(Packet(seq, positive_int(config.size_dist, rng), U))
            continue
        while len(heap) < config.max_concurrent_calls and unallocated > 0:
            length = config.packets_per_call_dist.sample(rng)
            q = float(config.call_bandwidth_dist.sample(rng))
            if config.length_scales_with_bandwidth:
                length *= q / mean_q
            count = min(max(1, int(round(length))), unallocated)
            unallocated -= count
            cid = next_id
            next_id += 1
            remaining[cid] = count
            bandwidth[cid] = q
            if config.uniform_call_sizes:
                call_size[cid] = positive_int(config.size_dist, rng)
            events.append(Call(cid, q))
            heapq.heappush(heap, (now + 1.0 / q, cid))
        now, cid = heapq.heappop(heap)
        size = call_size[cid] if config.uniform_call_sizes else positive_int(config.size_dist, rng)
        events.append(Packet(seq, size, T, cid))
        remaining[cid] -= 1
        if remaining[cid] == 0:
            del remaining[cid]
            events.append(CallClose(cid))
        else:
            heapq.heappush(heap, (now + 1.0 / bandwidth[cid], cid))
    return Trace(tuple(events))


def format_event(ev) -> str:
    if type(ev) is Packet:
        cid = "-" if ev.call_id is None else str(ev.call_id)
        return f"P,{ev.seq},{ev.size},{ev.cls.value},{cid}"
    if type(ev) is Call:
        return f"O,{ev.id},{ev.bandwidth!r}"
    return f"C,{ev.id}"


def dumps_trace(trace: Trace) -> str:
    lines = [TRACE_HEADER]
    lines.extend(format_event(ev) for ev in trace.events)
    return "\n".join(lines) + "\n"


def save_trace(trace: Trace, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="utf-8", newline="\n")


def _parse_line(line: str, line_no: int):
    parts = line.split(",")
    tag = parts[0]
    try:
        if tag == "P" and len(parts) == 5:
            cls = {"U": U, "T": T}.get(parts[3])
            if cls is None:
                raise ParseError(line_no, f"unknown traffic class {parts[3]!r}")
            cid = None if parts[4] == "-" else int(parts[4])
            return Packet(int(parts[1]), int(parts[2]), cls, cid)
        if tag == "O" and len(parts) == 3:
            return Call(int(parts[1]), float(parts[2]))
        if tag == "C" and len(parts) == 2:
            return CallClose(int(parts[1]))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(line_no, str(exc)) from None
    raise ParseError(line_no, f"unrecognised record {line!r}")


def loads_trace(text: str) -> Trace:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != TRACE_HEADER:
        raise ParseError(1, f"missing header {TRACE_HEADER!r}")
    events = [_parse_line(line, no) for no, line in enumerate(lines[1:], start=2) if line]
    return validate_trace(Trace(tuple(events)))


def load_trace(path: Union[str, Path]) -> Trace:
    return loads_trace(Path(path).read_text(encoding="utf-8"))
