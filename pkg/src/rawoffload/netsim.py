"""Fluid link model over a step-function bandwidth trace.

Rates are bytes/second, times are seconds on a virtual clock. There is no
packetization, loss or congestion control: a transfer drains at whatever the
trace allows, one transfer at a time in submission order.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VIRTUAL_TICK = 1e-6
DEFAULT_PROPAGATION_DELAY = 0.002


class LinkStalled(RuntimeError):
    """The trace offers zero bandwidth forever but bytes are still queued."""


@dataclass(frozen=True)
class BandwidthTrace:
    times: tuple[float, ...]
    rates: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.times or len(self.times) != len(self.rates):
            raise ValueError("trace needs at least one (time, rate) sample")
        if self.times[0] != 0:
            raise ValueError(f"trace must start at t=0, starts at {self.times[0]}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trace timestamps must be strictly increasing")
        if any(r < 0 or not math.isfinite(r) for r in self.rates):
            raise ValueError("trace rates must be finite and non-negative")

    @classmethod
    def constant(cls, rate: float) -> BandwidthTrace:
        return cls((0.0,), (float(rate),))

    @property
    def duration(self) -> float:
        return self.times[-1]

    def rate_at(self, t: float) -> float:
        """Rate in force at time t; the last sample holds forever."""
        i = bisect.bisect_right(self.times, t) - 1
        return self.rates[max(i, 0)]

    def mean_rate(self, until: float | None = None) -> float:
        end = self.duration if until is None else until
        if end <= 0:
            return self.rates[0]
        return bytes_between(self, 0.0, end) / end

    def dumps(self) -> str:
        return "".join(f"{t!r} {r!r}\n" for t, r in zip(self.times, self.rates))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def loads_trace(text: str) -> BandwidthTrace:
    times, rates = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"trace line {lineno}: expected 't_seconds rate_bytes_per_second'")
        times.append(float(parts[0]))
        rates.append(float(parts[1]))
    if not times:
        raise ValueError("trace file holds no samples")
    return BandwidthTrace(tuple(times), tuple(rates))


def load_trace(path: str | Path) -> BandwidthTrace:
    return loads_trace(Path(path).read_text())


def generate_trace(
    seed: int,
    duration: float,
    mean_rate: float,
    step_interval: float = 0.1,
    step_size: float | None = None,
) -> BandwidthTrace:
    """Binomial random walk: every ``step_interval`` the rate moves up or down
    by ``step_size`` with equal odds, clamped to [0.1, 2] x ``mean_rate``.
    ``step_size`` defaults to 10% of the mean."""
    if duration <= 0 or mean_rate <= 0 or step_interval <= 0:
        raise ValueError("duration, mean_rate and step_interval must be positive")
    if step_size is None:
        step_size = 0.1 * mean_rate
    if step_size < 0:
        raise ValueError("step_size cannot be negative")
    n = max(1, int(math.ceil(duration / step_interval)))
    rng = np.random.default_rng(seed)
    moves = np.where(rng.integers(0, 2, size=n - 1) == 1, step_size, -step_size)
    lo, hi = 0.1 * mean_rate, 2.0 * mean_rate
    rates = [float(mean_rate)]
    for m in moves:
        rates.append(float(min(max(rates[-1] + m, lo), hi)))
    times = tuple(i * step_interval for i in range(n))
    return BandwidthTrace(times, tuple(rates), seed)


def bytes_between(trace: BandwidthTrace, t0: float, t1: float) -> float:
    """Integral of the rate over [t0, t1]."""
    if t1 <= t0:
        return 0.0
    total = 0.0
    i = max(bisect.bisect_right(trace.times, t0) - 1, 0)
    t = t0
    while t < t1:
        seg_end = trace.times[i + 1] if i + 1 < len(trace.times) else math.inf
        end = min(seg_end, t1)
        total += trace.rates[i] * (end - t)
        t = end
        i += 1
    return total


def transfer_time(trace: BandwidthTrace, start: float, nbytes: float) -> float:
    """Smallest d with the integral of the rate over [start, start + d] equal
    to ``nbytes``, walking the step segments in closed form."""
    if nbytes < 0:
        raise ValueError("cannot transfer a negative byte count")
    if nbytes == 0:
        return 0.0
    remaining = float(nbytes)
    i = max(bisect.bisect_right(trace.times, start) - 1, 0)
    t = start
    while True:
        rate = trace.rates[i]
        last = i + 1 >= len(trace.times)
        if last:
            if rate <= 0:
                raise LinkStalled(f"{remaining:.0f} bytes pending on a link that stays at 0 B/s")
            return t + remaining / rate - start
        seg_end = trace.times[i + 1]
        capacity = rate * (seg_end - t)
        if capacity >= remaining and rate > 0:
            return t + remaining / rate - start
        remaining -= capacity
        t = seg_end
        i += 1


@dataclass(frozen=True)
class Transfer:
    nbytes: int
    submitted: float
    start: float
    end: float  # last byte leaves the sender
    arrival: float  # last byte reaches the receiver

    @property
    def queue_wait(self) -> float:
        return self.start - self.submitted


@dataclass
class Link:
    """One direction of a link: FIFO, one transfer on the wire at a time."""

    trace: BandwidthTrace
    propagation_delay: float = DEFAULT_PROPAGATION_DELAY
    clock: float = 0.0
    history: list[Transfer] = field(default_factory=list, repr=False)

    def transmit(self, nbytes: int, at: float | None = None) -> Transfer:
        submitted = self.clock if at is None else at
        if self.history and submitted < self.history[-1].submitted:
            raise ValueError("submissions must arrive in non-decreasing time order")
        start = max(submitted, self.clock)
        end = start + transfer_time(self.trace, start, nbytes)
        self.clock = end
        xfer = Transfer(nbytes, submitted, start, end, end + self.propagation_delay)
        self.history.append(xfer)
        return xfer


def transmit_duration(link: Link, nbytes: int) -> float:
    """Transmit at the link clock; returns queue wait plus wire time."""
    before = link.clock
    xfer = link.transmit(nbytes)
    return xfer.end - before
