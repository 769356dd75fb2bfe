"""Downlink traffic generation and per-UE FIFO buffers.

Times are integer milliseconds and sizes integer bytes, so byte conservation
holds exactly.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .domain import (EMBB_TRAFFIC, MMTC_TRAFFIC, URLLC_TRAFFIC, RngStream, SliceKind,
                     TrafficGenSpec)

__all__ = [
    "TrafficGenSpec", "URLLC_TRAFFIC", "EMBB_TRAFFIC", "MMTC_TRAFFIC",
    "Packet", "DownlinkBuffer", "ServedSummary", "WindowStats",
    "generate_arrivals", "draw_requested_bitrate", "embb_packet_bytes",
    "serve", "serve_span", "window_stats", "arrival_count",
]


@dataclass
class Packet:
    bytes: int
    enqueue_time: int
    remaining: int = -1

    def __post_init__(self) -> None:
        if self.remaining < 0:
            self.remaining = self.bytes


@dataclass
class ServedSummary:
    bytes: int = 0
    latencies: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class WindowStats:
    t_avg: float
    bytes_served: int
    bytes_generated: int
    occupancy: int
    latencies: tuple[int, ...] = ()


@dataclass
class DownlinkBuffer:
    queue: deque = field(default_factory=deque)
    served_log: list[tuple[int, int]] = field(default_factory=list)
    generated_total: int = 0
    served_total: int = 0
    # running window accumulators, reset by window_stats
    _win_served: int = 0
    _win_generated: int = 0
    _win_latencies: list[int] = field(default_factory=list)

    @property
    def occupancy(self) -> int:
        return sum(p.remaining for p in self.queue)

    def push(self, pkt: Packet) -> None:
        self.queue.append(pkt)
        self.generated_total += pkt.bytes
        self._win_generated += pkt.bytes

    def _complete(self, pkt: Packet, now: int, out: ServedSummary) -> None:
        lat = now - pkt.enqueue_time
        self.served_log.append((pkt.bytes, lat))
        self._win_latencies.append(lat)
        out.latencies.append(lat)

    def _account(self, n: int, out: ServedSummary) -> None:
        out.bytes += n
        self.served_total += n
        self._win_served += n

    def flush(self) -> int:
        """Drop everything still queued; returns the bytes discarded."""
        left = self.occupancy
        self.queue.clear()
        return left


def arrival_count(duration_ms: float, gen_freq: float) -> int:
    return math.ceil(duration_ms * gen_freq / 1000.0)


def draw_requested_bitrate(spec: TrafficGenSpec, rng: RngStream) -> float:
    return float(rng.uniform(spec.bitrate_min, spec.bitrate_max))


def embb_packet_bytes(requested_bitrate: float, kpi_period: int) -> int:
    # rounded up so a fully served window meets the requested rate
    return math.ceil(round(requested_bitrate * kpi_period / 8000.0, 6))


def generate_arrivals(spec: TrafficGenSpec, t0: int, t1: int, rng: RngStream, *,
                      kpi_period: int = 500,
                      requested_bitrate: float | None = None) -> list[Packet]:
    """Packets due in ``[t0, t1)``.

    Periodic kinds arrive at multiples of ``1000 / gen_freq`` ms counted from
    t=0 with uniformly drawn integer sizes. eMBB emits one packet per KPI
    period sized to the UE's requested bitrate, which must be supplied.
    """
    if t1 <= t0:
        raise ValueError("empty arrival window")
    out: list[Packet] = []
    if spec.kind == SliceKind.EMBB:
        if requested_bitrate is None:
            raise ValueError("eMBB arrivals need the requested bitrate")
        size = embb_packet_bytes(requested_bitrate, kpi_period)
        k = -(-t0 // kpi_period)
        while k * kpi_period < t1:
            out.append(Packet(size, k * kpi_period))
            k += 1
        return out

    period = 1000.0 / spec.gen_freq
    k = math.ceil(t0 / period - 1e-9)
    while True:
        t = k * period
        if t >= t1 - 1e-9:
            break
        size = int(rng.integers(spec.bytes_min, spec.bytes_max + 1))
        when = int(round(t))
        if spec.jitter:
            when += int(rng.integers(0, max(1, int(period))))
            when = min(when, t1 - 1)
        out.append(Packet(size, when))
        k += 1
    return out


def serve(buffer: DownlinkBuffer, budget: int, now: int) -> ServedSummary:
    """Drain up to ``budget`` bytes head-first; completed packets log ``now``."""
    out = ServedSummary()
    left = int(budget)
    q = buffer.queue
    while left > 0 and q:
        head = q[0]
        take = min(left, head.remaining)
        head.remaining -= take
        left -= take
        buffer._account(take, out)
        if head.remaining == 0:
            q.popleft()
            buffer._complete(head, now, out)
    return out


def serve_span(buffer: DownlinkBuffer, budget: int, start: int, n_subframes: int,
               subframe: int = 1) -> ServedSummary:
    """Same outcome as calling :func:`serve` once per subframe for
    ``n_subframes`` subframes beginning at ``start`` (subframe ``k`` finishes
    at ``start + (k+1)*subframe``), assuming no arrivals in between."""
    out = ServedSummary()
    budget = int(budget)
    if budget <= 0 or n_subframes <= 0:
        return out
    total = budget * n_subframes
    used = 0
    q = buffer.queue
    while q and used < total:
        head = q[0]
        if used + head.remaining <= total:
            used += head.remaining
            buffer._account(head.remaining, out)
            head.remaining = 0
            q.popleft()
            j = -(-used // budget)
            buffer._complete(head, start + j * subframe, out)
        else:
            take = total - used
            head.remaining -= take
            buffer._account(take, out)
            used = total
    return out


def window_stats(buffer: DownlinkBuffer, now: int) -> WindowStats:
    """Close the current measurement window at ``now``.

    ``t_avg`` is the mean latency of packets completed in the window; with
    none completed it falls back to the head-of-line age, and to 0 for an
    idle buffer.
    """
    lats = tuple(buffer._win_latencies)
    if lats:
        t_avg = sum(lats) / len(lats)
    elif buffer.queue:
        t_avg = float(now - buffer.queue[0].enqueue_time)
    else:
        t_avg = 0.0
    stats = WindowStats(t_avg, buffer._win_served, buffer._win_generated, buffer.occupancy, lats)
    buffer._win_served = 0
    buffer._win_generated = 0
    buffer._win_latencies = []
    return stats
