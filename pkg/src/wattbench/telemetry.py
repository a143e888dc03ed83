"""Activity-counter and power-sample ingestion.

Converts OS tick accounting into loads in ACPS, parses recorded
power-analyzer streams, and aggregates samples over measurement
timeslots with transient trimming.

Samplers append immutable snapshots/samples to append-only logs while a
workload runs; everything here only ever reads a consistent prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple

from .errors import CounterRegression, InsufficientSamples, NonMonotonicTimestamp, ParseError

TICKS_PER_SECOND = 100  # one scheduler tick is 10 ms

ACTIVE_FIELDS = ("user", "nice", "system", "irq", "softirq")
PASSIVE_FIELDS = ("idle", "iowait")


class CoreTicks(NamedTuple):
    """Cumulative tick counters for one core."""

    user: int
    nice: int
    system: int
    irq: int
    softirq: int
    iowait: int
    idle: int


class TickSnapshot(NamedTuple):
    """Per-core cumulative counters at one instant."""

    timestamp: float
    cores: tuple[CoreTicks, ...]


class PowerSample(NamedTuple):
    timestamp: float  # seconds, relative to the stream epoch
    watts: float


@dataclass(frozen=True)
class Timeslot:
    start: float
    end: float
    label: str = ""

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"timeslot must have end > start, got [{self.start}, {self.end}]")

    @property
    def duration(self) -> float:
        return self.end - self.start


def classify_ticks(prev: TickSnapshot, curr: TickSnapshot) -> tuple[int, int]:
    """Split counter deltas into (active, passive) ticks, summed over cores.

    Waiting (iowait) counts as passive, exactly like idle. Raises
    CounterRegression when any counter or the timestamp goes backwards.
    """
    if not curr.timestamp > prev.timestamp:
        raise CounterRegression(
            f"timestamp did not advance: {prev.timestamp} -> {curr.timestamp}"
        )
    if len(prev.cores) != len(curr.cores):
        raise CounterRegression(
            f"core count changed: {len(prev.cores)} -> {len(curr.cores)}"
        )
    active = 0
    passive = 0
    for index, (before, after) in enumerate(zip(prev.cores, curr.cores)):
        for name in CoreTicks._fields:
            delta = getattr(after, name) - getattr(before, name)
            if delta < 0:
                raise CounterRegression(f"core {index} counter {name} decreased by {-delta}")
            if name in PASSIVE_FIELDS:
                passive += delta
            else:
                active += delta
    return active, passive


def ticks_to_acps(active_ticks: int, frequency: float, elapsed: float) -> float:
    """Convert active ticks over an interval to active cycles per second.

    A tick is 1/100 s of core time, so the cycles it represents are
    ticks * frequency / 100; a fully busy core (100 ticks/s) therefore
    yields exactly its clock rate.
    """
    if not elapsed > 0:
        raise ValueError(f"elapsed must be > 0, got {elapsed}")
    if not frequency > 0:
        raise ValueError(f"frequency must be > 0, got {frequency}")
    if active_ticks < 0:
        raise ValueError(f"active_ticks must be >= 0, got {active_ticks}")
    return (active_ticks * frequency / TICKS_PER_SECOND) / elapsed


def _lines(source: bytes | str | IO | Iterable[str]) -> Iterable[str]:
    if isinstance(source, bytes):
        return source.decode("ascii").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    return source


def parse_power_stream(source: bytes | str | IO | Iterable[str]) -> list[PowerSample]:
    """Parse a ``seconds,watts`` CSV stream (no header, '.' decimals).

    Malformed lines raise ParseError with their 1-based line number;
    timestamps must be strictly increasing.
    """
    samples: list[PowerSample] = []
    last_ts = -math.inf
    for number, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(number, f"expected 'seconds,watts', got {line!r}")
        try:
            ts, watts = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(number, f"non-numeric field in {line!r}") from None
        if not math.isfinite(ts) or not math.isfinite(watts):
            raise ParseError(number, f"non-finite value in {line!r}")
        if watts <= 0:
            raise ParseError(number, f"power must be > 0 W, got {watts}")
        if ts <= last_ts:
            raise NonMonotonicTimestamp(number, f"timestamp {ts} after {last_ts}")
        last_ts = ts
        samples.append(PowerSample(ts, watts))
    return samples


TICK_CSV_HEADERLESS = "seconds,core,user,nice,system,irq,softirq,iowait,idle"


def parse_tick_stream(source: bytes | str | IO | Iterable[str]) -> list[TickSnapshot]:
    """Parse recorded tick snapshots (one row per core per instant).

    Row shape: ``seconds,core,user,nice,system,irq,softirq,iowait,idle``
    with cumulative counts. Rows sharing a timestamp form one snapshot
    and must cover cores 0..n-1 exactly.
    """
    by_ts: dict[float, dict[int, CoreTicks]] = {}
    order: list[float] = []
    for number, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise ParseError(number, f"expected 9 fields, got {len(parts)}")
        try:
            ts = float(parts[0])
            core = int(parts[1])
            user, nice, system, irq, softirq, iowait, idle = (int(p) for p in parts[2:])
        except ValueError:
            raise ParseError(number, f"non-numeric field in {line!r}") from None
        if ts not in by_ts:
            by_ts[ts] = {}
            order.append(ts)
        if core in by_ts[ts]:
            raise ParseError(number, f"duplicate core {core} at t={ts}")
        by_ts[ts][core] = CoreTicks(user, nice, system, irq, softirq, iowait, idle)

    snapshots: list[TickSnapshot] = []
    last_ts = -math.inf
    for ts in order:
        if ts <= last_ts:
            raise NonMonotonicTimestamp(0, f"snapshot timestamp {ts} after {last_ts}")
        last_ts = ts
        cores = by_ts[ts]
        if sorted(cores) != list(range(len(cores))):
            raise ParseError(0, f"snapshot at t={ts} does not cover cores 0..{len(cores) - 1}")
        snapshots.append(TickSnapshot(ts, tuple(cores[i] for i in range(len(cores)))))
    return snapshots


def slot_statistics(
    samples: Iterable[PowerSample], slot: Timeslot, trim_margin: float = 5.0
) -> tuple[float, float, int]:
    """Mean/stddev/count of samples inside the trimmed slot window.

    Keeps samples with slot.start + trim <= t < slot.end - trim, which
    drops the power ramps around workload start/stop. Stddev is the
    sample standard deviation (ddof=1). Order of input samples does not
    matter, nor does anything outside the window.
    """
    if trim_margin < 0:
        raise ValueError("trim_margin must be >= 0")
    if not slot.duration > 2 * trim_margin:
        raise InsufficientSamples(
            f"slot {slot.label!r} of {slot.duration:.3g}s cannot absorb 2x{trim_margin:.3g}s trim"
        )
    lo = slot.start + trim_margin
    hi = slot.end - trim_margin
    kept = [s.watts for s in samples if lo <= s.timestamp < hi]
    count = len(kept)
    if count < 3:
        raise InsufficientSamples(
            f"slot {slot.label!r}: only {count} samples survive trimming (need >= 3)"
        )
    mean = math.fsum(kept) / count
    var = math.fsum((w - mean) ** 2 for w in kept) / (count - 1)
    return mean, math.sqrt(var), count
