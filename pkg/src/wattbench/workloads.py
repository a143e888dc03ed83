"""Calibration sweep planning and execution.

Plans enumerate labeled timeslots over (cores, frequency, load), disk
(frequency, block size) and network (frequency, packet size, rate)
grids; execution drives an abstract host through the plan, aggregating
telemetry into one observation per slot. Exactly one workload runs at a
time; the power/tick samplers run concurrently behind the host's
append-only logs.
"""

from __future__ import annotations

import abc
import bisect
import math
from dataclasses import dataclass
from typing import Sequence

from .core import LoadSample, OperatingPoint, SCHEMA_VERSION, check_doc, fmt_num
from .errors import EmptyGrid, RateUnachievable, WattbenchError
from .telemetry import PowerSample, TickSnapshot, Timeslot, classify_ticks, slot_statistics

DEFAULT_SLOT_SECONDS = 30.0
DEFAULT_TRIM_SECONDS = 5.0
NET_REPETITIONS = 3

# Descending load ladder: 1.00 down in 3% steps (33 levels); a no-load
# slot is appended per configuration on top of these.
DEFAULT_LOAD_LEVELS = tuple(round(1.0 - 0.03 * k, 2) for k in range(33))

DEFAULT_BLOCK_SIZES = (
    10 * 1024,  # 10 KB
    100 * 1024,
    1024 * 1024,
    10 * 1024 * 1024,
    64 * 1024 * 1024,  # Hadoop-style block
    100 * 1024 * 1024,  # 100 MB
)

DEFAULT_PACKET_SIZES = (64, 1470)

# 3.6 GB per disk slot: ~30 s of sequential reading on the reference
# simulated medium, long enough to trim transients on every block size.
DEFAULT_DISK_VOLUME = 3.6e9

# UDP/IP/Ethernet framing cost per packet: 8 UDP + 20 IP + 14 MAC +
# 4 FCS + 20 preamble/IFG bytes on the wire.
PACKET_OVERHEAD_BYTES = 66
LINE_RATE_BPS = 1e9


def udp_rate_cap(packet_size: int, line_rate: float = LINE_RATE_BPS) -> float:
    """Highest achievable UDP payload rate for a packet size (bps)."""
    if packet_size <= 0:
        raise ValueError(f"packet_size must be > 0, got {packet_size}")
    return line_rate * packet_size / (packet_size + PACKET_OVERHEAD_BYTES)


def default_rates(packet_size: int) -> tuple[float, ...]:
    """Rate ladder as fractions of the achievable cap for this packet size."""
    cap = udp_rate_cap(packet_size)
    return tuple(round(cap * f) for f in (0.15, 0.3, 0.6, 0.9))


class HostInterface(abc.ABC):
    """Capability contract a calibration target must provide.

    One frequency applies to all cores at once. Implementations exist
    for the bundled simulator; real-host adapters plug in behind the
    same surface.
    """

    @abc.abstractmethod
    def set_frequency(self, frequency: float) -> None: ...

    @abc.abstractmethod
    def set_active_cores(self, cores: int) -> None: ...

    @abc.abstractmethod
    def apply_cpu_load(self, fraction: float, cores: int, duration: float) -> None: ...

    @abc.abstractmethod
    def disk_io(
        self, direction: str, block_size: int, volume: float, sync_each_block: bool
    ) -> float:
        """Move ``volume`` bytes; returns the exact operation duration in seconds."""

    @abc.abstractmethod
    def flush_caches(self) -> None: ...

    @abc.abstractmethod
    def net_transfer(
        self, direction: str, packet_size: int, rate: float, duration: float
    ) -> None: ...

    @abc.abstractmethod
    def read_ticks(self) -> TickSnapshot: ...

    @abc.abstractmethod
    def power_stream(self) -> Sequence[PowerSample]: ...

    @abc.abstractmethod
    def tick_snapshot_at(self, timestamp: float) -> TickSnapshot: ...

    @abc.abstractmethod
    def clock_seconds(self) -> float: ...


@dataclass(frozen=True)
class CpuSlotParams:
    cores: int
    frequency: float
    target_load_fraction: float  # 0.0 marks the trailing no-load slot


@dataclass(frozen=True)
class DiskSlotParams:
    frequency: float
    block_size: int
    volume: float
    direction: str
    sync_each_block: bool
    flush_before: bool
    repetitions: int = 3


@dataclass(frozen=True)
class NetSlotParams:
    frequency: float
    packet_size: int
    rate: float
    direction: str
    repetitions: int = NET_REPETITIONS


@dataclass(frozen=True)
class PlannedSlot:
    timeslot: Timeslot
    params: CpuSlotParams | DiskSlotParams | NetSlotParams

    @property
    def label(self) -> str:
        return self.timeslot.label


@dataclass(frozen=True)
class SweepPlan:
    kind: str  # cpu | disk_read | disk_write | net_send | net_recv
    slots: tuple[PlannedSlot, ...]
    slot_seconds: float = DEFAULT_SLOT_SECONDS

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))


def freq_tag(frequency: float) -> str:
    """Compact frequency label fragment used in slot names."""
    return str(int(frequency)) if float(frequency).is_integer() else repr(float(frequency))


def plan_cpu_sweep(
    frequencies: Sequence[float],
    max_cores: int,
    load_levels: Sequence[float] = DEFAULT_LOAD_LEVELS,
    slot_length: float = DEFAULT_SLOT_SECONDS,
) -> SweepPlan:
    """CPU load ladder over every (cores, frequency) configuration.

    Order: cores ascending, then frequency ascending, then loads
    descending, then one extra slot with no injected load (true zero
    load being unobservable, its measurement still carries a small rho).
    """
    if not frequencies or max_cores < 1:
        raise EmptyGrid("cpu sweep needs at least one frequency and one core")
    if not load_levels:
        raise EmptyGrid("cpu sweep needs a non-empty load ladder")
    levels = [float(l) for l in load_levels]
    if any(not 0 < l <= 1 for l in levels):
        raise ValueError(f"load levels must be in (0, 1], got {levels}")
    if any(b >= a for a, b in zip(levels, levels[1:])):
        raise ValueError("load levels must be strictly descending")

    slots: list[PlannedSlot] = []
    start = 0.0
    for cores in range(1, max_cores + 1):
        for frequency in sorted(float(f) for f in frequencies):
            for load in [*levels, 0.0]:
                tag = f"l{load:.4f}" if load > 0 else "idle"
                label = f"cpu/c{cores}/f{freq_tag(frequency)}/{tag}"
                slots.append(
                    PlannedSlot(
                        timeslot=Timeslot(start, start + slot_length, label),
                        params=CpuSlotParams(cores, frequency, load),
                    )
                )
                start += slot_length
    return SweepPlan(kind="cpu", slots=tuple(slots), slot_seconds=slot_length)


def plan_disk_sweep(
    frequencies: Sequence[float],
    block_sizes: Sequence[int],
    volume: float,
    direction: str,
    slot_length: float = DEFAULT_SLOT_SECONDS,
) -> SweepPlan:
    """Disk exercise per (frequency, block size).

    Writes commit after every block (sync flag on every slot); reads are
    preceded by a cache flush so the medium, not RAM, is measured.
    """
    if direction not in ("read", "write"):
        raise ValueError(f"direction must be read or write, got {direction!r}")
    if not frequencies or not block_sizes:
        raise EmptyGrid("disk sweep needs frequencies and block sizes")
    blocks = [int(b) for b in block_sizes]
    if blocks != sorted(blocks):
        raise ValueError("block sizes must be ascending")
    if volume < max(blocks):
        raise ValueError(
            f"volume {volume:.4g} B is smaller than the largest block ({max(blocks)} B)"
        )

    slots: list[PlannedSlot] = []
    start = 0.0
    for frequency in sorted(float(f) for f in frequencies):
        for block in blocks:
            label = f"disk_{direction}/f{freq_tag(frequency)}/b{block}"
            slots.append(
                PlannedSlot(
                    timeslot=Timeslot(start, start + slot_length, label),
                    params=DiskSlotParams(
                        frequency=frequency,
                        block_size=block,
                        volume=float(volume),
                        direction=direction,
                        sync_each_block=direction == "write",
                        flush_before=direction == "read",
                    ),
                )
            )
            start += slot_length
    return SweepPlan(kind=f"disk_{direction}", slots=tuple(slots), slot_seconds=slot_length)


def plan_net_sweep(
    frequencies: Sequence[float],
    packet_sizes: Sequence[int],
    rates: Sequence[float] | None = None,
    direction: str = "send",
    slot_length: float = DEFAULT_SLOT_SECONDS,
    repetitions: int = NET_REPETITIONS,
) -> SweepPlan:
    """UDP transfer per (frequency, packet size, rate), each repeated.

    Non-positive rates are excluded from the grid; a rate above the
    achievable cap for its packet size is an error. ``rates=None``
    derives a per-packet-size ladder from the cap.
    """
    if direction not in ("send", "receive"):
        raise ValueError(f"direction must be send or receive, got {direction!r}")
    if not frequencies or not packet_sizes:
        raise EmptyGrid("net sweep needs frequencies and packet sizes")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")

    slots: list[PlannedSlot] = []
    start = 0.0
    kind = "net_send" if direction == "send" else "net_recv"
    for frequency in sorted(float(f) for f in frequencies):
        for packet in sorted(int(p) for p in packet_sizes):
            ladder = default_rates(packet) if rates is None else tuple(float(r) for r in rates)
            ladder = tuple(r for r in ladder if r > 0)
            if not ladder:
                raise EmptyGrid(f"no positive rates for packet size {packet}")
            cap = udp_rate_cap(packet)
            for rate in ladder:
                if rate > cap:
                    raise RateUnachievable(
                        f"{rate / 1e6:.6g} Mbps exceeds the {cap / 1e6:.6g} Mbps cap "
                        f"for {packet}-B packets"
                    )
                label = f"{kind}/f{freq_tag(frequency)}/s{packet}/r{int(rate)}"
                slots.append(
                    PlannedSlot(
                        timeslot=Timeslot(start, start + slot_length, label),
                        params=NetSlotParams(
                            frequency=frequency,
                            packet_size=packet,
                            rate=rate,
                            direction=direction,
                            repetitions=repetitions,
                        ),
                    )
                )
                start += slot_length
    return SweepPlan(kind=kind, slots=tuple(slots), slot_seconds=slot_length)


@dataclass(frozen=True)
class DiskObservation:
    label: str
    operating_point: OperatingPoint
    block_size: int
    direction: str
    volume: float  # bytes actually moved
    duration: float  # seconds the operation took
    rho: float  # ACPS measured during the trimmed window
    power: float  # mean total watts over the trimmed window
    stddev: float = 0.0
    count: int = 0

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "cores": self.operating_point.cores,
            "frequency_hz": self.operating_point.frequency,
            "block_size_b": self.block_size,
            "direction": self.direction,
            "volume_b": self.volume,
            "duration_s": self.duration,
            "rho_acps": self.rho,
            "power_w": self.power,
            "stddev_w": self.stddev,
            "count": self.count,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DiskObservation":
        return cls(
            label=str(doc.get("label", "")),
            operating_point=OperatingPoint(int(doc["cores"]), float(doc["frequency_hz"])),
            block_size=int(doc["block_size_b"]),
            direction=str(doc["direction"]),
            volume=float(doc["volume_b"]),
            duration=float(doc["duration_s"]),
            rho=float(doc["rho_acps"]),
            power=float(doc["power_w"]),
            stddev=float(doc.get("stddev_w", 0.0)),
            count=int(doc.get("count", 0)),
        )


@dataclass(frozen=True)
class NetObservation:
    label: str
    operating_point: OperatingPoint
    packet_size: int
    direction: str
    rate: float  # bits per second
    duration: float
    rho: float
    power: float
    stddev: float = 0.0
    count: int = 0

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "cores": self.operating_point.cores,
            "frequency_hz": self.operating_point.frequency,
            "packet_size_b": self.packet_size,
            "direction": self.direction,
            "rate_bps": self.rate,
            "duration_s": self.duration,
            "rho_acps": self.rho,
            "power_w": self.power,
            "stddev_w": self.stddev,
            "count": self.count,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "NetObservation":
        return cls(
            label=str(doc.get("label", "")),
            operating_point=OperatingPoint(int(doc["cores"]), float(doc["frequency_hz"])),
            packet_size=int(doc["packet_size_b"]),
            direction=str(doc["direction"]),
            rate=float(doc["rate_bps"]),
            duration=float(doc["duration_s"]),
            rho=float(doc["rho_acps"]),
            power=float(doc["power_w"]),
            stddev=float(doc.get("stddev_w", 0.0)),
            count=int(doc.get("count", 0)),
        )


@dataclass(frozen=True)
class SlotFailure:
    label: str
    reason: str


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    frequencies: tuple[float, ...]
    max_cores: int
    slot_seconds: float = DEFAULT_SLOT_SECONDS
    trim_seconds: float = DEFAULT_TRIM_SECONDS
    seed: int | None = None

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "frequencies_hz": list(self.frequencies),
            "max_cores": self.max_cores,
            "slot_seconds": self.slot_seconds,
            "trim_seconds": self.trim_seconds,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DatasetMeta":
        return cls(
            name=str(doc["name"]),
            frequencies=tuple(float(f) for f in doc["frequencies_hz"]),
            max_cores=int(doc["max_cores"]),
            slot_seconds=float(doc.get("slot_seconds", DEFAULT_SLOT_SECONDS)),
            trim_seconds=float(doc.get("trim_seconds", DEFAULT_TRIM_SECONDS)),
            seed=None if doc.get("seed") is None else int(doc["seed"]),
        )


@dataclass(frozen=True)
class CalibrationDataset:
    """Labeled observations produced by executing sweep plans."""

    meta: DatasetMeta
    cpu_samples: tuple[LoadSample, ...] = ()
    disk_observations: tuple[DiskObservation, ...] = ()
    net_observations: tuple[NetObservation, ...] = ()
    failures: tuple[SlotFailure, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cpu_samples", tuple(self.cpu_samples))
        object.__setattr__(self, "disk_observations", tuple(self.disk_observations))
        object.__setattr__(self, "net_observations", tuple(self.net_observations))
        object.__setattr__(self, "failures", tuple(self.failures))

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "calibration_dataset",
            "meta": self.meta.to_doc(),
            "cpu_samples": [s.to_doc() for s in self.cpu_samples],
            "disk_observations": [o.to_doc() for o in self.disk_observations],
            "net_observations": [o.to_doc() for o in self.net_observations],
            "failures": [{"label": f.label, "reason": f.reason} for f in self.failures],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CalibrationDataset":
        check_doc(doc, "calibration_dataset")
        return cls(
            meta=DatasetMeta.from_doc(doc["meta"]),
            cpu_samples=tuple(LoadSample.from_doc(s) for s in doc["cpu_samples"]),
            disk_observations=tuple(
                DiskObservation.from_doc(o) for o in doc["disk_observations"]
            ),
            net_observations=tuple(NetObservation.from_doc(o) for o in doc["net_observations"]),
            failures=tuple(
                SlotFailure(str(f["label"]), str(f["reason"])) for f in doc["failures"]
            ),
        )

    def to_csv(self) -> str:
        """Flat export of the CPU samples."""
        lines = ["label,cores,freq_hz,rho_acps,power_w,stddev_w"]
        for s in self.cpu_samples:
            lines.append(
                ",".join(
                    [
                        s.label,
                        str(s.operating_point.cores),
                        fmt_num(s.operating_point.frequency),
                        fmt_num(s.rho),
                        fmt_num(s.power),
                        fmt_num(s.stddev),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def merge(cls, datasets: Sequence["CalibrationDataset"]) -> "CalibrationDataset":
        """Combine datasets from separate sweep runs over the same host."""
        if not datasets:
            raise ValueError("nothing to merge")
        head = datasets[0].meta
        for ds in datasets[1:]:
            if (
                ds.meta.frequencies != head.frequencies
                or ds.meta.max_cores != head.max_cores
                or ds.meta.name != head.name
            ):
                raise ValueError(
                    f"dataset {ds.meta.name!r} does not match host of {head.name!r}"
                )
        return cls(
            meta=head,
            cpu_samples=tuple(s for ds in datasets for s in ds.cpu_samples),
            disk_observations=tuple(o for ds in datasets for o in ds.disk_observations),
            net_observations=tuple(o for ds in datasets for o in ds.net_observations),
            failures=tuple(f for ds in datasets for f in ds.failures),
        )


def _window_rho(
    host: HostInterface, start: float, end: float, trim: float, frequency: float
) -> float:
    """Measured load over the trimmed window, from tick deltas."""
    lo = math.ceil(start + trim)
    hi = math.floor(end - trim)
    if hi <= lo:
        lo, hi = math.floor(start), math.ceil(end)
    before = host.tick_snapshot_at(lo)
    after = host.tick_snapshot_at(hi)
    active, _ = classify_ticks(before, after)
    return (active * frequency / 100.0) / (hi - lo)


def execute_sweep(
    plan: SweepPlan,
    host: HostInterface,
    trim_margin: float = DEFAULT_TRIM_SECONDS,
    repetitions: int | None = None,
    meta_name: str = "host",
    meta: DatasetMeta | None = None,
) -> CalibrationDataset:
    """Run every planned slot against the host and aggregate telemetry.

    Each observation carries the measured load from tick deltas, never
    the nominal target. A slot whose host action fails is recorded under
    ``failures`` and skipped; the sweep continues.
    """
    cpu_samples: list[LoadSample] = []
    disk_obs: list[DiskObservation] = []
    net_obs: list[NetObservation] = []
    failures: list[SlotFailure] = []

    for slot in plan.slots:
        params = slot.params
        reps = repetitions
        if reps is None:
            reps = getattr(params, "repetitions", 1)
        try:
            if isinstance(params, CpuSlotParams):
                cpu_samples.append(
                    _run_cpu_slot(host, slot, params, plan.slot_seconds, trim_margin, reps)
                )
            elif isinstance(params, DiskSlotParams):
                disk_obs.append(_run_disk_slot(host, slot, params, trim_margin, reps))
            else:
                net_obs.append(
                    _run_net_slot(host, slot, params, plan.slot_seconds, trim_margin, reps)
                )
        except WattbenchError as exc:
            failures.append(SlotFailure(slot.label, f"{type(exc).__name__}: {exc}"))

    if meta is None:
        freqs = sorted(
            {getattr(s.params, "frequency") for s in plan.slots}
        )
        cores = max(
            (p.cores for p in (s.params for s in plan.slots) if isinstance(p, CpuSlotParams)),
            default=1,
        )
        meta = DatasetMeta(
            name=meta_name,
            frequencies=tuple(freqs),
            max_cores=cores,
            slot_seconds=plan.slot_seconds,
            trim_seconds=trim_margin,
        )
    return CalibrationDataset(
        meta=meta,
        cpu_samples=tuple(cpu_samples),
        disk_observations=tuple(disk_obs),
        net_observations=tuple(net_obs),
        failures=tuple(failures),
    )


def _collect(
    host: HostInterface, start: float, end: float, label: str, trim: float
) -> tuple[float, float, int, list[float]]:
    slot = Timeslot(start, end, label)
    stream = host.power_stream()
    # The log is append-only and ordered; window it before aggregating so
    # long sweeps stay linear overall.
    lo = bisect.bisect_left(stream, start, key=lambda s: s.timestamp)
    hi = bisect.bisect_left(stream, end, key=lambda s: s.timestamp)
    window = stream[lo:hi]
    mean, stddev, count = slot_statistics(window, slot, trim)
    kept = [s.watts for s in window if start + trim <= s.timestamp < end - trim]
    return mean, stddev, count, kept


def _pooled(all_watts: list[float]) -> tuple[float, float, int]:
    count = len(all_watts)
    mean = math.fsum(all_watts) / count
    if count > 1:
        var = math.fsum((w - mean) ** 2 for w in all_watts) / (count - 1)
    else:
        var = 0.0
    return mean, math.sqrt(var), count


def _run_cpu_slot(
    host: HostInterface,
    slot: PlannedSlot,
    params: CpuSlotParams,
    slot_seconds: float,
    trim: float,
    reps: int,
) -> LoadSample:
    host.set_frequency(params.frequency)
    host.set_active_cores(params.cores)
    pooled: list[float] = []
    rhos: list[float] = []
    for _ in range(reps):
        start = host.clock_seconds()
        host.apply_cpu_load(params.target_load_fraction, params.cores, slot_seconds)
        end = host.clock_seconds()
        _, _, _, kept = _collect(host, start, end, slot.label, trim)
        pooled.extend(kept)
        rhos.append(_window_rho(host, start, end, trim, params.frequency))
    mean, stddev, count = _pooled(pooled)
    return LoadSample(
        rho=math.fsum(rhos) / len(rhos),
        power=mean,
        operating_point=OperatingPoint(params.cores, params.frequency),
        stddev=stddev,
        count=count,
        label=slot.label,
    )


def _run_disk_slot(
    host: HostInterface, slot: PlannedSlot, params: DiskSlotParams, trim: float, reps: int
) -> DiskObservation:
    host.set_frequency(params.frequency)
    host.set_active_cores(1)
    pooled: list[float] = []
    rhos: list[float] = []
    durations: list[float] = []
    for _ in range(reps):
        if params.flush_before:
            host.flush_caches()
        start = host.clock_seconds()
        duration = host.disk_io(
            params.direction, params.block_size, params.volume, params.sync_each_block
        )
        _, _, _, kept = _collect(host, start, start + duration, slot.label, trim)
        pooled.extend(kept)
        rhos.append(_window_rho(host, start, start + duration, trim, params.frequency))
        durations.append(duration)
    mean, stddev, count = _pooled(pooled)
    return DiskObservation(
        label=slot.label,
        operating_point=OperatingPoint(1, params.frequency),
        block_size=params.block_size,
        direction=params.direction,
        volume=params.volume,
        duration=math.fsum(durations) / len(durations),
        rho=math.fsum(rhos) / len(rhos),
        power=mean,
        stddev=stddev,
        count=count,
    )


def _run_net_slot(
    host: HostInterface,
    slot: PlannedSlot,
    params: NetSlotParams,
    slot_seconds: float,
    trim: float,
    reps: int,
) -> NetObservation:
    host.set_frequency(params.frequency)
    host.set_active_cores(1)
    pooled: list[float] = []
    rhos: list[float] = []
    for _ in range(reps):
        start = host.clock_seconds()
        host.net_transfer(params.direction, params.packet_size, params.rate, slot_seconds)
        end = host.clock_seconds()
        _, _, _, kept = _collect(host, start, end, slot.label, trim)
        pooled.extend(kept)
        rhos.append(_window_rho(host, start, end, trim, params.frequency))
    mean, stddev, count = _pooled(pooled)
    return NetObservation(
        label=slot.label,
        operating_point=OperatingPoint(1, params.frequency),
        packet_size=params.packet_size,
        direction=params.direction,
        rate=params.rate,
        duration=slot_seconds,
        rho=math.fsum(rhos) / len(rhos),
        power=mean,
        stddev=stddev,
        count=count,
    )
