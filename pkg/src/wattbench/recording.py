"""Raw sweep recording and re-ingestion.

A recorded sweep directory holds one power CSV and one tick CSV per
slot plus a manifest; re-ingesting it reproduces the aggregation that
live execution would have done. This is the path for data captured on
real hardware (or dumped by the simulator for test fixtures).

Layout:
    record.json        manifest: dataset meta + per-slot windows/params
    <stem>.power.csv   `seconds,watts` per sample
    <stem>.ticks.csv   `seconds,core,user,nice,system,irq,softirq,iowait,idle`
    truth.json         optional; simulator ground truth for assertions
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from pathlib import Path

from .core import (
    LoadSample,
    OperatingPoint,
    SCHEMA_VERSION,
    check_doc,
    fmt_num,
    load_doc,
    save_doc,
)
from .errors import WattbenchError
from .telemetry import (
    TickSnapshot,
    Timeslot,
    classify_ticks,
    parse_power_stream,
    parse_tick_stream,
    slot_statistics,
)
from .workloads import (
    CalibrationDataset,
    CpuSlotParams,
    DatasetMeta,
    DiskObservation,
    DiskSlotParams,
    HostInterface,
    NetObservation,
    NetSlotParams,
    SlotFailure,
    SweepPlan,
)


def _stem(label: str) -> str:
    return label.replace("/", "-").replace(".", "_")


@dataclass(frozen=True)
class RecordedSlot:
    label: str
    stem: str
    kind: str  # cpu | disk | net
    start: float
    end: float
    params: dict  # flat copy of the planned parameters
    duration: float  # actual operation duration (disk ops may differ from the window)

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "stem": self.stem,
            "kind": self.kind,
            "start_s": self.start,
            "end_s": self.end,
            "duration_s": self.duration,
            "params": self.params,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RecordedSlot":
        return cls(
            label=str(doc["label"]),
            stem=str(doc["stem"]),
            kind=str(doc["kind"]),
            start=float(doc["start_s"]),
            end=float(doc["end_s"]),
            params=dict(doc["params"]),
            duration=float(doc["duration_s"]),
        )


def run_and_record(
    plan: SweepPlan,
    host: HostInterface,
    meta: DatasetMeta,
) -> tuple[dict, dict[str, tuple[str, str]]]:
    """Execute a plan once, capturing each slot's raw streams.

    Returns the manifest document and a stem -> (power CSV, ticks CSV)
    map; ingest_recorded() on the pair reproduces the aggregation live
    execution would have done.
    """
    streams: dict[str, tuple[str, str]] = {}
    slots: list[RecordedSlot] = []
    for slot in plan.slots:
        params = slot.params
        if isinstance(params, CpuSlotParams):
            host.set_frequency(params.frequency)
            host.set_active_cores(params.cores)
            start = host.clock_seconds()
            host.apply_cpu_load(params.target_load_fraction, params.cores, plan.slot_seconds)
            end = host.clock_seconds()
            duration = end - start
            kind = "cpu"
            flat = {
                "cores": params.cores,
                "frequency_hz": params.frequency,
                "target_load_fraction": params.target_load_fraction,
            }
        elif isinstance(params, DiskSlotParams):
            host.set_frequency(params.frequency)
            host.set_active_cores(1)
            if params.flush_before:
                host.flush_caches()
            start = host.clock_seconds()
            duration = host.disk_io(
                params.direction, params.block_size, params.volume, params.sync_each_block
            )
            end = start + duration
            kind = "disk"
            flat = {
                "frequency_hz": params.frequency,
                "block_size_b": params.block_size,
                "volume_b": params.volume,
                "direction": params.direction,
            }
        else:
            assert isinstance(params, NetSlotParams)
            host.set_frequency(params.frequency)
            host.set_active_cores(1)
            start = host.clock_seconds()
            host.net_transfer(params.direction, params.packet_size, params.rate, plan.slot_seconds)
            end = host.clock_seconds()
            duration = end - start
            kind = "net"
            flat = {
                "frequency_hz": params.frequency,
                "packet_size_b": params.packet_size,
                "rate_bps": params.rate,
                "direction": params.direction,
            }

        stem = _stem(slot.label)
        stream = host.power_stream()
        lo = bisect.bisect_left(stream, start, key=lambda s: s.timestamp)
        hi = bisect.bisect_left(stream, math.ceil(end), key=lambda s: s.timestamp)
        power_lines = [f"{fmt_num(s.timestamp)},{fmt_num(s.watts)}" for s in stream[lo:hi]]
        tick_lines = []
        for t in range(int(start), int(math.ceil(end)) + 1):
            snap = host.tick_snapshot_at(t)
            for core, counters in enumerate(snap.cores):
                tick_lines.append(
                    ",".join(
                        [
                            fmt_num(snap.timestamp),
                            str(core),
                            str(counters.user),
                            str(counters.nice),
                            str(counters.system),
                            str(counters.irq),
                            str(counters.softirq),
                            str(counters.iowait),
                            str(counters.idle),
                        ]
                    )
                )
        streams[stem] = ("\n".join(power_lines) + "\n", "\n".join(tick_lines) + "\n")
        slots.append(
            RecordedSlot(
                label=slot.label, stem=stem, kind=kind, start=start, end=end,
                params=flat, duration=duration,
            )
        )

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "recorded_sweep",
        "meta": meta.to_doc(),
        "slots": [s.to_doc() for s in slots],
    }
    return manifest, streams


def write_recording(
    out_dir: str | Path,
    manifest: dict,
    streams: dict[str, tuple[str, str]],
    truth_doc: dict | None = None,
) -> Path:
    """Persist a recorded sweep as the documented directory layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stem, (power_text, ticks_text) in streams.items():
        (out / f"{stem}.power.csv").write_text(power_text, encoding="ascii")
        (out / f"{stem}.ticks.csv").write_text(ticks_text, encoding="ascii")
    save_doc(manifest, out / "record.json")
    if truth_doc is not None:
        save_doc(truth_doc, out / "truth.json")
    return out


def _snapshot_lookup(snapshots: list[TickSnapshot], timestamp: float) -> TickSnapshot:
    index = bisect.bisect_left(snapshots, timestamp, key=lambda s: s.timestamp)
    if index >= len(snapshots) or snapshots[index].timestamp != timestamp:
        raise WattbenchError(f"no recorded tick snapshot at t={timestamp}")
    return snapshots[index]


def _window_rho_recorded(
    snapshots: list[TickSnapshot], start: float, end: float, trim: float, frequency: float
) -> float:
    lo = math.ceil(start + trim)
    hi = math.floor(end - trim)
    if hi <= lo:
        lo, hi = math.floor(start), math.ceil(end)
    before = _snapshot_lookup(snapshots, lo)
    after = _snapshot_lookup(snapshots, hi)
    active, _ = classify_ticks(before, after)
    return (active * frequency / 100.0) / (hi - lo)


def ingest_recorded(
    manifest: dict, streams: dict[str, tuple[str, str]]
) -> CalibrationDataset:
    """Aggregate recorded raw streams into a calibration dataset.

    ``streams`` maps a slot stem to its (power CSV text, ticks CSV text).
    Slots with missing or unparseable recordings become failures, not
    errors: a partially recorded sweep still calibrates what it can.
    """
    check_doc(manifest, "recorded_sweep")
    meta = DatasetMeta.from_doc(manifest["meta"])
    trim = meta.trim_seconds
    cpu: list[LoadSample] = []
    disk: list[DiskObservation] = []
    net: list[NetObservation] = []
    failures: list[SlotFailure] = []

    for doc in manifest["slots"]:
        slot = RecordedSlot.from_doc(doc)
        try:
            if slot.stem not in streams:
                raise WattbenchError("recording missing")
            power_text, ticks_text = streams[slot.stem]
            samples = parse_power_stream(power_text)
            snapshots = parse_tick_stream(ticks_text)
            window = Timeslot(slot.start, slot.end, slot.label)
            mean, stddev, count = slot_statistics(samples, window, trim)
            frequency = float(slot.params["frequency_hz"])
            rho = _window_rho_recorded(snapshots, slot.start, slot.end, trim, frequency)
            if slot.kind == "cpu":
                op = OperatingPoint(int(slot.params["cores"]), frequency)
                cpu.append(
                    LoadSample(
                        rho=rho, power=mean, operating_point=op,
                        stddev=stddev, count=count, label=slot.label,
                    )
                )
            elif slot.kind == "disk":
                disk.append(
                    DiskObservation(
                        label=slot.label,
                        operating_point=OperatingPoint(1, frequency),
                        block_size=int(slot.params["block_size_b"]),
                        direction=str(slot.params["direction"]),
                        volume=float(slot.params["volume_b"]),
                        duration=slot.duration,
                        rho=rho, power=mean, stddev=stddev, count=count,
                    )
                )
            elif slot.kind == "net":
                net.append(
                    NetObservation(
                        label=slot.label,
                        operating_point=OperatingPoint(1, frequency),
                        packet_size=int(slot.params["packet_size_b"]),
                        direction=str(slot.params["direction"]),
                        rate=float(slot.params["rate_bps"]),
                        duration=slot.duration,
                        rho=rho, power=mean, stddev=stddev, count=count,
                    )
                )
            else:
                raise WattbenchError(f"unknown recorded slot kind {slot.kind!r}")
        except WattbenchError as exc:
            failures.append(SlotFailure(slot.label, f"{type(exc).__name__}: {exc}"))
    return CalibrationDataset(
        meta=meta,
        cpu_samples=tuple(cpu),
        disk_observations=tuple(disk),
        net_observations=tuple(net),
        failures=tuple(failures),
    )


def read_recorded_dir(path: str | Path) -> tuple[dict, dict[str, tuple[str, str]]]:
    """Load a recorded sweep directory into an ingestible payload."""
    root = Path(path)
    manifest = load_doc(root / "record.json", "recorded_sweep")
    streams: dict[str, tuple[str, str]] = {}
    for doc in manifest["slots"]:
        stem = str(doc["stem"])
        power = root / f"{stem}.power.csv"
        ticks = root / f"{stem}.ticks.csv"
        if power.exists() and ticks.exists():
            streams[stem] = (
                power.read_text(encoding="ascii"),
                ticks.read_text(encoding="ascii"),
            )
    return manifest, streams
