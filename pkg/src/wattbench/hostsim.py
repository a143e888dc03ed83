"""Synthetic server with a closed-form ground-truth power model.

Stands in for lab hardware: implements the host capability contract and
emits per-second power samples and tick snapshots that are exactly
consistent with its own configured model, so fitting and estimation can
be checked against known truth. All constants are synthetic; the default
configuration only mimics a mid-range 4-core Xeon workstation
qualitatively (concave CPU curves, ~84.5 W baseline, saturating write
efficiency, rate-independent NIC power).

Each emitted power sample is the average power over its one-second
interval, so summing samples equals the time-integrated energy.
"""

from __future__ import annotations

import bisect
import importlib.resources
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ActivityTrace, OperatingPoint, Phase, SCHEMA_VERSION, check_doc
from .errors import DomainViolation, FormatError
from .telemetry import CoreTicks, PowerSample, TickSnapshot, classify_ticks
from .workloads import HostInterface, udp_rate_cap

NEMESIS_FREQUENCIES = (
    1.596e9, 1.729e9, 1.862e9, 1.995e9, 2.128e9, 2.261e9,
    2.394e9, 2.527e9, 2.666e9, 2.793e9, 2.794e9,
)
SURVIVOR_FREQUENCIES = (1.2e9, 1.333e9, 1.467e9, 1.6e9, 1.733e9, 1.867e9, 2.0e9, 2.133e9)
ERDOS_FREQUENCIES = (1.4e9, 1.6e9, 1.8e9, 2.1e9, 2.3e9)


@dataclass(frozen=True)
class CpuShape:
    """Parametric recipe for per-configuration power polynomials.

    For m cores at frequency f with x = rho / (m*f):
      P(rho) = baseline + D * ((1+curvature)*x - curvature*x^2)
    with D = dynamic_unit_w * m^cores_exponent * (offset + gain*(f/f_max - center)^2).
    Single-core curves are linear (curvature 0), multi-core curves concave.
    """

    curvature: float = 0.35
    dynamic_unit_w: float = 30.0
    cores_exponent: float = 0.85
    freq_offset: float = 0.35
    freq_center: float = 0.55
    freq_gain: float = 1.6


@dataclass(frozen=True)
class DiskShape:
    read_power_w: float = 5.5
    read_throughput_bps: float = 120e6
    read_half_block_b: float = 512.0
    write_power_base_w: float = 6.0
    write_power_block_w: float = 2.5
    write_throughput_bps: float = 90e6
    write_half_block_b: float = 262144.0
    cpu_load_fraction: float = 0.05


@dataclass(frozen=True)
class NetShape:
    send_power_w: float = 3.2
    recv_power_w: float = 2.6
    freq_factor_base: float = 0.7
    freq_factor_slope: float = 0.6
    send_packet_base: float = 0.97
    send_packet_slope: float = 0.06
    recv_packet_base: float = 0.85
    recv_packet_slope: float = 0.3
    cycles_per_packet: float = 2000.0
    line_rate_bps: float = 1e9


@dataclass(frozen=True)
class GroundTruth:
    """Complete parametric truth for one simulated server."""

    name: str = "nemesis-like"
    frequencies: tuple[float, ...] = NEMESIS_FREQUENCIES
    max_cores: int = 4
    baseline: float = 84.5
    noise_sigma: float = 0.5  # watts, per power sample
    os_noise_ticks: int = 1  # active ticks/s per core even when idle
    cpu: CpuShape = field(default_factory=CpuShape)
    disk: DiskShape = field(default_factory=DiskShape)
    net: NetShape = field(default_factory=NetShape)
    # Optional explicit polynomials keyed by (cores, frequency); grids
    # without an entry fall back to the parametric recipe.
    cpu_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        if not self.frequencies or any(f <= 0 for f in self.frequencies):
            raise ValueError("frequencies must be positive")
        if self.max_cores < 1:
            raise ValueError("max_cores must be >= 1")
        if not self.baseline > 0:
            raise ValueError("baseline must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for op in self.operating_points():
            coeffs = self.cpu_coefficients(op)
            if op.cores >= 2 and len(coeffs) >= 3 and not all(c <= 0 for c in coeffs[2:]):
                raise ValueError(f"multi-core curve for {op} is not concave")

    def operating_points(self) -> list[OperatingPoint]:
        return [
            OperatingPoint(cores, frequency)
            for cores in range(1, self.max_cores + 1)
            for frequency in self.frequencies
        ]

    def cpu_coefficients(self, op: OperatingPoint) -> tuple[float, ...]:
        key = (op.cores, op.frequency)
        if key in self.cpu_overrides:
            return tuple(float(c) for c in self.cpu_overrides[key])
        shape = self.cpu
        phi = op.frequency / max(self.frequencies)
        dyn = (
            shape.dynamic_unit_w
            * op.cores**shape.cores_exponent
            * (shape.freq_offset + shape.freq_gain * (phi - shape.freq_center) ** 2)
        )
        top = op.max_acps
        if op.cores == 1:
            return (self.baseline, dyn / top)
        kappa = shape.curvature
        return (self.baseline, dyn * (1 + kappa) / top, -dyn * kappa / top**2)

    def cpu_power(self, op: OperatingPoint, rho: float) -> float:
        acc = 0.0
        for c in reversed(self.cpu_coefficients(op)):
            acc = acc * rho + c
        return acc

    def disk_throughput(self, frequency: float, block_size: int, direction: str) -> float:
        self.check_frequency(frequency)
        if block_size <= 0:
            raise DomainViolation(f"block size must be > 0, got {block_size}")
        d = self.disk
        if direction == "read":
            return d.read_throughput_bps * block_size / (block_size + d.read_half_block_b)
        if direction == "write":
            return d.write_throughput_bps * block_size / (block_size + d.write_half_block_b)
        raise DomainViolation(f"unknown disk direction {direction!r}")

    def disk_power(self, frequency: float, block_size: int, direction: str) -> float:
        self.check_frequency(frequency)
        d = self.disk
        if direction == "read":
            return d.read_power_w
        if direction == "write":
            saturation = block_size / (block_size + d.write_half_block_b)
            return d.write_power_base_w + d.write_power_block_w * saturation
        raise DomainViolation(f"unknown disk direction {direction!r}")

    def net_power(self, frequency: float, packet_size: int, direction: str) -> float:
        """Rate-independent NIC power (legacy Ethernet, no power-saving modes)."""
        self.check_frequency(frequency)
        if packet_size <= 0:
            raise DomainViolation(f"packet size must be > 0, got {packet_size}")
        n = self.net
        phi = frequency / max(self.frequencies)
        freq_factor = n.freq_factor_base + n.freq_factor_slope * phi
        s = packet_size / 1470.0
        if direction == "send":
            return n.send_power_w * freq_factor * (n.send_packet_base + n.send_packet_slope * s)
        if direction == "receive":
            return n.recv_power_w * freq_factor * (n.recv_packet_base + n.recv_packet_slope * s)
        raise DomainViolation(f"unknown network direction {direction!r}")

    def net_cpu_cycles(self, packet_size: int, rate: float) -> float:
        """Active cycles per second the protocol stack burns moving packets."""
        return self.net.cycles_per_packet * rate / (8.0 * packet_size)

    def true_power(
        self,
        rho: float,
        operating_point: OperatingPoint,
        disk: tuple[str, int] | None = None,
        net: tuple[str, int] | None = None,
    ) -> float:
        """Closed-form total power for a state: CPU polynomial plus addends."""
        self.check_frequency(operating_point.frequency)
        if operating_point.cores > self.max_cores:
            raise DomainViolation(
                f"{operating_point.cores} cores exceeds max {self.max_cores}"
            )
        if rho < 0 or rho > operating_point.max_acps * (1 + 1e-9):
            raise DomainViolation(
                f"rho {rho:.4g} outside [0, {operating_point.max_acps:.4g}]"
            )
        power = self.cpu_power(operating_point, rho)
        if disk is not None:
            power += self.disk_power(operating_point.frequency, disk[1], disk[0])
        if net is not None:
            power += self.net_power(operating_point.frequency, net[1], net[0])
        return power

    def check_frequency(self, frequency: float) -> None:
        if frequency not in self.frequencies:
            raise DomainViolation(
                f"frequency {frequency:.6g} Hz not in configured list"
            )

    def to_doc(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "ground_truth",
            "name": self.name,
            "frequencies_hz": list(self.frequencies),
            "max_cores": self.max_cores,
            "baseline_w": self.baseline,
            "noise_sigma_w": self.noise_sigma,
            "os_noise_ticks": self.os_noise_ticks,
            "cpu": {
                "curvature": self.cpu.curvature,
                "dynamic_unit_w": self.cpu.dynamic_unit_w,
                "cores_exponent": self.cpu.cores_exponent,
                "freq_offset": self.cpu.freq_offset,
                "freq_center": self.cpu.freq_center,
                "freq_gain": self.cpu.freq_gain,
            },
            "disk": {
                "read_power_w": self.disk.read_power_w,
                "read_throughput_bps": self.disk.read_throughput_bps,
                "read_half_block_b": self.disk.read_half_block_b,
                "write_power_base_w": self.disk.write_power_base_w,
                "write_power_block_w": self.disk.write_power_block_w,
                "write_throughput_bps": self.disk.write_throughput_bps,
                "write_half_block_b": self.disk.write_half_block_b,
                "cpu_load_fraction": self.disk.cpu_load_fraction,
            },
            "net": {
                "send_power_w": self.net.send_power_w,
                "recv_power_w": self.net.recv_power_w,
                "freq_factor_base": self.net.freq_factor_base,
                "freq_factor_slope": self.net.freq_factor_slope,
                "send_packet_base": self.net.send_packet_base,
                "send_packet_slope": self.net.send_packet_slope,
                "recv_packet_base": self.net.recv_packet_base,
                "recv_packet_slope": self.net.recv_packet_slope,
                "cycles_per_packet": self.net.cycles_per_packet,
                "line_rate_bps": self.net.line_rate_bps,
            },
            "cpu_overrides": [
                {"cores": cores, "frequency_hz": frequency, "coefficients": list(coeffs)}
                for (cores, frequency), coeffs in sorted(self.cpu_overrides.items())
            ],
        }
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "GroundTruth":
        check_doc(doc, "ground_truth")
        cpu = doc.get("cpu", {})
        disk = doc.get("disk", {})
        net = doc.get("net", {})
        overrides = {
            (int(o["cores"]), float(o["frequency_hz"])): tuple(
                float(c) for c in o["coefficients"]
            )
            for o in doc.get("cpu_overrides", [])
        }
        return cls(
            name=str(doc["name"]),
            frequencies=tuple(float(f) for f in doc["frequencies_hz"]),
            max_cores=int(doc["max_cores"]),
            baseline=float(doc["baseline_w"]),
            noise_sigma=float(doc.get("noise_sigma_w", 0.5)),
            os_noise_ticks=int(doc.get("os_noise_ticks", 1)),
            cpu=CpuShape(
                curvature=float(cpu.get("curvature", 0.35)),
                dynamic_unit_w=float(cpu.get("dynamic_unit_w", 30.0)),
                cores_exponent=float(cpu.get("cores_exponent", 0.85)),
                freq_offset=float(cpu.get("freq_offset", 0.35)),
                freq_center=float(cpu.get("freq_center", 0.55)),
                freq_gain=float(cpu.get("freq_gain", 1.6)),
            ),
            disk=DiskShape(**{k: float(v) for k, v in disk.items()}) if disk else DiskShape(),
            net=NetShape(**{k: float(v) for k, v in net.items()}) if net else NetShape(),
            cpu_overrides=overrides,
        )


def default_ground_truth() -> GroundTruth:
    return GroundTruth()


def load_ground_truth(selector: str) -> GroundTruth:
    """Resolve ``default``, a bundled server name, or a config file path."""
    bundled = {"default": "nemesis", "nemesis": "nemesis", "survivor": "survivor",
               "erdos": "erdos"}
    if selector in bundled:
        resource = importlib.resources.files("wattbench.data") / f"{bundled[selector]}.json"
        return GroundTruth.from_doc(json.loads(resource.read_text(encoding="ascii")))
    path = Path(selector)
    if not path.exists():
        raise FormatError(f"unknown simulator config {selector!r} (not bundled, not a file)")
    return GroundTruth.from_doc(json.loads(path.read_text(encoding="ascii")))


@dataclass(frozen=True)
class _Segment:
    start: int  # integer second
    seconds: int
    deltas: tuple[CoreTicks, ...]  # per-core counter increase per second
    cumulative_start: tuple[CoreTicks, ...]


def _scaled_add(base: CoreTicks, delta: CoreTicks, k: int) -> CoreTicks:
    return CoreTicks(*(b + d * k for b, d in zip(base, delta)))


def _split_active(active: int) -> tuple[int, int, int, int]:
    """Deterministic user/system/irq/softirq split of an active tick count."""
    user = active * 7 // 10
    system = active * 2 // 10
    irq = active // 20
    softirq = active - user - system - irq
    return user, system, irq, softirq


class SimulatedHost(HostInterface):
    """Host contract implementation backed by a GroundTruth model."""

    def __init__(self, truth: GroundTruth, seed: int = 42, noise_sigma: float | None = None):
        self.truth = truth
        self._rng = np.random.default_rng(seed)
        self._sigma = truth.noise_sigma if noise_sigma is None else float(noise_sigma)
        self._frequency = truth.frequencies[0]
        self._active_cores = 1
        self._clock = 0
        self._power_log: list[PowerSample] = []
        self._true_log: list[float] = []
        self._segments: list[_Segment] = []
        self._segment_starts: list[int] = []
        self._cumulative = tuple(CoreTicks(0, 0, 0, 0, 0, 0, 0) for _ in range(truth.max_cores))

    # -- host contract ----------------------------------------------------

    def set_frequency(self, frequency: float) -> None:
        self.truth.check_frequency(frequency)
        self._frequency = frequency

    def set_active_cores(self, cores: int) -> None:
        if not 1 <= cores <= self.truth.max_cores:
            raise DomainViolation(
                f"active cores must be in [1, {self.truth.max_cores}], got {cores}"
            )
        self._active_cores = cores

    def apply_cpu_load(self, fraction: float, cores: int, duration: float) -> None:
        if not 0 <= fraction <= 1:
            raise DomainViolation(f"load fraction must be in [0, 1], got {fraction}")
        if not 1 <= cores <= self._active_cores:
            raise DomainViolation(
                f"loaded cores must be in [1, {self._active_cores}], got {cores}"
            )
        self._run_segment(self._whole_seconds(duration), fraction, cores)

    def disk_io(
        self, direction: str, block_size: int, volume: float, sync_each_block: bool
    ) -> float:
        # sync_each_block is assumed by the model: throughput already
        # reflects committed-per-block operation.
        if volume <= 0:
            raise DomainViolation(f"volume must be > 0, got {volume}")
        throughput = self.truth.disk_throughput(self._frequency, block_size, direction)
        duration = volume / throughput
        full, frac = int(duration), duration - int(duration)
        if full:
            self._run_segment(full, 0.0, 1, disk=(direction, block_size, 1.0))
        if frac > 1e-12:
            self._run_segment(1, 0.0, 1, disk=(direction, block_size, frac))
        return duration

    def flush_caches(self) -> None:
        self._run_segment(1, 0.0, 1)

    def net_transfer(self, direction: str, packet_size: int, rate: float, duration: float) -> None:
        cap = udp_rate_cap(packet_size, self.truth.net.line_rate_bps)
        if not 0 < rate <= cap:
            raise DomainViolation(
                f"rate {rate / 1e6:.6g} Mbps not achievable for {packet_size}-B packets "
                f"(cap {cap / 1e6:.6g} Mbps)"
            )
        self._run_segment(
            self._whole_seconds(duration), 0.0, 1, net=(direction, packet_size, rate)
        )

    def read_ticks(self) -> TickSnapshot:
        return self.tick_snapshot_at(self._clock)

    def power_stream(self) -> list[PowerSample]:
        return self._power_log

    def tick_snapshot_at(self, timestamp: float) -> TickSnapshot:
        t = int(timestamp)
        if t < 0 or t > self._clock:
            raise DomainViolation(f"no snapshot at t={timestamp} (clock={self._clock})")
        if not self._segments or t == 0:
            zero = tuple(CoreTicks(0, 0, 0, 0, 0, 0, 0) for _ in range(self.truth.max_cores))
            return TickSnapshot(float(t), zero if t == 0 else self._cumulative)
        index = bisect.bisect_right(self._segment_starts, t - 1) - 1
        segment = self._segments[max(index, 0)]
        k = min(t - segment.start, segment.seconds)
        cores = tuple(
            _scaled_add(base, delta, k)
            for base, delta in zip(segment.cumulative_start, segment.deltas)
        )
        return TickSnapshot(float(t), cores)

    def clock_seconds(self) -> float:
        return float(self._clock)

    # -- simulation internals ----------------------------------------------

    def run_idle(self, seconds: float) -> None:
        self._run_segment(self._whole_seconds(seconds), 0.0, 1)

    def true_energy_between(self, start: float, end: float) -> float:
        """Noise-free energy over [start, end) in joules (integer-second window)."""
        lo, hi = int(start), int(end)
        if not 0 <= lo <= hi <= self._clock:
            raise DomainViolation(f"window [{start}, {end}) outside simulated time")
        return math.fsum(self._true_log[lo:hi])

    @staticmethod
    def _whole_seconds(duration: float) -> int:
        seconds = int(round(duration))
        if seconds < 1 or abs(duration - seconds) > 1e-9:
            raise DomainViolation(f"duration must be a whole positive second count: {duration}")
        return seconds

    def _run_segment(
        self,
        seconds: int,
        cpu_fraction: float,
        loaded_cores: int,
        disk: tuple[str, int, float] | None = None,
        net: tuple[str, int, float] | None = None,
    ) -> None:
        truth = self.truth
        frequency = self._frequency
        total_cores = truth.max_cores
        active_cores = self._active_cores

        # OS-noise floor runs on the active cores; inactive cores are fully
        # idle, so measured load stays within cores x frequency.
        active = [truth.os_noise_ticks if core < active_cores else 0
                  for core in range(total_cores)]
        cpu_ticks = int(cpu_fraction * 100 * loaded_cores)
        base, remainder = divmod(cpu_ticks, loaded_cores)
        for core in range(loaded_cores):
            active[core] += base + (1 if core < remainder else 0)
        extra = 0
        disk_weight = 0.0
        if disk is not None:
            disk_weight = disk[2]
            extra += int(truth.disk.cpu_load_fraction * 100 * disk_weight)
        if net is not None:
            cycles = truth.net_cpu_cycles(net[1], net[2])
            extra += int(cycles * 100 / frequency)
        for core in range(active_cores):
            if extra <= 0:
                break
            take = min(extra, 100 - min(active[core], 100))
            active[core] += take
            extra -= take
        active = [min(a, 100) for a in active]

        total_active = sum(active)
        rho = total_active * frequency / 100.0
        op = OperatingPoint(self._active_cores, frequency)
        power = truth.cpu_power(op, rho)
        if disk is not None:
            power += truth.disk_power(frequency, disk[1], disk[0]) * disk_weight
        if net is not None:
            power += truth.net_power(frequency, net[1], net[0])

        deltas = []
        for index, a in enumerate(active):
            passive = 100 - a
            iowait = min(passive, 5) if (disk is not None and index == 0) else 0
            user, system, irq, softirq = _split_active(a)
            deltas.append(
                CoreTicks(
                    user=user, nice=0, system=system, irq=irq, softirq=softirq,
                    iowait=iowait, idle=passive - iowait,
                )
            )
        deltas = tuple(deltas)

        if self._sigma > 0:
            noise = self._rng.standard_normal(seconds)
            watts = power + self._sigma * noise
        else:
            watts = np.full(seconds, power)
        start = self._clock
        self._power_log.extend(
            PowerSample(float(start + k), float(watts[k])) for k in range(seconds)
        )
        self._true_log.extend([power] * seconds)
        self._segments.append(
            _Segment(
                start=start, seconds=seconds, deltas=deltas,
                cumulative_start=self._cumulative,
            )
        )
        self._segment_starts.append(start)
        self._cumulative = tuple(
            _scaled_add(base, delta, seconds)
            for base, delta in zip(self._cumulative, deltas)
        )
        self._clock = start + seconds


@dataclass(frozen=True)
class TimelineSegment:
    """One constant-state stretch for emit_samples()."""

    seconds: int
    load_fraction: float = 0.0
    loaded_cores: int = 1
    disk: tuple[str, int] | None = None  # (direction, block size); active all segment
    net: tuple[str, int, float] | None = None  # (direction, packet size, rate)


def emit_samples(
    truth: GroundTruth,
    operating_point: OperatingPoint,
    timeline: list[TimelineSegment],
    noise_sigma: float | None = None,
    seed: int = 42,
) -> tuple[list[PowerSample], list[TickSnapshot], SimulatedHost]:
    """Run a state timeline; returns per-second samples, snapshots, and the host.

    Same seed, same timeline: identical streams.
    """
    host = SimulatedHost(truth, seed=seed, noise_sigma=noise_sigma)
    host.set_frequency(operating_point.frequency)
    host.set_active_cores(operating_point.cores)
    for segment in timeline:
        disk = (segment.disk[0], segment.disk[1], 1.0) if segment.disk else None
        host._run_segment(
            segment.seconds, segment.load_fraction, segment.loaded_cores,
            disk=disk, net=segment.net,
        )
    snapshots = [host.tick_snapshot_at(t) for t in range(host._clock + 1)]
    return list(host.power_stream()), snapshots, host


@dataclass(frozen=True)
class ApplicationRun:
    """A simulated multi-phase application plus its measured ground truth."""

    trace: ActivityTrace
    samples: tuple[PowerSample, ...]
    true_energy: float  # time-integrated, noise-free joules
    duration: float


def simulate_application(
    truth: GroundTruth,
    operating_point: OperatingPoint,
    net_direction: str,
    packet_size: int,
    rate: float,
    iterations: int = 10,
    phase_seconds: int = 30,
    block_size: int = 64 * 1024 * 1024,
    io_seconds: int = 5,
    seed: int = 42,
    noise_sigma: float | None = None,
) -> ApplicationRun:
    """Run a pagerank-like iterative workload: CPU phases with disk I/O
    bursts and continuous UDP traffic alongside.

    Returns the activity trace an application-side logger would record
    (cycles, durations, volumes) together with the true energy.
    """
    if phase_seconds <= 2 * io_seconds:
        raise ValueError("phase_seconds must leave room after the two I/O bursts")
    host = SimulatedHost(truth, seed=seed, noise_sigma=noise_sigma)
    host.set_frequency(operating_point.frequency)
    host.set_active_cores(operating_point.cores)
    frequency = operating_point.frequency
    net = (net_direction, packet_size, rate)
    read_volume = truth.disk_throughput(frequency, block_size, "read") * io_seconds
    write_volume = truth.disk_throughput(frequency, block_size, "write") * io_seconds

    phases: list[Phase] = []
    for iteration in range(iterations):
        load = 0.35 + 0.05 * (iteration % 5)
        start = host.clock_seconds()
        before = host.read_ticks()
        plain = phase_seconds - 2 * io_seconds
        host._run_segment(io_seconds, load, operating_point.cores,
                          disk=("read", block_size, 1.0), net=net)
        host._run_segment(io_seconds, load, operating_point.cores,
                          disk=("write", block_size, 1.0), net=net)
        host._run_segment(plain, load, operating_point.cores, net=net)
        after = host.read_ticks()
        duration = host.clock_seconds() - start
        active, _ = classify_ticks(before, after)
        cycles = active * frequency / 100.0
        send_volume = rate * duration / 8.0 if net_direction == "send" else 0.0
        recv_volume = rate * duration / 8.0 if net_direction == "receive" else 0.0
        phases.append(
            Phase(
                label=f"iter{iteration}",
                active_cycles=cycles,
                operating_point=operating_point,
                duration=duration,
                disk_read_volume=read_volume,
                disk_write_volume=write_volume,
                net_send_volume=send_volume,
                net_recv_volume=recv_volume,
                net_rate=rate,
                packet_size=packet_size,
                block_size=block_size,
            )
        )
    total = host.clock_seconds()
    return ApplicationRun(
        trace=ActivityTrace(phases=tuple(phases)),
        samples=tuple(host.power_stream()),
        true_energy=host.true_energy_between(0, total),
        duration=total,
    )
