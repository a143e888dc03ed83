"""Shared data model: operating points, fitted curves, component models,
server profiles, activity traces and energy estimates.

All values are kept in one internal unit system: watts, joules, bytes,
bits per second, Hz, and ACPS (active cycles per second). Conversions to
presentation units (MB/J, Mbps, GHz) happen only at I/O boundaries.

Every type is an immutable value object; instances are safe to share
across threads once constructed.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, RateOutOfDomain, SchemaVersionError

SCHEMA_VERSION = 1

DISK_DIRECTIONS = ("read", "write")
NET_DIRECTIONS = ("send", "receive")

# Dense sampling used when checking curve positivity over its domain.
_POSITIVITY_GRID = 257


def canonical_json(doc: dict) -> str:
    """Serialize a document deterministically (sorted keys, full float precision)."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_doc(doc: dict, path: str | Path) -> None:
    Path(path).write_text(canonical_json(doc), encoding="ascii")


def load_doc(path: str | Path, kind: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    check_doc(doc, kind)
    return doc


def check_doc(doc: dict, kind: str | None = None) -> None:
    """Validate the document envelope (kind tag and schema version)."""
    version = doc.get("schema_version")
    if not isinstance(version, int):
        raise FormatError("document has no integer schema_version")
    if version > SCHEMA_VERSION:
        raise SchemaVersionError(
            f"schema_version {version} is newer than supported ({SCHEMA_VERSION})"
        )
    if kind is not None and doc.get("kind") != kind:
        raise FormatError(f"expected document kind {kind!r}, got {doc.get('kind')!r}")


def fmt_num(value: float | int) -> str:
    """Shortest exact decimal form, used by every CSV writer."""
    if isinstance(value, bool):
        raise TypeError("bool is not a CSV number")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


@dataclass(frozen=True, order=True)
class OperatingPoint:
    """A (number of active cores, shared CPU clock) configuration."""

    cores: int
    frequency: float  # Hz, same on all cores

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError(f"cores must be >= 1, got {self.cores}")
        if not self.frequency > 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")

    @property
    def max_acps(self) -> float:
        """Upper bound on load: a core cannot execute more cycles than its clock."""
        return self.cores * self.frequency

    def to_doc(self) -> dict:
        return {"cores": self.cores, "frequency_hz": self.frequency}

    @classmethod
    def from_doc(cls, doc: dict) -> "OperatingPoint":
        return cls(cores=int(doc["cores"]), frequency=float(doc["frequency_hz"]))


@dataclass(frozen=True)
class LoadSample:
    """One aggregated calibration observation: measured load and power."""

    rho: float  # ACPS
    power: float  # watts
    operating_point: OperatingPoint
    stddev: float = 0.0  # watts
    count: int = 0  # samples behind the aggregate
    label: str = ""

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not self.power > 0:
            raise ValueError(f"power must be > 0, got {self.power}")
        if self.stddev < 0:
            raise ValueError(f"stddev must be >= 0, got {self.stddev}")
        # Hyperthreading-like effects can push measured cycles past the
        # nominal clock on real hosts, so this is a warning, not an error.
        if self.rho > self.operating_point.max_acps * (1 + 1e-9):
            warnings.warn(
                f"load {self.rho:.4g} ACPS exceeds cores x frequency "
                f"({self.operating_point.max_acps:.4g})",
                stacklevel=2,
            )

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "cores": self.operating_point.cores,
            "frequency_hz": self.operating_point.frequency,
            "rho_acps": self.rho,
            "power_w": self.power,
            "stddev_w": self.stddev,
            "count": self.count,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LoadSample":
        return cls(
            rho=float(doc["rho_acps"]),
            power=float(doc["power_w"]),
            operating_point=OperatingPoint(int(doc["cores"]), float(doc["frequency_hz"])),
            stddev=float(doc.get("stddev_w", 0.0)),
            count=int(doc.get("count", 0)),
            label=str(doc.get("label", "")),
        )


@dataclass(frozen=True)
class CpuPowerCurve:
    """Polynomial mapping load (ACPS) to baseline-inclusive power (watts).

    ``coefficients[k]`` has units W / ACPS^k; ``coefficients[0]`` is the
    baseline power the curve converges to as load tends to zero.
    """

    operating_point: OperatingPoint
    coefficients: tuple[float, ...]
    domain: tuple[float, float]  # [rho_min, rho_max] in ACPS
    fit_error: float = 0.0  # relative residual RMS, dimensionless

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not 1 <= self.degree <= 7:
            raise ValueError(f"degree must be in [1, 7], got {self.degree}")
        if not self.coefficients[0] > 0:
            raise ValueError(f"baseline coefficient must be > 0, got {self.coefficients[0]}")
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError(f"bad domain {self.domain}")
        for i in range(_POSITIVITY_GRID):
            rho = lo + (hi - lo) * i / (_POSITIVITY_GRID - 1)
            if not self.evaluate(rho) > 0:
                raise ValueError(f"curve is not positive at rho={rho:.6g}")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def baseline(self) -> float:
        return self.coefficients[0]

    def evaluate(self, rho: float) -> float:
        """Horner evaluation; exact at rho=0 by construction."""
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * rho + c
        return acc

    def contains(self, rho: float, rel_tol: float = 1e-9) -> bool:
        lo, hi = self.domain
        span = max(abs(lo), abs(hi), 1.0)
        return lo - rel_tol * span <= rho <= hi + rel_tol * span

    def to_doc(self) -> dict:
        return {
            "cores": self.operating_point.cores,
            "frequency_hz": self.operating_point.frequency,
            "coefficients": list(self.coefficients),
            "degree": self.degree,
            "domain_acps": list(self.domain),
            "fit_error": self.fit_error,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CpuPowerCurve":
        curve = cls(
            operating_point=OperatingPoint(int(doc["cores"]), float(doc["frequency_hz"])),
            coefficients=tuple(float(c) for c in doc["coefficients"]),
            domain=(float(doc["domain_acps"][0]), float(doc["domain_acps"][1])),
            fit_error=float(doc.get("fit_error", 0.0)),
        )
        if int(doc.get("degree", curve.degree)) != curve.degree:
            raise FormatError("stored degree does not match coefficient count")
        return curve


@dataclass(frozen=True)
class EnvelopePoint:
    rho: float
    value: float  # watts (minimal_power) or ACPS/J (maximal_efficiency)
    source: OperatingPoint


@dataclass(frozen=True)
class EnvelopeCurve:
    """Piecewise bound over all per-operating-point curves.

    ``kind`` is ``minimal_power`` (lower envelope of power) or
    ``maximal_efficiency`` (upper envelope of cycles-per-joule efficiency).
    Breakpoints are dense samples plus bisection-refined source switches.
    """

    kind: str
    breakpoints: tuple[EnvelopePoint, ...]

    def __post_init__(self):
        if self.kind not in ("minimal_power", "maximal_efficiency"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if len(self.breakpoints) < 1:
            raise ValueError("envelope needs at least one breakpoint")
        rhos = [p.rho for p in self.breakpoints]
        if any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise ValueError("breakpoints must be strictly increasing in rho")

    def value_at(self, rho: float) -> float:
        """Piecewise-linear interpolation; exact at stored breakpoints."""
        pts = self.breakpoints
        if rho <= pts[0].rho:
            return pts[0].value
        if rho >= pts[-1].rho:
            return pts[-1].value
        lo, hi = 0, len(pts) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pts[mid].rho <= rho:
                lo = mid
            else:
                hi = mid
        a, b = pts[lo], pts[hi]
        if b.rho == a.rho:
            return a.value
        t = (rho - a.rho) / (b.rho - a.rho)
        return a.value + t * (b.value - a.value)

    def sources(self) -> set[OperatingPoint]:
        return {p.source for p in self.breakpoints}

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "breakpoints": [
                {
                    "rho_acps": p.rho,
                    "value": p.value,
                    "source_cores": p.source.cores,
                    "source_frequency_hz": p.source.frequency,
                }
                for p in self.breakpoints
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EnvelopeCurve":
        return cls(
            kind=str(doc["kind"]),
            breakpoints=tuple(
                EnvelopePoint(
                    rho=float(p["rho_acps"]),
                    value=float(p["value"]),
                    source=OperatingPoint(int(p["source_cores"]), float(p["source_frequency_hz"])),
                )
                for p in doc["breakpoints"]
            ),
        )


@dataclass(frozen=True)
class DiskEntry:
    efficiency: float  # bytes per joule
    mean_power: float  # watts attributed to the disk

    def __post_init__(self):
        if not self.efficiency > 0:
            raise ValueError(f"disk efficiency must be > 0, got {self.efficiency}")


class DiskModel:
    """Disk efficiency per (frequency, block size, direction).

    Lookups at uncalibrated block sizes or frequencies interpolate
    bilinearly in (frequency, log block size); anything outside the grid
    hull is an error rather than an extrapolation.
    """

    def __init__(self, entries: dict[tuple[float, int, str], DiskEntry]):
        if not entries:
            raise ValueError("disk model needs at least one entry")
        for (freq, block, direction) in entries:
            if direction not in DISK_DIRECTIONS:
                raise ValueError(f"unknown disk direction {direction!r}")
            if not (freq > 0 and block > 0):
                raise ValueError("disk entry keys must be positive")
        self._entries = dict(entries)

    @property
    def entries(self) -> dict[tuple[float, int, str], DiskEntry]:
        return dict(self._entries)

    def grid(self, direction: str) -> tuple[list[float], list[int]]:
        freqs = sorted({f for (f, _, d) in self._entries if d == direction})
        blocks = sorted({b for (_, b, d) in self._entries if d == direction})
        return freqs, blocks

    def efficiency_at(self, frequency: float, block_size: int, direction: str) -> float:
        """Resolve an efficiency, interpolating between grid neighbours."""
        from .errors import UncalibratedBlockSize

        if direction not in DISK_DIRECTIONS:
            raise ValueError(f"unknown disk direction {direction!r}")
        key = (frequency, block_size, direction)
        if key in self._entries:
            return self._entries[key].efficiency
        freqs, blocks = self.grid(direction)
        if not freqs:
            raise UncalibratedBlockSize(f"no {direction} entries calibrated")
        if not (freqs[0] <= frequency <= freqs[-1]) or not (blocks[0] <= block_size <= blocks[-1]):
            raise UncalibratedBlockSize(
                f"({frequency:.4g} Hz, {block_size} B, {direction}) outside calibrated hull"
            )

        def _eff_at_freq(f: float, b: int) -> float:
            if (f, b, direction) in self._entries:
                return self._entries[(f, b, direction)].efficiency
            raise UncalibratedBlockSize(
                f"calibration grid has a hole at ({f:.4g} Hz, {b} B, {direction})"
            )

        f_lo, f_hi = _bracket(freqs, frequency)
        b_lo, b_hi = _bracket(blocks, block_size)
        tb = 0.0 if b_hi == b_lo else (
            (math.log(block_size) - math.log(b_lo)) / (math.log(b_hi) - math.log(b_lo))
        )
        eff_lo = _lerp(_eff_at_freq(f_lo, b_lo), _eff_at_freq(f_lo, b_hi), tb)
        if f_hi == f_lo:
            return eff_lo
        eff_hi = _lerp(_eff_at_freq(f_hi, b_lo), _eff_at_freq(f_hi, b_hi), tb)
        tf = (frequency - f_lo) / (f_hi - f_lo)
        return _lerp(eff_lo, eff_hi, tf)

    def shape_warnings(self, noise_slack: float = 0.02) -> list[str]:
        """Soft check: write efficiency should rise then saturate with block size.

        On the saturated plateau adjacent entries differ by less than
        measurement noise, so only drops beyond ``noise_slack`` count.
        """
        notes = []
        freqs, blocks = self.grid("write")
        for f in freqs:
            effs = [
                self._entries[(f, b, "write")].efficiency
                for b in blocks
                if (f, b, "write") in self._entries
            ]
            drops = [i for i in range(1, len(effs)) if effs[i] < effs[i - 1] * (1 - noise_slack)]
            if drops:
                notes.append(
                    f"write efficiency not monotone in block size at {f:.4g} Hz "
                    f"(drops at grid indices {drops})"
                )
        return notes

    def __eq__(self, other) -> bool:
        return isinstance(other, DiskModel) and self._entries == other._entries

    def to_doc(self) -> dict:
        return {
            "entries": [
                {
                    "frequency_hz": f,
                    "block_size_b": b,
                    "direction": d,
                    "efficiency_b_per_j": e.efficiency,
                    "mean_power_w": e.mean_power,
                }
                for (f, b, d), e in sorted(self._entries.items())
            ]
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DiskModel":
        return cls(
            {
                (float(r["frequency_hz"]), int(r["block_size_b"]), str(r["direction"])): DiskEntry(
                    efficiency=float(r["efficiency_b_per_j"]),
                    mean_power=float(r["mean_power_w"]),
                )
                for r in doc["entries"]
            }
        )


@dataclass(frozen=True)
class NetEntry:
    """Zero-intercept quadratic efficiency coefficients.

    ``beta1`` is in W^-1 and ``beta2`` in W^-1 * bps^-1, so that
    efficiency(rate) = beta1 * rate + beta2 * rate^2 comes out in bits/J
    for a rate in bits/s.
    """

    beta1: float
    beta2: float = 0.0

    def efficiency(self, rate: float) -> float:
        return self.beta1 * rate + self.beta2 * rate * rate


class NetworkModel:
    """NIC efficiency per (frequency, packet size, direction) with a shared rate domain."""

    def __init__(
        self,
        entries: dict[tuple[float, int, str], NetEntry],
        rate_domain: tuple[float, float],
    ):
        if not entries:
            raise ValueError("network model needs at least one entry")
        lo, hi = rate_domain
        if not (0 < lo <= hi):
            raise ValueError(f"bad rate domain {rate_domain}")
        for (freq, pkt, direction), entry in entries.items():
            if direction not in NET_DIRECTIONS:
                raise ValueError(f"unknown network direction {direction!r}")
            if not (freq > 0 and pkt > 0):
                raise ValueError("network entry keys must be positive")
            for rate in (lo, hi, _quad_extremum(entry, lo, hi)):
                if entry.efficiency(rate) < 0:
                    raise ValueError(
                        f"efficiency negative at {rate:.4g} bps for "
                        f"({freq:.4g} Hz, {pkt} B, {direction})"
                    )
        self._entries = dict(entries)
        self.rate_domain = (float(lo), float(hi))

    @property
    def entries(self) -> dict[tuple[float, int, str], NetEntry]:
        return dict(self._entries)

    def grid(self, direction: str) -> tuple[list[float], list[int]]:
        freqs = sorted({f for (f, _, d) in self._entries if d == direction})
        pkts = sorted({p for (_, p, d) in self._entries if d == direction})
        return freqs, pkts

    def coefficients_at(self, frequency: float, packet_size: int, direction: str) -> NetEntry:
        from .errors import UncalibratedPacketSize

        if direction not in NET_DIRECTIONS:
            raise ValueError(f"unknown network direction {direction!r}")
        key = (frequency, packet_size, direction)
        if key in self._entries:
            return self._entries[key]
        freqs, pkts = self.grid(direction)
        if not freqs:
            raise UncalibratedPacketSize(f"no {direction} entries calibrated")
        if not (freqs[0] <= frequency <= freqs[-1]) or not (pkts[0] <= packet_size <= pkts[-1]):
            raise UncalibratedPacketSize(
                f"({frequency:.4g} Hz, {packet_size} B, {direction}) outside calibrated hull"
            )

        def _entry(f: float, p: int) -> NetEntry:
            if (f, p, direction) in self._entries:
                return self._entries[(f, p, direction)]
            raise UncalibratedPacketSize(
                f"calibration grid has a hole at ({f:.4g} Hz, {p} B, {direction})"
            )

        f_lo, f_hi = _bracket(freqs, frequency)
        p_lo, p_hi = _bracket(pkts, packet_size)
        tp = 0.0 if p_hi == p_lo else (
            (math.log(packet_size) - math.log(p_lo)) / (math.log(p_hi) - math.log(p_lo))
        )
        tf = 0.0 if f_hi == f_lo else (frequency - f_lo) / (f_hi - f_lo)

        def _mix(attr: str) -> float:
            lo_val = _lerp(getattr(_entry(f_lo, p_lo), attr), getattr(_entry(f_lo, p_hi), attr), tp)
            if f_hi == f_lo:
                return lo_val
            hi_val = _lerp(getattr(_entry(f_hi, p_lo), attr), getattr(_entry(f_hi, p_hi), attr), tp)
            return _lerp(lo_val, hi_val, tf)

        return NetEntry(beta1=_mix("beta1"), beta2=_mix("beta2"))

    def efficiency_at(
        self, frequency: float, packet_size: int, direction: str, rate: float
    ) -> float:
        """Efficiency in bits/J at a rate inside the calibrated rate domain."""
        lo, hi = self.rate_domain
        if not (lo * (1 - 1e-9) <= rate <= hi * (1 + 1e-9)):
            raise RateOutOfDomain(
                f"rate {rate:.4g} bps outside calibrated domain [{lo:.4g}, {hi:.4g}]"
            )
        return self.coefficients_at(frequency, packet_size, direction).efficiency(rate)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NetworkModel)
            and self._entries == other._entries
            and self.rate_domain == other.rate_domain
        )

    def to_doc(self) -> dict:
        return {
            "rate_domain_bps": list(self.rate_domain),
            "entries": [
                {
                    "frequency_hz": f,
                    "packet_size_b": p,
                    "direction": d,
                    "beta1_per_w": e.beta1,
                    "beta2_per_w_bps": e.beta2,
                }
                for (f, p, d), e in sorted(self._entries.items())
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "NetworkModel":
        return cls(
            entries={
                (float(r["frequency_hz"]), int(r["packet_size_b"]), str(r["direction"])): NetEntry(
                    beta1=float(r["beta1_per_w"]),
                    beta2=float(r.get("beta2_per_w_bps", 0.0)),
                )
                for r in doc["entries"]
            },
            rate_domain=(float(doc["rate_domain_bps"][0]), float(doc["rate_domain_bps"][1])),
        )


@dataclass(frozen=True)
class ServerProfile:
    """The persisted bundle of fitted models for one server."""

    name: str
    frequencies: tuple[float, ...]
    max_cores: int
    cpu_curves: tuple[CpuPowerCurve, ...]
    baseline: float  # watts; consensus across per-curve zero-order coefficients
    baseline_spread: float = 0.0
    disk: DiskModel | None = None
    network: NetworkModel | None = None
    envelopes: dict[str, EnvelopeCurve] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        object.__setattr__(self, "cpu_curves", tuple(self.cpu_curves))
        if not self.cpu_curves:
            raise ValueError("profile needs at least one CPU curve")
        freq_set = set(self.frequencies)
        for curve in self.cpu_curves:
            op = curve.operating_point
            if op.frequency not in freq_set:
                raise ValueError(f"curve frequency {op.frequency:.6g} not in declared list")
            if op.cores > self.max_cores:
                raise ValueError(f"curve cores {op.cores} exceeds max_cores {self.max_cores}")
        alphas = [c.baseline for c in self.cpu_curves]
        if not (min(alphas) - 1e-9 <= self.baseline <= max(alphas) + 1e-9):
            raise ValueError("baseline must lie within per-curve zero-order coefficients")
        seen = set()
        for curve in self.cpu_curves:
            if curve.operating_point in seen:
                raise ValueError(f"duplicate curve for {curve.operating_point}")
            seen.add(curve.operating_point)

    def curve_for(self, operating_point: OperatingPoint) -> CpuPowerCurve | None:
        for curve in self.cpu_curves:
            if curve.operating_point == operating_point:
                return curve
        return None

    def to_doc(self) -> dict:
        doc = {
            "schema_version": self.schema_version,
            "kind": "server_profile",
            "name": self.name,
            "frequencies_hz": list(self.frequencies),
            "max_cores": self.max_cores,
            "baseline_w": self.baseline,
            "baseline_spread_w": self.baseline_spread,
            "cpu_curves": [c.to_doc() for c in self.cpu_curves],
            "disk": self.disk.to_doc() if self.disk is not None else None,
            "network": self.network.to_doc() if self.network is not None else None,
            "envelopes": {k: v.to_doc() for k, v in sorted(self.envelopes.items())} or None,
            "units": {
                "power": "W",
                "load": "ACPS",
                "disk_efficiency": "bytes/J",
                "network_efficiency": "bits/J from beta1[1/W] * R[bps] + beta2[1/(W*bps)] * R^2",
                "volumes": "bytes (converted to bits at the network boundary)",
            },
        }
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ServerProfile":
        check_doc(doc, "server_profile")
        envelopes = doc.get("envelopes") or {}
        return cls(
            name=str(doc["name"]),
            frequencies=tuple(float(f) for f in doc["frequencies_hz"]),
            max_cores=int(doc["max_cores"]),
            cpu_curves=tuple(CpuPowerCurve.from_doc(c) for c in doc["cpu_curves"]),
            baseline=float(doc["baseline_w"]),
            baseline_spread=float(doc.get("baseline_spread_w", 0.0)),
            disk=DiskModel.from_doc(doc["disk"]) if doc.get("disk") else None,
            network=NetworkModel.from_doc(doc["network"]) if doc.get("network") else None,
            envelopes={k: EnvelopeCurve.from_doc(v) for k, v in envelopes.items()},
            schema_version=int(doc["schema_version"]),
        )


@dataclass(frozen=True)
class Phase:
    """One segment of an application's activity trace.

    ``duration`` may be omitted when ``load_acps`` is given (duration is
    then active_cycles / load_acps). Net volumes may be None, meaning
    "derive as rate x duration"; an explicit 0 means no traffic.
    """

    active_cycles: float
    operating_point: OperatingPoint
    duration: float | None = None  # seconds
    disk_read_volume: float = 0.0  # bytes
    disk_write_volume: float = 0.0  # bytes
    net_send_volume: float | None = 0.0  # bytes
    net_recv_volume: float | None = 0.0  # bytes
    net_rate: float = 0.0  # bits per second
    packet_size: int = 0  # bytes
    block_size: int = 0  # bytes
    load_acps: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.active_cycles < 0:
            raise ValueError("active_cycles must be >= 0")
        for name in ("disk_read_volume", "disk_write_volume"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("net_send_volume", "net_recv_volume"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.duration is None and not self.load_acps:
            raise ValueError("phase needs a duration or a load_acps to derive it")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be > 0")

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "active_cycles": self.active_cycles,
            "duration_s": self.duration,
            "disk_read_volume_b": self.disk_read_volume,
            "disk_write_volume_b": self.disk_write_volume,
            "net_send_volume_b": self.net_send_volume,
            "net_recv_volume_b": self.net_recv_volume,
            "net_rate_bps": self.net_rate,
            "packet_size_b": self.packet_size,
            "block_size_b": self.block_size,
            "load_acps": self.load_acps,
            "cores": self.operating_point.cores,
            "frequency_hz": self.operating_point.frequency,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Phase":
        def _opt(key):
            value = doc.get(key)
            return None if value is None else float(value)

        return cls(
            active_cycles=float(doc["active_cycles"]),
            operating_point=OperatingPoint(int(doc["cores"]), float(doc["frequency_hz"])),
            duration=_opt("duration_s"),
            disk_read_volume=float(doc.get("disk_read_volume_b", 0.0)),
            disk_write_volume=float(doc.get("disk_write_volume_b", 0.0)),
            net_send_volume=_opt("net_send_volume_b"),
            net_recv_volume=_opt("net_recv_volume_b"),
            net_rate=float(doc.get("net_rate_bps", 0.0)),
            packet_size=int(doc.get("packet_size_b", 0)),
            block_size=int(doc.get("block_size_b", 0)),
            load_acps=_opt("load_acps"),
            label=str(doc.get("label", "")),
        )


@dataclass(frozen=True)
class ActivityTrace:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "activity_trace",
            "phases": [p.to_doc() for p in self.phases],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ActivityTrace":
        check_doc(doc, "activity_trace")
        return cls(phases=tuple(Phase.from_doc(p) for p in doc["phases"]))


@dataclass(frozen=True)
class PhaseEstimate:
    label: str
    duration: float
    load_acps: float
    e_baseline_cpu: float
    e_disk: float
    e_network: float

    @property
    def e_total(self) -> float:
        return self.e_baseline_cpu + self.e_disk + self.e_network

    def to_doc(self) -> dict:
        return {
            "label": self.label,
            "duration_s": self.duration,
            "load_acps": self.load_acps,
            "e_baseline_cpu_j": self.e_baseline_cpu,
            "e_disk_j": self.e_disk,
            "e_network_j": self.e_network,
            "e_total_j": self.e_total,
        }


@dataclass(frozen=True)
class EnergyEstimate:
    """Additive per-component energy for a whole trace.

    The baseline and CPU terms are reported jointly: the zero-load
    coefficient cannot be measured at true zero load, so splitting them
    would be fiction.
    """

    e_baseline_cpu: float
    e_disk: float
    e_network: float
    per_phase: tuple[PhaseEstimate, ...] = ()

    def __post_init__(self):
        for name in ("e_baseline_cpu", "e_disk", "e_network"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def e_total(self) -> float:
        return self.e_baseline_cpu + self.e_disk + self.e_network

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "energy_estimate",
            "e_baseline_cpu_j": self.e_baseline_cpu,
            "e_disk_j": self.e_disk,
            "e_network_j": self.e_network,
            "e_total_j": self.e_total,
            "per_phase": [p.to_doc() for p in self.per_phase],
        }

    def to_csv(self) -> str:
        lines = ["phase,duration_s,load_acps,e_baseline_cpu_j,e_disk_j,e_network_j,e_total_j"]
        for p in self.per_phase:
            lines.append(
                ",".join(
                    [
                        p.label,
                        fmt_num(p.duration),
                        fmt_num(p.load_acps),
                        fmt_num(p.e_baseline_cpu),
                        fmt_num(p.e_disk),
                        fmt_num(p.e_network),
                        fmt_num(p.e_total),
                    ]
                )
            )
        lines.append(
            ",".join(
                [
                    "TOTAL",
                    fmt_num(sum(p.duration for p in self.per_phase)),
                    "",
                    fmt_num(self.e_baseline_cpu),
                    fmt_num(self.e_disk),
                    fmt_num(self.e_network),
                    fmt_num(self.e_total),
                ]
            )
        )
        return "\n".join(lines) + "\n"


def _bracket(grid: list, value) -> tuple:
    """Neighbouring grid values around ``value`` (exact hits collapse)."""
    lo = grid[0]
    for g in grid:
        if g <= value:
            lo = g
        else:
            return lo, g
    return lo, lo


def _lerp(a: float, b: float, t: float) -> float:
    return a + (b - a) * t


def _quad_extremum(entry: NetEntry, lo: float, hi: float) -> float:
    """Rate of the quadratic's vertex clamped into [lo, hi]."""
    if entry.beta2 == 0:
        return lo
    vertex = -entry.beta1 / (2 * entry.beta2)
    return min(max(vertex, lo), hi)
