"""Application energy estimation from activity traces.

Energy is modeled additively: baseline+CPU energy from the fitted power
polynomial at the phase's (assumed constant) load, disk energy as
volume over efficiency, and network energy as volume over the fitted
rate-dependent efficiency. Per-phase estimates sum into totals.

All functions are pure over an immutable profile and trace.
"""

from __future__ import annotations

import math
from typing import Sequence

from .core import (
    ActivityTrace,
    EnergyEstimate,
    OperatingPoint,
    Phase,
    PhaseEstimate,
    ServerProfile,
    fmt_num,
)
from .errors import (
    InsufficientSamples,
    LoadOutOfDomain,
    ParseError,
    RateOutOfDomain,
    UncalibratedBlockSize,
    UncalibratedOperatingPoint,
    UncalibratedPacketSize,
    WattbenchError,
)
from .telemetry import PowerSample


def estimate_runtime(active_cycles: float, load: float) -> float:
    """Running time implied by a cycle budget at a given load: C / rho."""
    if not active_cycles > 0:
        raise ValueError(f"active_cycles must be > 0, got {active_cycles}")
    if not load > 0:
        raise ValueError(f"load must be > 0, got {load}")
    return active_cycles / load


def estimate_load(active_cycles: float, duration: float) -> float:
    """Mean load over a phase: C / T. Inverse of estimate_runtime."""
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if active_cycles < 0:
        raise ValueError(f"active_cycles must be >= 0, got {active_cycles}")
    return active_cycles / duration


def estimate_cpu_baseline_energy(
    profile: ServerProfile,
    operating_point: OperatingPoint,
    rho_app: float,
    c_app: float,
) -> float:
    """Joint baseline+CPU energy: P(rho_app) * C_app / rho_app.

    The two terms are inseparable in measurement (true zero load cannot
    be run), so they are estimated and reported together.
    """
    if not rho_app > 0:
        raise ValueError(f"rho_app must be > 0, got {rho_app}")
    if not c_app > 0:
        raise ValueError(f"c_app must be > 0, got {c_app}")
    curve = profile.curve_for(operating_point)
    if curve is None:
        raise UncalibratedOperatingPoint(
            f"no curve for {operating_point.cores} cores @ "
            f"{operating_point.frequency / 1e9:.6g} GHz"
        )
    if not curve.contains(rho_app):
        raise LoadOutOfDomain(
            f"load {rho_app:.6g} ACPS outside calibrated domain "
            f"[{curve.domain[0]:.6g}, {curve.domain[1]:.6g}]"
        )
    return curve.evaluate(rho_app) * c_app / rho_app


def estimate_disk_energy(
    profile: ServerProfile,
    operating_point: OperatingPoint,
    block_size: int,
    v_read: float,
    v_write: float,
) -> float:
    """Disk energy: read and write volumes over their efficiencies."""
    if v_read < 0 or v_write < 0:
        raise ValueError("disk volumes must be >= 0")
    if v_read == 0 and v_write == 0:
        return 0.0
    if profile.disk is None:
        raise UncalibratedBlockSize("profile carries no disk model")
    energy = 0.0
    for direction, volume in (("read", v_read), ("write", v_write)):
        if volume == 0:
            continue
        efficiency = profile.disk.efficiency_at(
            operating_point.frequency, block_size, direction
        )
        energy += volume / efficiency
    return energy


def estimate_net_energy(
    profile: ServerProfile,
    operating_point: OperatingPoint,
    packet_size: int,
    rate: float,
    v_send: float,
    v_recv: float,
) -> float:
    """Network energy: per-direction volumes over beta1*R + beta2*R^2.

    Volumes are byte counts; they are converted to bits here because the
    fitted efficiencies are in bits per joule.
    """
    if v_send < 0 or v_recv < 0:
        raise ValueError("network volumes must be >= 0")
    if v_send == 0 and v_recv == 0:
        return 0.0
    if profile.network is None:
        raise UncalibratedPacketSize("profile carries no network model")
    energy = 0.0
    for direction, volume in (("send", v_send), ("receive", v_recv)):
        if volume == 0:
            continue
        efficiency = profile.network.efficiency_at(
            operating_point.frequency, packet_size, direction, rate
        )
        if efficiency <= 0:
            raise RateOutOfDomain(
                f"fitted efficiency not positive at {rate:.6g} bps"
            )
        energy += volume * 8.0 / efficiency
    return energy


def _resolve_phase(phase: Phase) -> tuple[float, float, float, float]:
    """(duration, rho, net send bytes, net recv bytes) for one phase."""
    if phase.duration is not None:
        duration = phase.duration
        rho = estimate_load(phase.active_cycles, duration)
    else:
        rho = phase.load_acps
        duration = estimate_runtime(phase.active_cycles, rho)
    send = phase.net_send_volume
    recv = phase.net_recv_volume
    if send is None:
        send = phase.net_rate * duration / 8.0
    if recv is None:
        recv = phase.net_rate * duration / 8.0
    return duration, rho, send, recv


def estimate_total(profile: ServerProfile, trace: ActivityTrace) -> EnergyEstimate:
    """Per-phase additive estimate for a whole trace.

    The first unresolvable phase aborts the estimate, reported with its
    index. An empty trace yields a zero estimate.
    """
    per_phase: list[PhaseEstimate] = []
    e_bc = e_disk = e_net = 0.0
    for index, phase in enumerate(trace.phases):
        try:
            duration, rho, send, recv = _resolve_phase(phase)
            bc = estimate_cpu_baseline_energy(
                profile, phase.operating_point, rho, phase.active_cycles
            )
            disk = estimate_disk_energy(
                profile,
                phase.operating_point,
                phase.block_size,
                phase.disk_read_volume,
                phase.disk_write_volume,
            )
            net = estimate_net_energy(
                profile,
                phase.operating_point,
                phase.packet_size,
                phase.net_rate,
                send,
                recv,
            )
        except (WattbenchError, ValueError) as exc:
            raise type(exc)(
                f"phase {index} ({phase.label or 'unlabeled'}): {exc}"
            ) from None
        label = phase.label or f"phase{index}"
        per_phase.append(
            PhaseEstimate(
                label=label,
                duration=duration,
                load_acps=rho,
                e_baseline_cpu=bc,
                e_disk=disk,
                e_network=net,
            )
        )
        e_bc += bc
        e_disk += disk
        e_net += net
    return EnergyEstimate(
        e_baseline_cpu=e_bc,
        e_disk=e_disk,
        e_network=e_net,
        per_phase=tuple(per_phase),
    )


def score_estimate(
    estimate: EnergyEstimate, measured: Sequence[PowerSample], duration: float
) -> float:
    """Signed relative error against metered energy over the run.

    Measured energy is the mean of the power samples times the duration;
    positive scores mean the estimate came in low.
    """
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    inside = [s.watts for s in measured if 0 <= s.timestamp < duration]
    if len(inside) < 3:
        raise InsufficientSamples(f"only {len(inside)} samples inside [0, {duration:.6g})")
    span = max(s.timestamp for s in measured if s.timestamp < duration) - min(
        s.timestamp for s in measured if 0 <= s.timestamp
    )
    if span < 0.8 * duration - 1:
        raise InsufficientSamples(
            f"samples span {span:.6g}s of a {duration:.6g}s run"
        )
    measured_energy = math.fsum(inside) / len(inside) * duration
    return (measured_energy - estimate.e_total) / measured_energy


TRACE_CSV_HEADER = "phase,cycles,duration_s,v_dr,v_dw,v_ns,v_nr,rate_bps,pkt_b,block_b,cores,freq_hz"


def trace_from_csv(text: str) -> ActivityTrace:
    """Parse the flat trace format.

    Empty ``v_ns``/``v_nr`` fields mean "derive as rate x duration"; an
    explicit 0 means no traffic. ``duration_s`` is mandatory here (the
    structured format can instead carry a load to derive it from).
    """
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0].strip() != TRACE_CSV_HEADER:
        raise ParseError(1, f"expected header {TRACE_CSV_HEADER!r}")
    phases = []
    for number, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 12:
            raise ParseError(number, f"expected 12 fields, got {len(parts)}")
        try:
            if not parts[2]:
                raise ParseError(number, "duration_s is required in CSV traces")
            phases.append(
                Phase(
                    label=parts[0],
                    active_cycles=float(parts[1]),
                    duration=float(parts[2]),
                    disk_read_volume=float(parts[3] or 0),
                    disk_write_volume=float(parts[4] or 0),
                    net_send_volume=float(parts[5]) if parts[5] else None,
                    net_recv_volume=float(parts[6]) if parts[6] else None,
                    net_rate=float(parts[7] or 0),
                    packet_size=int(parts[8] or 0),
                    block_size=int(parts[9] or 0),
                    operating_point=OperatingPoint(int(parts[10]), float(parts[11])),
                )
            )
        except ParseError:
            raise
        except (ValueError, TypeError) as exc:
            raise ParseError(number, str(exc)) from None
    return ActivityTrace(phases=tuple(phases))


def trace_to_csv(trace: ActivityTrace) -> str:
    lines = [TRACE_CSV_HEADER]
    for index, p in enumerate(trace.phases):
        lines.append(
            ",".join(
                [
                    p.label or f"phase{index}",
                    fmt_num(p.active_cycles),
                    "" if p.duration is None else fmt_num(p.duration),
                    fmt_num(p.disk_read_volume),
                    fmt_num(p.disk_write_volume),
                    "" if p.net_send_volume is None else fmt_num(p.net_send_volume),
                    "" if p.net_recv_volume is None else fmt_num(p.net_recv_volume),
                    fmt_num(p.net_rate),
                    str(p.packet_size),
                    str(p.block_size),
                    str(p.operating_point.cores),
                    fmt_num(p.operating_point.frequency),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def estimate_to_text(estimate: EnergyEstimate) -> str:
    """Fixed-width table for terminal output."""
    header = f"{'phase':<12} {'T (s)':>10} {'rho (ACPS)':>14} {'E_B+E_C (J)':>14} {'E_D (J)':>12} {'E_N (J)':>12} {'E (J)':>14}"
    rows = [header, "-" * len(header)]
    for p in estimate.per_phase:
        rows.append(
            f"{p.label:<12} {p.duration:>10.3f} {p.load_acps:>14.6g} "
            f"{p.e_baseline_cpu:>14.6g} {p.e_disk:>12.6g} {p.e_network:>12.6g} {p.e_total:>14.6g}"
        )
    rows.append("-" * len(header))
    total_t = sum(p.duration for p in estimate.per_phase)
    rows.append(
        f"{'TOTAL':<12} {total_t:>10.3f} {'':>14} "
        f"{estimate.e_baseline_cpu:>14.6g} {estimate.e_disk:>12.6g} "
        f"{estimate.e_network:>12.6g} {estimate.e_total:>14.6g}"
    )
    return "\n".join(rows) + "\n"
