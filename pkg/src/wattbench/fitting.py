"""Model estimation: CPU power polynomials, baseline extraction,
efficiency curves, power/efficiency envelopes, and disk/network models.

Load values are rescaled to [0, 1] before any least-squares solve to
keep the design matrices well conditioned; coefficients are mapped back
to physical units on output (pure per-coefficient scaling, no mixing).

Every function here is pure; per-operating-point fits can safely run in
parallel and be merged afterwards.
"""

from __future__ import annotations

import statistics
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    CpuPowerCurve,
    DiskEntry,
    DiskModel,
    EnvelopeCurve,
    EnvelopePoint,
    LoadSample,
    NetEntry,
    NetworkModel,
    OperatingPoint,
    ServerProfile,
    fmt_num,
)
from .errors import (
    DegeneratePower,
    EmptyGrid,
    IllConditioned,
    InsufficientData,
    NonPositivePower,
    WattbenchError,
)
from .workloads import CalibrationDataset, freq_tag

# Condition number of the normalized design matrix above which a fit is
# refused instead of silently returning noise-amplified coefficients.
CONDITION_LIMIT = 1e12

DEFAULT_DEGREE = 3
MAX_DEGREE = 7
DEFAULT_GRID_RESOLUTION = 512


@dataclass(frozen=True)
class FitReport:
    """Quality diagnostics for one least-squares fit."""

    residual_rms: float  # relative, dimensionless
    residuals: tuple[float, ...]  # per-point relative residuals
    condition: float  # condition number of the normalized design matrix
    points: int = 0

    def __post_init__(self):
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be >= 0")


@dataclass(frozen=True)
class IsolatedPower:
    """Result of subtracting the fitted CPU+baseline power from a total."""

    watts: float
    negative: bool  # set when the residual came out below zero

    def require_positive(self) -> float:
        if self.negative or self.watts <= 0:
            raise NonPositivePower(f"isolated component power is {self.watts:.4g} W")
        return self.watts


def fit_cpu_curve(
    samples: Sequence[LoadSample], degree: int = DEFAULT_DEGREE
) -> tuple[CpuPowerCurve, FitReport]:
    """Least-squares polynomial fit of power against load for one operating point.

    The zero-order coefficient of the result is the configuration's
    baseline power. Needs at least degree+1 distinct load values.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in [1, {MAX_DEGREE}], got {degree}")
    if not samples:
        raise InsufficientData("no samples to fit")
    op = samples[0].operating_point
    if any(s.operating_point != op for s in samples):
        raise ValueError("samples mix operating points; fit one configuration at a time")

    rhos = np.array([s.rho for s in samples], dtype=float)
    powers = np.array([s.power for s in samples], dtype=float)
    if len(np.unique(rhos)) < degree + 1:
        raise InsufficientData(
            f"need >= {degree + 1} distinct load values for degree {degree}, "
            f"got {len(np.unique(rhos))}"
        )

    scale = float(np.max(np.abs(rhos)))
    if scale <= 0:
        raise InsufficientData("all loads are zero")
    design = np.vander(rhos / scale, degree + 1, increasing=True)
    condition = float(np.linalg.cond(design))
    if condition > CONDITION_LIMIT:
        raise IllConditioned(
            f"design condition {condition:.3g} exceeds {CONDITION_LIMIT:.1g}; lower the degree"
        )
    solution, *_ = np.linalg.lstsq(design, powers, rcond=None)
    coefficients = tuple(float(c) / scale**k for k, c in enumerate(solution))

    predictions = design @ solution
    residuals = tuple(float(r) for r in (predictions - powers) / powers)
    report = FitReport(
        residual_rms=float(np.sqrt(np.mean(np.square(residuals)))),
        residuals=residuals,
        condition=condition,
        points=len(samples),
    )
    curve = CpuPowerCurve(
        operating_point=op,
        coefficients=coefficients,
        domain=(float(np.min(rhos)), float(np.max(rhos))),
        fit_error=report.residual_rms,
    )
    return curve, report


def extract_baseline(curves: Sequence[CpuPowerCurve]) -> tuple[float, float]:
    """Consensus baseline across curves: median zero-order coefficient and spread.

    All fitted curves converge to a similar value as load tends to zero;
    the spread (max - min) quantifies how similar.
    """
    if not curves:
        raise ValueError("need at least one curve")
    alphas = [c.baseline for c in curves]
    return float(statistics.median(alphas)), float(max(alphas) - min(alphas))


def cpu_efficiency(curve: CpuPowerCurve, rho: float) -> float:
    """Active cycles per joule: load divided by power attributable to cycles."""
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    if not curve.contains(rho):
        raise ValueError(f"rho {rho:.4g} outside curve domain {curve.domain}")
    above_baseline = curve.evaluate(rho) - curve.baseline
    if above_baseline <= 0:
        raise DegeneratePower(
            f"power at rho={rho:.4g} does not exceed the baseline; "
            "efficiency is undefined (fit artifact at tiny loads)"
        )
    return rho / above_baseline


def minimal_power_envelope(
    curves: Sequence[CpuPowerCurve], grid_resolution: int = DEFAULT_GRID_RESOLUTION
) -> EnvelopeCurve:
    """Lower envelope of power over load: the cheapest calibrated way to serve each load.

    Breakpoints record which operating point wins each segment; switch
    locations are refined by bisection between grid neighbours.
    """
    points = _envelope_points(curves, grid_resolution, maximize=False)
    _warn_on_convexity(points)
    return EnvelopeCurve(kind="minimal_power", breakpoints=tuple(points))


def maximal_efficiency_envelope(
    curves: Sequence[CpuPowerCurve], grid_resolution: int = DEFAULT_GRID_RESOLUTION
) -> EnvelopeCurve:
    """Upper envelope of cycles-per-joule efficiency over load."""
    points = _envelope_points(curves, grid_resolution, maximize=True)
    return EnvelopeCurve(kind="maximal_efficiency", breakpoints=tuple(points))


def isolate_component_power(total_mean: float, curve: CpuPowerCurve, rho: float) -> IsolatedPower:
    """Subtract the fitted CPU+baseline power at the measured load from a total.

    A negative residual (over-fitted curve or measurement noise) is
    returned flagged rather than clamped; clamping would bias the
    efficiencies computed from it.
    """
    if not curve.contains(rho):
        raise ValueError(f"rho {rho:.4g} outside curve domain {curve.domain}")
    residual = total_mean - curve.evaluate(rho)
    return IsolatedPower(watts=residual, negative=residual < 0)


def disk_efficiency(volume: float, p_disk: float, duration: float) -> float:
    """Bytes moved per joule of disk energy: V / (P * T)."""
    if p_disk <= 0:
        raise NonPositivePower(f"disk power must be > 0, got {p_disk}")
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if volume < 0:
        raise ValueError(f"volume must be >= 0, got {volume}")
    return volume / (p_disk * duration)


def fit_network_efficiency(
    points: Sequence[tuple[float, float]], order: int = 2
) -> tuple[float, float, FitReport]:
    """Zero-intercept polynomial fit of efficiency against transfer rate.

    Model: efficiency = beta1 * R + beta2 * R^2, with the zero-order
    term forced to 0 (an idle NIC moves no data). ``order=1`` pins
    beta2 to zero for servers whose calibration showed no curvature.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if any(r <= 0 for r, _ in points):
        raise ValueError("all rates must be > 0")
    if any(e <= 0 for _, e in points):
        raise ValueError("all efficiencies must be > 0")
    rates = np.array([r for r, _ in points], dtype=float)
    etas = np.array([e for _, e in points], dtype=float)
    if len(np.unique(rates)) < 2:
        raise InsufficientData("need >= 2 distinct rates")

    scale = float(np.max(rates))
    u = rates / scale
    design = np.column_stack([u, u * u][:order])
    condition = float(np.linalg.cond(design))
    if condition > CONDITION_LIMIT:
        raise IllConditioned(f"design condition {condition:.3g} exceeds {CONDITION_LIMIT:.1g}")
    solution, *_ = np.linalg.lstsq(design, etas, rcond=None)
    beta1 = float(solution[0]) / scale
    beta2 = float(solution[1]) / scale**2 if order == 2 else 0.0

    predictions = design @ solution
    residuals = tuple(float(r) for r in (predictions - etas) / etas)
    report = FitReport(
        residual_rms=float(np.sqrt(np.mean(np.square(residuals)))),
        residuals=residuals,
        condition=condition,
        points=len(points),
    )
    return beta1, beta2, report


# --- envelope internals -------------------------------------------------


def _curve_value(curve: CpuPowerCurve, rho: float, maximize: bool) -> float | None:
    """Envelope contribution of one curve at one load, or None if not covering."""
    if not curve.contains(rho):
        return None
    if not maximize:
        return curve.evaluate(rho)
    if rho <= 0:
        return None
    above = curve.evaluate(rho) - curve.baseline
    if above <= 0:
        # Degenerate efficiency at this load: the curve simply does not
        # compete here. cpu_efficiency() raises for direct callers.
        return None
    return rho / above


def _winner(
    curves: Sequence[CpuPowerCurve], rho: float, maximize: bool
) -> tuple[float, OperatingPoint] | None:
    best: tuple[float, OperatingPoint] | None = None
    for curve in curves:
        value = _curve_value(curve, rho, maximize)
        if value is None:
            continue
        if best is None or (value > best[0] if maximize else value < best[0]):
            best = (value, curve.operating_point)
    return best


def _envelope_points(
    curves: Sequence[CpuPowerCurve], grid_resolution: int, maximize: bool
) -> list[EnvelopePoint]:
    if not curves:
        raise EmptyGrid("no curves to build an envelope from")
    if grid_resolution < 2:
        raise EmptyGrid(f"grid_resolution must be >= 2, got {grid_resolution}")
    lo = min(c.domain[0] for c in curves)
    hi = max(c.domain[1] for c in curves)
    if not hi > lo:
        raise EmptyGrid(f"degenerate union domain [{lo}, {hi}]")

    grid = np.linspace(lo, hi, grid_resolution)
    sampled: list[EnvelopePoint] = []
    for rho in grid:
        won = _winner(curves, float(rho), maximize)
        if won is not None:
            sampled.append(EnvelopePoint(rho=float(rho), value=won[0], source=won[1]))

    refined: list[EnvelopePoint] = []
    for left, right in zip(sampled, sampled[1:]):
        refined.append(left)
        adjacent = (right.rho - left.rho) <= (hi - lo) / (grid_resolution - 1) * 1.5
        if adjacent and left.source != right.source:
            refined.extend(_refine_switch(curves, left, right, maximize))
    if sampled:
        refined.append(sampled[-1])

    # Enforce strictly increasing rho (bisection can land on a grid point).
    out: list[EnvelopePoint] = []
    min_gap = (hi - lo) * 1e-12
    for point in refined:
        if out and point.rho <= out[-1].rho + min_gap:
            continue
        out.append(point)
    if not out:
        raise EmptyGrid("no curve covers any grid point")
    return out


def _refine_switch(
    curves: Sequence[CpuPowerCurve],
    left: EnvelopePoint,
    right: EnvelopePoint,
    maximize: bool,
    iterations: int = 60,
) -> list[EnvelopePoint]:
    """Bisect between two grid points whose winning source differs.

    Stops at a small nonzero separation so both sides of the switch
    survive as distinct breakpoints.
    """
    lo_rho, lo_src = left.rho, left.source
    hi_rho, hi_src = right.rho, right.source
    separation = (right.rho - left.rho) * 1e-7
    for _ in range(iterations):
        if hi_rho - lo_rho <= separation:
            break
        mid = 0.5 * (lo_rho + hi_rho)
        if mid <= lo_rho or mid >= hi_rho:
            break
        won = _winner(curves, mid, maximize)
        if won is None:
            break
        if won[1] == lo_src:
            lo_rho = mid
        else:
            hi_rho, hi_src = mid, won[1]
    points = []
    for rho in (lo_rho, hi_rho):
        won = _winner(curves, rho, maximize)
        if won is not None:
            points.append(EnvelopePoint(rho=rho, value=won[0], source=won[1]))
    return points


def _warn_on_convexity(points: list[EnvelopePoint], rel_tol: float = 1e-6) -> None:
    """The minimal power curve should be concave between source switches."""
    for a, b, c in zip(points, points[1:], points[2:]):
        if not (a.source == b.source == c.source):
            continue
        h1, h2 = b.rho - a.rho, c.rho - b.rho
        if h1 <= 0 or h2 <= 0:
            continue
        # Positive second difference means convex; allow fit-noise slack.
        second = (c.value - b.value) / h2 - (b.value - a.value) / h1
        scale = max(abs(a.value), abs(c.value), 1.0) / max(h1, h2)
        if second > rel_tol * scale:
            warnings.warn(
                f"minimal power envelope not concave near rho={b.rho:.4g} "
                "(likely fit noise)",
                stacklevel=3,
            )
            return


def fit_reports_csv(reports: dict[str, FitReport]) -> str:
    """Flat CSV export of fit diagnostics, one row per fitted model."""
    lines = ["label,residual_rms,condition,points"]
    for label in sorted(reports):
        r = reports[label]
        lines.append(
            ",".join([label, fmt_num(r.residual_rms), fmt_num(r.condition), str(r.points)])
        )
    return "\n".join(lines) + "\n"


# --- profile assembly ---------------------------------------------------


@dataclass(frozen=True)
class ProfileBuild:
    """A fitted profile plus its diagnostics and assembly notes."""

    profile: ServerProfile
    reports: dict[str, FitReport]
    notes: tuple[str, ...]


def build_profile(
    dataset: CalibrationDataset,
    degree: int = DEFAULT_DEGREE,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
    name: str | None = None,
    with_envelopes: bool = True,
) -> ProfileBuild:
    """Fit every model a calibration dataset supports into one profile.

    CPU curves are fitted per operating point; disk and network models
    are derived by isolating component power against those curves.
    Observations whose isolation comes out negative are excluded (not
    clamped) and noted. Missing sweep kinds shrink the profile and add a
    note instead of failing.
    """
    notes: list[str] = []
    groups: dict[OperatingPoint, list[LoadSample]] = {}
    for sample in dataset.cpu_samples:
        groups.setdefault(sample.operating_point, []).append(sample)
    if not groups:
        raise InsufficientData("dataset has no CPU samples; cannot build a profile")

    curves: list[CpuPowerCurve] = []
    reports: dict[str, FitReport] = {}
    for op in sorted(groups):
        try:
            curve, report = fit_cpu_curve(groups[op], degree)
        except WattbenchError as exc:
            raise type(exc)(
                f"cpu fit for {op.cores} cores @ {freq_tag(op.frequency)} Hz: {exc}"
            ) from None
        curves.append(curve)
        reports[f"cpu/c{op.cores}/f{freq_tag(op.frequency)}"] = report
    baseline, spread = extract_baseline(curves)

    envelopes: dict[str, EnvelopeCurve] = {}
    if with_envelopes:
        envelopes["minimal_power"] = minimal_power_envelope(curves, grid_resolution)
        envelopes["maximal_efficiency"] = maximal_efficiency_envelope(curves, grid_resolution)

    curve_map = {c.operating_point: c for c in curves}

    disk_entries: dict[tuple[float, int, str], DiskEntry] = {}
    for obs in dataset.disk_observations:
        curve = curve_map.get(obs.operating_point)
        if curve is None:
            notes.append(f"{obs.label}: no CPU curve for its operating point, skipped")
            continue
        isolated = isolate_component_power(obs.power, curve, obs.rho)
        if isolated.negative or isolated.watts == 0:
            notes.append(
                f"{obs.label}: isolated disk power {isolated.watts:.4g} W not positive, excluded"
            )
            continue
        disk_entries[(obs.operating_point.frequency, obs.block_size, obs.direction)] = DiskEntry(
            efficiency=disk_efficiency(obs.volume, isolated.watts, obs.duration),
            mean_power=isolated.watts,
        )
    disk_model = DiskModel(disk_entries) if disk_entries else None
    if disk_model is None:
        notes.append("no usable disk observations; profile has no disk model")
    else:
        notes.extend(disk_model.shape_warnings())

    net_points: dict[tuple[float, int, str], list[tuple[float, float]]] = {}
    rates: list[float] = []
    for obs in dataset.net_observations:
        curve = curve_map.get(obs.operating_point)
        if curve is None:
            notes.append(f"{obs.label}: no CPU curve for its operating point, skipped")
            continue
        isolated = isolate_component_power(obs.power, curve, obs.rho)
        if isolated.negative or isolated.watts == 0:
            notes.append(
                f"{obs.label}: isolated NIC power {isolated.watts:.4g} W not positive, excluded"
            )
            continue
        key = (obs.operating_point.frequency, obs.packet_size, obs.direction)
        net_points.setdefault(key, []).append((obs.rate, obs.rate / isolated.watts))
        rates.append(obs.rate)

    net_entries: dict[tuple[float, int, str], NetEntry] = {}
    for key in sorted(net_points):
        points = net_points[key]
        frequency, packet, direction = key
        label = f"net_{direction}/f{freq_tag(frequency)}/s{packet}"
        if len({r for r, _ in points}) < 2:
            notes.append(f"{label}: fewer than 2 distinct rates, entry skipped")
            continue
        beta1, beta2, report = fit_network_efficiency(points, order=2)
        net_entries[key] = NetEntry(beta1=beta1, beta2=beta2)
        reports[label] = report
    net_model = (
        NetworkModel(net_entries, (min(rates), max(rates))) if net_entries else None
    )
    if net_model is None:
        notes.append("no usable network observations; profile has no network model")

    profile = ServerProfile(
        name=name or dataset.meta.name,
        frequencies=dataset.meta.frequencies,
        max_cores=dataset.meta.max_cores,
        cpu_curves=tuple(curves),
        baseline=baseline,
        baseline_spread=spread,
        disk=disk_model,
        network=net_model,
        envelopes=envelopes,
    )
    return ProfileBuild(profile=profile, reports=reports, notes=tuple(notes))
