"""Session fixtures (expensive hostsim runs shared across tests) and the
acceptance criteria summary printed after the run."""

from __future__ import annotations

import pytest

from wattbench.fitting import build_profile, fit_cpu_curve
from wattbench.hostsim import GroundTruth, SimulatedHost
from wattbench.workloads import (
    CalibrationDataset,
    DatasetMeta,
    DEFAULT_BLOCK_SIZES,
    DEFAULT_DISK_VOLUME,
    DEFAULT_PACKET_SIZES,
    execute_sweep,
    plan_cpu_sweep,
    plan_disk_sweep,
    plan_net_sweep,
)

from helpers import group_by_op

ACCEPTANCE_RESULTS: list[tuple[int, str, str]] = []


def record_criterion(number: int, description: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((number, description, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, outcome in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number} [{outcome}] {description}")


@pytest.fixture(scope="session")
def nemesis_truth() -> GroundTruth:
    return GroundTruth()  # noisy nemesis-like default, sigma = 0.5 W


@pytest.fixture(scope="session")
def nemesis_noisy_fits(nemesis_truth):
    """Full noisy CPU sweep at 10 repetitions plus degree-3 fits."""
    host = SimulatedHost(nemesis_truth, seed=42)
    plan = plan_cpu_sweep(nemesis_truth.frequencies, nemesis_truth.max_cores)
    dataset = execute_sweep(plan, host, repetitions=10)
    curves = {}
    for op, samples in group_by_op(dataset.cpu_samples).items():
        curves[op], _ = fit_cpu_curve(samples, degree=3)
    return dataset, curves


SMALL_FREQS = (1.596e9, 1.995e9, 2.394e9, 2.794e9)


@pytest.fixture(scope="session")
def small_truth() -> GroundTruth:
    return GroundTruth(frequencies=SMALL_FREQS)


@pytest.fixture(scope="session")
def small_profile(small_truth):
    """Fully calibrated profile over a 4-frequency grid (noisy)."""
    host = SimulatedHost(small_truth, seed=11)
    meta = DatasetMeta(
        name=small_truth.name, frequencies=SMALL_FREQS, max_cores=4, seed=11
    )
    parts = [
        execute_sweep(
            plan_cpu_sweep(SMALL_FREQS, 4), host, repetitions=3, meta=meta
        )
    ]
    for direction in ("read", "write"):
        parts.append(
            execute_sweep(
                plan_disk_sweep(SMALL_FREQS, DEFAULT_BLOCK_SIZES, DEFAULT_DISK_VOLUME, direction),
                host,
                meta=meta,
            )
        )
    for direction in ("send", "receive"):
        parts.append(
            execute_sweep(
                plan_net_sweep(SMALL_FREQS, DEFAULT_PACKET_SIZES, direction=direction),
                host,
                meta=meta,
            )
        )
    dataset = CalibrationDataset.merge(parts)
    build = build_profile(dataset, degree=3)
    return build.profile
