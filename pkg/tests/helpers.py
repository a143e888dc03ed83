"""Shared test helpers: independent oracles and fixture builders.

The oracles here deliberately avoid the code paths they check: the
polynomial oracle solves raw normal equations with numpy.linalg.solve,
while the library normalizes loads and uses an SVD least-squares solve.
"""

from __future__ import annotations

import numpy as np

from wattbench.core import CpuPowerCurve, LoadSample, OperatingPoint


def group_by_op(samples) -> dict[OperatingPoint, list[LoadSample]]:
    groups: dict[OperatingPoint, list[LoadSample]] = {}
    for sample in samples:
        groups.setdefault(sample.operating_point, []).append(sample)
    return groups


def normal_equations_fit(rhos, powers, degree: int) -> np.ndarray:
    """Brute-force polynomial least squares: solve (A^T A) c = A^T y on raw powers."""
    rhos = np.asarray(rhos, dtype=float)
    powers = np.asarray(powers, dtype=float)
    design = np.vander(rhos, degree + 1, increasing=True)
    gram = design.T @ design
    rhs = design.T @ powers
    return np.linalg.solve(gram, rhs)


def curve_from_coefficients(
    coefficients, domain, cores: int = 1, frequency: float = 2.0e9
) -> CpuPowerCurve:
    return CpuPowerCurve(
        operating_point=OperatingPoint(cores, frequency),
        coefficients=tuple(coefficients),
        domain=domain,
    )


def samples_from_polynomial(
    coefficients, rhos, op: OperatingPoint, noise=None
) -> list[LoadSample]:
    """Evaluate an exact polynomial at given loads into LoadSamples."""
    samples = []
    for index, rho in enumerate(rhos):
        power = 0.0
        for c in reversed(coefficients):
            power = power * rho + c
        if noise is not None:
            power += noise[index]
        samples.append(
            LoadSample(rho=float(rho), power=float(power), operating_point=op)
        )
    return samples


def quadratic_crossing(c_a, c_b) -> float:
    """Positive root of (a0-b0) + (a1-b1) x + (a2-b2) x^2 = 0, the analytic
    crossing load of two quadratics."""
    d0 = c_a[0] - c_b[0]
    d1 = c_a[1] - c_b[1]
    d2 = (c_a[2] if len(c_a) > 2 else 0.0) - (c_b[2] if len(c_b) > 2 else 0.0)
    roots = np.roots([d2, d1, d0])
    real = [float(r.real) for r in roots if abs(r.imag) < 1e-9 and r.real > 0]
    assert real, "curves do not cross at a positive load"
    return min(real)
