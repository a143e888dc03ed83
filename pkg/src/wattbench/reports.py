"""Plot-data exports from a fitted profile.

Each report is a flat CSV meant for external plotting; a JSON manifest
documents every file's columns.
"""

from __future__ import annotations

import json

from .core import SCHEMA_VERSION, ServerProfile, fmt_num
from .errors import DegeneratePower, MissingArtifact
from .fitting import cpu_efficiency

REPORT_KINDS = ("curves", "envelopes", "efficiency")
CURVE_POINTS = 129


def _curve_rows(profile: ServerProfile, efficiency: bool) -> list[str]:
    rows = []
    for curve in profile.cpu_curves:
        op = curve.operating_point
        lo, hi = curve.domain
        for index in range(CURVE_POINTS):
            rho = lo + (hi - lo) * index / (CURVE_POINTS - 1)
            if efficiency:
                try:
                    value = cpu_efficiency(curve, rho)
                except (DegeneratePower, ValueError):
                    continue
            else:
                value = curve.evaluate(rho)
            rows.append(
                ",".join(
                    [fmt_num(rho), fmt_num(value), str(op.cores), fmt_num(op.frequency)]
                )
            )
    return rows


def profile_report_files(profile: ServerProfile, what: list[str]) -> dict[str, str]:
    """Render the requested report CSVs plus their manifest.

    Raises MissingArtifact when the profile lacks a requested artifact
    (for instance envelopes on a profile fitted without them).
    """
    unknown = [w for w in what if w not in REPORT_KINDS]
    if unknown:
        raise ValueError(f"unknown report kinds {unknown}; choose from {REPORT_KINDS}")
    if not what:
        raise ValueError("nothing to report")

    files: dict[str, str] = {}
    manifest: dict[str, dict] = {}

    if "curves" in what:
        header = "rho_acps,power_w,cores,freq_hz"
        files["report_cpu_curves.csv"] = "\n".join([header, *_curve_rows(profile, False)]) + "\n"
        manifest["report_cpu_curves.csv"] = {
            "columns": header.split(","),
            "description": "fitted CPU+baseline power sampled over each curve domain",
        }

    if "efficiency" in what:
        header = "rho_acps,efficiency_acps_per_j,cores,freq_hz"
        files["report_cpu_efficiency.csv"] = (
            "\n".join([header, *_curve_rows(profile, True)]) + "\n"
        )
        manifest["report_cpu_efficiency.csv"] = {
            "columns": header.split(","),
            "description": "cycles-per-joule efficiency sampled over each curve domain",
        }

    if "envelopes" in what:
        if not profile.envelopes:
            raise MissingArtifact("profile has no envelopes; refit with envelopes enabled")
        names = {
            "minimal_power": ("report_envelope_minimal_power.csv", "p_min_w"),
            "maximal_efficiency": (
                "report_envelope_maximal_efficiency.csv",
                "eta_max_acps_per_j",
            ),
        }
        for kind, (filename, value_column) in names.items():
            envelope = profile.envelopes.get(kind)
            if envelope is None:
                raise MissingArtifact(f"profile has no {kind} envelope")
            header = f"rho_acps,{value_column},source_cores,source_freq_hz"
            rows = [
                ",".join(
                    [
                        fmt_num(p.rho),
                        fmt_num(p.value),
                        str(p.source.cores),
                        fmt_num(p.source.frequency),
                    ]
                )
                for p in envelope.breakpoints
            ]
            files[filename] = "\n".join([header, *rows]) + "\n"
            manifest[filename] = {
                "columns": header.split(","),
                "description": f"{kind} envelope breakpoints with winning operating point",
            }

    files["report_manifest.json"] = (
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "report_manifest",
                "profile": profile.name,
                "files": manifest,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return files
