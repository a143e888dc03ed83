"""Pydantic request/response models for the calibration service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

SweepKind = Literal["cpu", "disk_read", "disk_write", "net_send", "net_recv"]
ReportKind = Literal["curves", "envelopes", "efficiency"]


class GridOverrides(BaseModel):
    """Optional calibration grid tweaks; unset fields use the defaults."""

    model_config = ConfigDict(extra="forbid")

    frequencies_hz: list[float] | None = None
    max_cores: int | None = Field(default=None, ge=1)
    load_levels: list[float] | None = None
    block_sizes_b: list[int] | None = None
    disk_volume_b: float | None = Field(default=None, gt=0)
    packet_sizes_b: list[int] | None = None
    rates_bps: list[float] | None = None


class CalibrateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: SweepKind
    host: str = "sim:default"
    seed: int = 42
    repetitions: int | None = Field(default=None, ge=1)
    slot_seconds: float = Field(default=30.0, gt=0)
    trim_seconds: float = Field(default=5.0, ge=0)
    grid: GridOverrides = Field(default_factory=GridOverrides)
    include_streams: bool = False  # also return raw per-slot recordings


class CalibrateResponse(BaseModel):
    dataset: dict
    slot_count: int
    failure_count: int
    failures: list[dict]
    recording: dict | None = None  # manifest + streams when include_streams


class IngestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    manifest: dict
    streams: dict[str, tuple[str, str]]  # stem -> (power csv, ticks csv)


class FitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    datasets: list[dict] = Field(min_length=1)
    degree: int = Field(default=3, ge=1, le=7)
    grid_resolution: int = Field(default=512, ge=2)
    name: str | None = None
    with_envelopes: bool = True


class FitResponse(BaseModel):
    profile: dict
    reports_csv: str
    notes: list[str]


class EstimateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    profile: dict
    trace: dict | None = None  # structured activity trace document
    trace_csv: str | None = None  # alternative: the flat CSV form


class EstimateResponse(BaseModel):
    estimate: dict
    csv: str
    text: str


class ReportRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    profile: dict
    what: list[ReportKind] = Field(min_length=1)


class ReportResponse(BaseModel):
    files: dict[str, str]


class HealthResponse(BaseModel):
    status: str
    version: str
    schema_version: int


class ErrorBody(BaseModel):
    error: str
    detail: str
