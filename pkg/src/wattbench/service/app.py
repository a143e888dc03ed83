"""FastAPI service wrapping the calibration/fitting/estimation library.

All endpoints are pure request/response over JSON documents: the
service never touches the filesystem. Clients (the bundled CLI, or
anything else) own file I/O.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..core import ActivityTrace, SCHEMA_VERSION, ServerProfile
from ..errors import WattbenchError
from ..estimator import estimate_to_text, estimate_total, trace_from_csv
from ..fitting import build_profile, fit_reports_csv
from ..hostsim import SimulatedHost, load_ground_truth
from ..recording import ingest_recorded, run_and_record
from ..reports import profile_report_files
from ..workloads import (
    CalibrationDataset,
    DEFAULT_BLOCK_SIZES,
    DEFAULT_DISK_VOLUME,
    DEFAULT_LOAD_LEVELS,
    DEFAULT_PACKET_SIZES,
    DatasetMeta,
    SweepPlan,
    execute_sweep,
    plan_cpu_sweep,
    plan_disk_sweep,
    plan_net_sweep,
)
from .schemas import (
    CalibrateRequest,
    CalibrateResponse,
    EstimateRequest,
    EstimateResponse,
    FitRequest,
    FitResponse,
    HealthResponse,
    IngestRequest,
    ReportRequest,
    ReportResponse,
)


def _plan_for(request: CalibrateRequest, truth_frequencies, truth_cores) -> SweepPlan:
    grid = request.grid
    frequencies = grid.frequencies_hz or list(truth_frequencies)
    if request.kind == "cpu":
        return plan_cpu_sweep(
            frequencies,
            grid.max_cores or truth_cores,
            grid.load_levels or DEFAULT_LOAD_LEVELS,
            request.slot_seconds,
        )
    if request.kind in ("disk_read", "disk_write"):
        return plan_disk_sweep(
            frequencies,
            grid.block_sizes_b or DEFAULT_BLOCK_SIZES,
            grid.disk_volume_b or DEFAULT_DISK_VOLUME,
            request.kind.removeprefix("disk_"),
            request.slot_seconds,
        )
    direction = "send" if request.kind == "net_send" else "receive"
    return plan_net_sweep(
        frequencies,
        grid.packet_sizes_b or DEFAULT_PACKET_SIZES,
        grid.rates_bps,
        direction,
        request.slot_seconds,
    )


def _load_trace(request: EstimateRequest) -> ActivityTrace:
    if (request.trace is None) == (request.trace_csv is None):
        raise ValueError("provide exactly one of trace or trace_csv")
    if request.trace is not None:
        return ActivityTrace.from_doc(request.trace)
    return trace_from_csv(request.trace_csv)


def create_app() -> FastAPI:
    app = FastAPI(
        title="wattbench",
        description="Server power model calibration and energy estimation",
        version=__version__,
    )

    @app.exception_handler(WattbenchError)
    async def _domain_error(_: Request, exc: WattbenchError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def _value_error(_: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": "ValueError", "detail": str(exc)},
        )

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__, schema_version=SCHEMA_VERSION)

    @app.post("/api/calibrate", response_model=CalibrateResponse)
    def calibrate(request: CalibrateRequest) -> CalibrateResponse:
        if not request.host.startswith("sim:"):
            raise ValueError(
                "the service calibrates simulated hosts (host=sim:<config>); "
                "recorded sweeps go through /api/ingest"
            )
        truth = load_ground_truth(request.host.removeprefix("sim:"))
        plan = _plan_for(request, truth.frequencies, truth.max_cores)
        host = SimulatedHost(truth, seed=request.seed)
        meta = DatasetMeta(
            name=truth.name,
            frequencies=tuple(request.grid.frequencies_hz or truth.frequencies),
            max_cores=request.grid.max_cores or truth.max_cores,
            slot_seconds=request.slot_seconds,
            trim_seconds=request.trim_seconds,
            seed=request.seed,
        )
        recording = None
        if request.include_streams:
            if request.repetitions not in (None, 1):
                raise ValueError("stream recording captures exactly one repetition per slot")
            manifest, streams = run_and_record(plan, host, meta)
            dataset = ingest_recorded(manifest, streams)
            recording = {
                "manifest": manifest,
                "streams": {k: list(v) for k, v in streams.items()},
                "truth": truth.to_doc(),
            }
        else:
            dataset = execute_sweep(
                plan,
                host,
                trim_margin=request.trim_seconds,
                repetitions=request.repetitions,
                meta=meta,
            )
        return CalibrateResponse(
            dataset=dataset.to_doc(),
            slot_count=len(plan.slots),
            failure_count=len(dataset.failures),
            failures=[{"label": f.label, "reason": f.reason} for f in dataset.failures],
            recording=recording,
        )

    @app.post("/api/ingest", response_model=CalibrateResponse)
    def ingest(request: IngestRequest) -> CalibrateResponse:
        dataset = ingest_recorded(request.manifest, request.streams)
        return CalibrateResponse(
            dataset=dataset.to_doc(),
            slot_count=len(request.manifest.get("slots", [])),
            failure_count=len(dataset.failures),
            failures=[{"label": f.label, "reason": f.reason} for f in dataset.failures],
        )

    @app.post("/api/fit", response_model=FitResponse)
    def fit(request: FitRequest) -> FitResponse:
        datasets = [CalibrationDataset.from_doc(doc) for doc in request.datasets]
        merged = CalibrationDataset.merge(datasets)
        build = build_profile(
            merged,
            degree=request.degree,
            grid_resolution=request.grid_resolution,
            name=request.name,
            with_envelopes=request.with_envelopes,
        )
        return FitResponse(
            profile=build.profile.to_doc(),
            reports_csv=fit_reports_csv(build.reports),
            notes=list(build.notes),
        )

    @app.post("/api/estimate", response_model=EstimateResponse)
    def estimate(request: EstimateRequest) -> EstimateResponse:
        profile = ServerProfile.from_doc(request.profile)
        trace = _load_trace(request)
        result = estimate_total(profile, trace)
        return EstimateResponse(
            estimate=result.to_doc(),
            csv=result.to_csv(),
            text=estimate_to_text(result),
        )

    @app.post("/api/report", response_model=ReportResponse)
    def report(request: ReportRequest) -> ReportResponse:
        profile = ServerProfile.from_doc(request.profile)
        return ReportResponse(files=profile_report_files(profile, list(request.what)))

    return app


app = create_app()
