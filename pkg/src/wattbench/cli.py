"""Command-line client for the wattbench service.

Runs the service in-process by default (no daemon needed; batch runs
stay hermetic and reproducible) or targets a remote instance via
``--server``/``WATTBENCH_SERVER``. File I/O happens here; the service
only computes.

Every flag can be overridden by an environment variable with the
``WATTBENCH_`` prefix (e.g. WATTBENCH_SEED, WATTBENCH_SERVER).
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

import httpx

from .core import canonical_json, load_doc
from .errors import WattbenchError
from .recording import read_recorded_dir, write_recording

USAGE_EXIT = 2
RUNTIME_EXIT = 1


def _env(name: str, fallback):
    return os.environ.get(f"WATTBENCH_{name}", fallback)


def _floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


class Client:
    """Minimal JSON-over-HTTP client; in-process ASGI unless a server is given."""

    def __init__(self, server: str | None):
        self._client: httpx.Client | None = None
        self._app = None
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            from .service import create_app

            self._app = create_app()

    def post(self, path: str, payload: dict) -> dict:
        if self._client is not None:
            response = self._client.post(f"/api/{path}", json=payload)
        else:
            response = asyncio.run(self._post_in_process(path, payload))
        if response.status_code == 422:
            raise SystemExit(_fail(f"invalid request: {response.text}", USAGE_EXIT))
        if response.status_code != 200:
            body = response.json() if response.headers.get("content-type", "").startswith(
                "application/json"
            ) else {"error": "HTTPError", "detail": response.text}
            raise SystemExit(
                _fail(f"{body.get('error', 'error')}: {body.get('detail', '')}", RUNTIME_EXIT)
            )
        return response.json()

    async def _post_in_process(self, path: str, payload: dict) -> httpx.Response:
        transport = httpx.ASGITransport(app=self._app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://wattbench.local", timeout=600.0
        ) as client:
            return await client.post(f"/api/{path}", json=payload)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


def _fail(message: str, code: int) -> int:
    print(f"wattbench: {message}", file=sys.stderr)
    return code


def _warn(message: str) -> None:
    print(f"wattbench: warning: {message}", file=sys.stderr)


def cmd_calibrate(args: argparse.Namespace, client: Client) -> int:
    host = args.host
    if not host.startswith("sim:") and Path(host).is_dir():
        manifest, streams = read_recorded_dir(host)
        result = client.post("ingest", {"manifest": manifest, "streams": streams})
    else:
        grid = {}
        if args.frequencies:
            grid["frequencies_hz"] = _floats(args.frequencies)
        if args.max_cores:
            grid["max_cores"] = args.max_cores
        if args.loads:
            grid["load_levels"] = _floats(args.loads)
        if args.block_sizes:
            grid["block_sizes_b"] = _ints(args.block_sizes)
        if args.volume:
            grid["disk_volume_b"] = args.volume
        if args.packet_sizes:
            grid["packet_sizes_b"] = _ints(args.packet_sizes)
        if args.rates:
            grid["rates_bps"] = _floats(args.rates)
        payload = {
            "kind": args.kind,
            "host": host,
            "seed": args.seed,
            "repetitions": args.reps,
            "slot_seconds": args.slot_seconds,
            "trim_seconds": args.trim_seconds,
            "grid": grid,
            "include_streams": bool(args.record_dir),
        }
        result = client.post("calibrate", payload)

    out = Path(args.out)
    dataset = result["dataset"]
    if out.suffix == ".csv":
        from .workloads import CalibrationDataset

        out.write_text(CalibrationDataset.from_doc(dataset).to_csv(), encoding="ascii")
    else:
        out.write_text(canonical_json(dataset), encoding="ascii")

    if result.get("recording"):
        rec = result["recording"]
        write_recording(
            args.record_dir,
            rec["manifest"],
            {k: (v[0], v[1]) for k, v in rec["streams"].items()},
            truth_doc=rec.get("truth"),
        )
        print(f"recorded raw streams to {args.record_dir}")

    observations = (
        len(dataset["cpu_samples"])
        + len(dataset["disk_observations"])
        + len(dataset["net_observations"])
    )
    for failure in result["failures"]:
        _warn(f"slot {failure['label']} failed: {failure['reason']}")
    print(
        f"calibrated {result['slot_count']} slots -> {observations} observations "
        f"({result['failure_count']} failures) -> {out}"
    )
    return 0


def cmd_fit(args: argparse.Namespace, client: Client) -> int:
    datasets = [load_doc(path, "calibration_dataset") for path in args.datasets]
    payload = {
        "datasets": datasets,
        "degree": args.degree,
        "grid_resolution": args.grid_resolution,
        "name": args.name,
        "with_envelopes": not args.no_envelopes,
    }
    result = client.post("fit", payload)
    out = Path(args.out)
    out.write_text(canonical_json(result["profile"]), encoding="ascii")
    for note in result["notes"]:
        _warn(note)
    sys.stdout.write(result["reports_csv"])
    print(f"profile written to {out}")
    return 0


def cmd_estimate(args: argparse.Namespace, client: Client) -> int:
    profile = load_doc(args.profile, "server_profile")
    trace_path = Path(args.trace)
    payload: dict = {"profile": profile}
    if trace_path.suffix == ".csv":
        payload["trace_csv"] = trace_path.read_text(encoding="ascii")
    else:
        payload["trace"] = load_doc(trace_path, "activity_trace")
    result = client.post("estimate", payload)
    sys.stdout.write(result["csv"] if args.format == "csv" else result["text"])
    return 0


def cmd_report(args: argparse.Namespace, client: Client) -> int:
    profile = load_doc(args.profile, "server_profile")
    what = [w.strip() for w in args.what.split(",") if w.strip()]
    result = client.post("report", {"profile": profile, "what": what})
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(result["files"].items()):
        (out_dir / name).write_text(text, encoding="ascii")
        print(f"wrote {out_dir / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wattbench",
        description="Calibrate server power models and estimate application energy.",
    )
    parser.add_argument(
        "--server",
        default=_env("SERVER", None),
        help="base URL of a running wattbench service (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="run a calibration sweep")
    cal.add_argument(
        "kind", choices=["cpu", "disk_read", "disk_write", "net_send", "net_recv"]
    )
    cal.add_argument(
        "--host",
        default=_env("HOST", "sim:default"),
        help="sim:<name|config.json> or a recorded-sweep directory",
    )
    cal.add_argument("--out", required=True, help="dataset output (.json, or .csv for cpu)")
    cal.add_argument("--seed", type=int, default=int(_env("SEED", 42)))
    cal.add_argument("--reps", type=int, default=None, help="repetitions per slot")
    cal.add_argument(
        "--trim-seconds", type=float, default=float(_env("TRIM_SECONDS", 5.0))
    )
    cal.add_argument("--slot-seconds", type=float, default=30.0)
    cal.add_argument("--frequencies", help="comma-separated Hz values")
    cal.add_argument("--max-cores", type=int)
    cal.add_argument("--loads", help="comma-separated descending load fractions")
    cal.add_argument("--block-sizes", help="comma-separated bytes")
    cal.add_argument("--volume", type=float, help="bytes per disk slot")
    cal.add_argument("--packet-sizes", help="comma-separated bytes")
    cal.add_argument("--rates", help="comma-separated bps")
    cal.add_argument("--record-dir", help="also dump raw per-slot streams here")
    cal.set_defaults(func=cmd_calibrate)

    fit = sub.add_parser("fit", help="fit a server profile from datasets")
    fit.add_argument("datasets", nargs="+", help="calibration dataset files")
    fit.add_argument("--out", required=True, help="profile output path")
    fit.add_argument("--degree", type=int, default=int(_env("DEGREE", 3)))
    fit.add_argument("--grid-resolution", type=int, default=512)
    fit.add_argument("--name", default=None)
    fit.add_argument("--no-envelopes", action="store_true")
    fit.set_defaults(func=cmd_fit)

    est = sub.add_parser("estimate", help="estimate application energy from a trace")
    est.add_argument("profile")
    est.add_argument("trace", help="activity trace (.csv or structured .json)")
    est.add_argument(
        "--format", choices=["text", "csv"], default=_env("FORMAT", "text")
    )
    est.set_defaults(func=cmd_estimate)

    rep = sub.add_parser("report", help="export plot-data CSVs from a profile")
    rep.add_argument("profile")
    rep.add_argument(
        "--what", default="curves,envelopes,efficiency",
        help="comma-separated: curves, envelopes, efficiency",
    )
    rep.add_argument("--out-dir", required=True)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = Client(args.server)
    try:
        return args.func(args, client)
    except SystemExit:
        raise
    except (WattbenchError, OSError, ValueError) as exc:
        return _fail(str(exc), RUNTIME_EXIT)
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
