import pytest
from fastapi.testclient import TestClient

from wattbench.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


SMALL_GRID = {
    "frequencies_hz": [1.596e9, 2.794e9],
    "max_cores": 2,
    "load_levels": [1.0, 0.7, 0.4],
}


def calibrate(client, kind="cpu", **overrides):
    payload = {"kind": kind, "host": "sim:default", "seed": 7, "grid": SMALL_GRID}
    payload.update(overrides)
    response = client.post("/api/calibrate", json=payload)
    assert response.status_code == 200, response.text
    return response.json()


class TestHealth:
    def test_health(self, client):
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["schema_version"] == 1


class TestCalibrate:
    def test_cpu_sweep(self, client):
        body = calibrate(client)
        assert body["slot_count"] == 2 * 2 * 4
        assert body["failure_count"] == 0
        assert len(body["dataset"]["cpu_samples"]) == 16

    def test_disk_sweep_with_grid(self, client):
        body = calibrate(
            client,
            kind="disk_read",
            grid={**SMALL_GRID, "block_sizes_b": [1048576], "disk_volume_b": 2.5e9},
        )
        assert len(body["dataset"]["disk_observations"]) == 2

    def test_too_small_volume_fails_slots_not_request(self, client):
        # 1 GB reads back in ~8 s, shorter than twice the 5 s trim: the
        # slots fail individually and the sweep reports them.
        body = calibrate(
            client,
            kind="disk_read",
            grid={**SMALL_GRID, "block_sizes_b": [1048576], "disk_volume_b": 1e9},
        )
        assert body["failure_count"] == 2
        assert "InsufficientSamples" in body["failures"][0]["reason"]

    def test_unknown_sim_config_maps_to_400(self, client):
        response = client.post(
            "/api/calibrate", json={"kind": "cpu", "host": "sim:nonexistent"}
        )
        assert response.status_code == 400
        assert response.json()["error"] == "FormatError"

    def test_non_sim_host_rejected(self, client):
        response = client.post(
            "/api/calibrate", json={"kind": "cpu", "host": "/some/directory"}
        )
        assert response.status_code == 400

    def test_invalid_kind_is_422(self, client):
        response = client.post("/api/calibrate", json={"kind": "gpu"})
        assert response.status_code == 422

    def test_include_streams_round_trip(self, client):
        body = calibrate(client, include_streams=True)
        recording = body["recording"]
        assert recording is not None
        assert recording["truth"]["kind"] == "ground_truth"
        ingest = client.post(
            "/api/ingest",
            json={
                "manifest": recording["manifest"],
                "streams": recording["streams"],
            },
        )
        assert ingest.status_code == 200
        assert ingest.json()["dataset"] == body["dataset"]


class TestFitEstimateReport:
    @pytest.fixture(scope="class")
    def profile_doc(self, client):
        datasets = [calibrate(client)["dataset"]]
        datasets.append(
            calibrate(
                client,
                kind="disk_write",
                grid={**SMALL_GRID, "block_sizes_b": [1048576, 67108864], "disk_volume_b": 2e9},
            )["dataset"]
        )
        datasets.append(
            calibrate(
                client,
                kind="net_send",
                grid={**SMALL_GRID, "rates_bps": [5e7, 1e8, 2e8]},
            )["dataset"]
        )
        response = client.post("/api/fit", json={"datasets": datasets, "degree": 3})
        assert response.status_code == 200, response.text
        return response.json()

    def test_fit_returns_profile_and_reports(self, profile_doc):
        assert profile_doc["profile"]["kind"] == "server_profile"
        assert profile_doc["reports_csv"].startswith("label,residual_rms")
        assert 84.0 < profile_doc["profile"]["baseline_w"] < 85.0

    def test_fit_degree_above_seven_is_422(self, client):
        response = client.post(
            "/api/fit", json={"datasets": [{"x": 1}], "degree": 9}
        )
        assert response.status_code == 422

    def test_fit_invalid_dataset_is_400(self, client):
        response = client.post(
            "/api/fit", json={"datasets": [{"schema_version": 1, "kind": "bogus"}]}
        )
        assert response.status_code == 400

    def test_estimate_with_csv_trace(self, client, profile_doc):
        trace_csv = (
            "phase,cycles,duration_s,v_dr,v_dw,v_ns,v_nr,rate_bps,pkt_b,block_b,cores,freq_hz\n"
            "p0,30000000000,30,0,100000000,,0,100000000,64,67108864,2,1596000000\n"
        )
        response = client.post(
            "/api/estimate",
            json={"profile": profile_doc["profile"], "trace_csv": trace_csv},
        )
        assert response.status_code == 200, response.text
        body = response.json()
        assert body["estimate"]["e_total_j"] > 0
        assert body["csv"].startswith("phase,duration_s")
        assert "TOTAL" in body["text"]

    def test_estimate_uncalibrated_frequency_names_phase(self, client, profile_doc):
        trace = {
            "schema_version": 1,
            "kind": "activity_trace",
            "phases": [
                {
                    "label": "odd",
                    "active_cycles": 1e9,
                    "duration_s": 10.0,
                    "cores": 1,
                    "frequency_hz": 9.9e9,
                }
            ],
        }
        response = client.post(
            "/api/estimate", json={"profile": profile_doc["profile"], "trace": trace}
        )
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert "phase 0" in detail and "odd" in detail

    def test_estimate_requires_exactly_one_trace_form(self, client, profile_doc):
        response = client.post("/api/estimate", json={"profile": profile_doc["profile"]})
        assert response.status_code == 400

    def test_report_files(self, client, profile_doc):
        response = client.post(
            "/api/report",
            json={"profile": profile_doc["profile"], "what": ["curves", "envelopes"]},
        )
        assert response.status_code == 200
        files = response.json()["files"]
        assert "report_cpu_curves.csv" in files
        assert "report_envelope_minimal_power.csv" in files
        assert "report_manifest.json" in files

    def test_report_missing_envelopes_is_400(self, client, profile_doc):
        datasets = [calibrate(client)["dataset"]]
        fit = client.post(
            "/api/fit", json={"datasets": datasets, "with_envelopes": False}
        ).json()
        response = client.post(
            "/api/report", json={"profile": fit["profile"], "what": ["envelopes"]}
        )
        assert response.status_code == 400
        assert response.json()["error"] == "MissingArtifact"

    def test_report_unknown_kind_is_422(self, client, profile_doc):
        response = client.post(
            "/api/report", json={"profile": profile_doc["profile"], "what": ["plots"]}
        )
        assert response.status_code == 422
