import contextlib
import io
import json
from pathlib import Path

import pytest

from wattbench.cli import main

SMALL = [
    "--frequencies", "1.596e9,2.794e9",
    "--max-cores", "2",
]


def run(argv, expect=0):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code if isinstance(exc.code, int) else 1
    assert code == expect, f"exit {code}, stderr: {err.getvalue()}"
    return out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """calibrate cpu+disk+net -> fit, on a reduced grid."""
    root = tmp_path_factory.mktemp("cli")
    cpu = root / "cpu.json"
    disk = root / "disk.json"
    net = root / "net.json"
    profile = root / "profile.json"
    run(["calibrate", "cpu", "--host", "sim:default", "--seed", "7",
         "--loads", "1.0,0.7,0.4", *SMALL, "--out", str(cpu)])
    run(["calibrate", "disk_write", "--host", "sim:default", "--seed", "8",
         "--block-sizes", "1048576,67108864", "--volume", "2.5e9", *SMALL,
         "--out", str(disk)])
    run(["calibrate", "net_recv", "--host", "sim:default", "--seed", "9",
         "--rates", "5e7,1e8,2e8", *SMALL, "--out", str(net)])
    run(["fit", str(cpu), str(disk), str(net), "--out", str(profile)])
    return root, profile


class TestCalibrate:
    def test_unknown_kind_is_usage_error(self):
        run(["calibrate", "gpu", "--out", "x.json"], expect=2)

    def test_csv_output(self, tmp_path):
        out = tmp_path / "d.csv"
        stdout, _ = run(["calibrate", "cpu", "--host", "sim:default",
                         "--loads", "1.0,0.5", *SMALL, "--out", str(out)])
        lines = out.read_text().splitlines()
        assert lines[0] == "label,cores,freq_hz,rho_acps,power_w,stddev_w"
        assert len(lines) == 1 + 2 * 2 * 3
        assert "calibrated" in stdout

    def test_unknown_sim_config_fails(self, tmp_path):
        run(["calibrate", "cpu", "--host", "sim:bogus",
             "--out", str(tmp_path / "x.json")], expect=1)

    def test_record_dir_and_reingest(self, tmp_path):
        out = tmp_path / "d.json"
        rec = tmp_path / "rec"
        run(["calibrate", "cpu", "--host", "sim:default", "--seed", "7",
             "--loads", "1.0,0.5", *SMALL, "--out", str(out),
             "--record-dir", str(rec)])
        assert (rec / "record.json").exists()
        assert (rec / "truth.json").exists()
        # re-ingest the directory as a host
        out2 = tmp_path / "d2.json"
        run(["calibrate", "cpu", "--host", str(rec), "--out", str(out2)])
        assert json.loads(out.read_text()) == json.loads(out2.read_text())

    def test_recorded_dir_with_missing_slot_warns_but_succeeds(self, tmp_path):
        out = tmp_path / "d.json"
        rec = tmp_path / "rec"
        run(["calibrate", "cpu", "--host", "sim:default", "--seed", "7",
             "--loads", "1.0,0.5", *SMALL, "--out", str(out),
             "--record-dir", str(rec)])
        victim = next(iter(rec.glob("*.power.csv")))
        victim.unlink()
        out2 = tmp_path / "d2.json"
        stdout, stderr = run(["calibrate", "cpu", "--host", str(rec),
                              "--out", str(out2)])  # exit 0
        assert "warning" in stderr
        assert "(1 failures)" in stdout


class TestFit:
    def test_degree_nine_is_usage_error(self, pipeline):
        root, _ = pipeline
        run(["fit", str(root / "cpu.json"), "--degree", "9",
             "--out", str(root / "p9.json")], expect=2)

    def test_missing_dataset_file(self, tmp_path):
        run(["fit", str(tmp_path / "none.json"), "--out", str(tmp_path / "p.json")],
            expect=1)

    def test_profile_written_with_models(self, pipeline):
        _, profile = pipeline
        doc = json.loads(profile.read_text())
        assert doc["kind"] == "server_profile"
        assert doc["disk"] is not None
        assert doc["network"] is not None
        assert len(doc["cpu_curves"]) == 4

    def test_cpu_only_dataset_warns_about_missing_models(self, pipeline, tmp_path):
        root, _ = pipeline
        out = tmp_path / "cpu_only.json"
        _, stderr = run(["fit", str(root / "cpu.json"), "--out", str(out)])
        assert "no usable disk observations" in stderr
        assert "no usable network observations" in stderr


class TestEstimate:
    TRACE = (
        "phase,cycles,duration_s,v_dr,v_dw,v_ns,v_nr,rate_bps,pkt_b,block_b,cores,freq_hz\n"
        "p0,30000000000,30,0,100000000,0,,100000000,64,67108864,2,1596000000\n"
    )

    def test_text_and_csv_formats(self, pipeline, tmp_path):
        _, profile = pipeline
        trace = tmp_path / "trace.csv"
        trace.write_text(self.TRACE)
        text, _ = run(["estimate", str(profile), str(trace)])
        assert "TOTAL" in text
        csv_text, _ = run(["estimate", str(profile), str(trace), "--format", "csv"])
        assert csv_text.startswith("phase,duration_s")

    def test_structured_trace_input(self, pipeline, tmp_path):
        from wattbench.core import canonical_json
        from wattbench.estimator import trace_from_csv

        _, profile = pipeline
        doc = trace_from_csv(self.TRACE).to_doc()
        path = tmp_path / "trace.json"
        path.write_text(canonical_json(doc))
        text, _ = run(["estimate", str(profile), str(path)])
        assert "TOTAL" in text

    def test_empty_trace_zero_estimate(self, pipeline, tmp_path):
        _, profile = pipeline
        trace = tmp_path / "empty.csv"
        trace.write_text(self.TRACE.splitlines()[0] + "\n")
        csv_text, _ = run(["estimate", str(profile), str(trace), "--format", "csv"])
        assert csv_text.splitlines()[-1].startswith("TOTAL,0")

    def test_uncalibrated_frequency_names_phase(self, pipeline, tmp_path):
        _, profile = pipeline
        trace = tmp_path / "bad.csv"
        trace.write_text(self.TRACE.replace("1596000000", "999000000"))
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            try:
                code = main(["estimate", str(profile), str(trace)])
            except SystemExit as exc:
                code = exc.code
        assert code == 1
        assert "p0" in err.getvalue()


class TestReport:
    def test_report_writes_files(self, pipeline, tmp_path):
        _, profile = pipeline
        out_dir = tmp_path / "rep"
        stdout, _ = run(["report", str(profile), "--out-dir", str(out_dir)])
        names = {p.name for p in out_dir.iterdir()}
        assert names == {
            "report_cpu_curves.csv",
            "report_cpu_efficiency.csv",
            "report_envelope_minimal_power.csv",
            "report_envelope_maximal_efficiency.csv",
            "report_manifest.json",
        }

    def test_envelope_report_on_profile_without_envelopes(self, pipeline, tmp_path):
        root, _ = pipeline
        bare = tmp_path / "bare.json"
        run(["fit", str(root / "cpu.json"), "--no-envelopes", "--out", str(bare)])
        run(["report", str(bare), "--what", "envelopes",
             "--out-dir", str(tmp_path / "rep")], expect=1)

    def test_single_kind_report(self, pipeline, tmp_path):
        _, profile = pipeline
        out_dir = tmp_path / "rep2"
        run(["report", str(profile), "--what", "curves", "--out-dir", str(out_dir)])
        names = {p.name for p in out_dir.iterdir()}
        assert names == {"report_cpu_curves.csv", "report_manifest.json"}
