import json
import math

import pytest

from wattbench.core import (
    ActivityTrace,
    CpuPowerCurve,
    DiskEntry,
    DiskModel,
    EnergyEstimate,
    EnvelopeCurve,
    EnvelopePoint,
    LoadSample,
    NetEntry,
    NetworkModel,
    OperatingPoint,
    Phase,
    PhaseEstimate,
    ServerProfile,
    canonical_json,
    fmt_num,
    load_doc,
)
from wattbench.errors import (
    FormatError,
    RateOutOfDomain,
    SchemaVersionError,
    UncalibratedBlockSize,
    UncalibratedPacketSize,
)


@pytest.fixture
def profile() -> ServerProfile:
    op1 = OperatingPoint(1, 1.6e9)
    op2 = OperatingPoint(2, 1.6e9)
    curves = (
        CpuPowerCurve(op1, (84.5, 1e-8), (1e7, 1.6e9), fit_error=0.001),
        CpuPowerCurve(op2, (84.6, 2e-8, -3e-18), (1e7, 3.2e9), fit_error=0.002),
    )
    disk = DiskModel(
        {
            (1.6e9, 10240, "read"): DiskEntry(2.1e7, 5.5),
            (1.6e9, 104857600, "read"): DiskEntry(2.2e7, 5.4),
            (1.6e9, 10240, "write"): DiskEntry(5.0e5, 6.1),
            (1.6e9, 104857600, "write"): DiskEntry(1.05e7, 8.4),
        }
    )
    net = NetworkModel(
        {
            (1.6e9, 64, "receive"): NetEntry(beta1=0.3, beta2=1e-12),
            (1.6e9, 1470, "send"): NetEntry(beta1=0.25, beta2=0.0),
        },
        rate_domain=(5e7, 9e8),
    )
    envelope = EnvelopeCurve(
        "minimal_power",
        (
            EnvelopePoint(1e7, 84.6, op1),
            EnvelopePoint(1.6e9, 100.5, op1),
            EnvelopePoint(3.2e9, 130.0, op2),
        ),
    )
    return ServerProfile(
        name="unit",
        frequencies=(1.6e9,),
        max_cores=2,
        cpu_curves=curves,
        baseline=84.55,
        baseline_spread=0.1,
        disk=disk,
        network=net,
        envelopes={"minimal_power": envelope},
    )


class TestOperatingPoint:
    def test_bounds(self):
        with pytest.raises(ValueError):
            OperatingPoint(0, 1e9)
        with pytest.raises(ValueError):
            OperatingPoint(1, 0.0)

    def test_max_acps(self):
        assert OperatingPoint(4, 2.5e9).max_acps == 1e10

    def test_ordering_and_hash(self):
        a, b = OperatingPoint(1, 2e9), OperatingPoint(2, 1e9)
        assert a < b
        assert len({a, b, OperatingPoint(1, 2e9)}) == 2


class TestLoadSample:
    def test_rho_bound_is_warning_not_error(self):
        op = OperatingPoint(1, 1e9)
        with pytest.warns(UserWarning):
            sample = LoadSample(rho=1.2e9, power=90.0, operating_point=op)
        assert sample.rho == 1.2e9

    def test_validation(self):
        op = OperatingPoint(1, 1e9)
        with pytest.raises(ValueError):
            LoadSample(rho=-1.0, power=90.0, operating_point=op)
        with pytest.raises(ValueError):
            LoadSample(rho=1.0, power=0.0, operating_point=op)


class TestCpuPowerCurve:
    def test_zero_load_is_exact_baseline(self):
        curve = CpuPowerCurve(OperatingPoint(1, 2e9), (84.5, 3.3e-9), (0.0, 2e9))
        assert curve.evaluate(0.0) == 84.5

    def test_degree_bounds(self):
        op = OperatingPoint(1, 2e9)
        with pytest.raises(ValueError):
            CpuPowerCurve(op, (84.5,), (0, 1))  # degree 0
        with pytest.raises(ValueError):
            CpuPowerCurve(op, tuple([84.5] + [1e-9] * 8), (0, 1))  # degree 8

    def test_baseline_must_be_positive(self):
        with pytest.raises(ValueError):
            CpuPowerCurve(OperatingPoint(1, 2e9), (-1.0, 1e-9), (0, 1e9))

    def test_positivity_over_domain(self):
        with pytest.raises(ValueError):
            CpuPowerCurve(OperatingPoint(1, 2e9), (10.0, -1e-8), (0, 2e9))

    def test_horner_matches_naive(self):
        coeffs = (84.5, 2e-9, -3e-19, 1e-29)
        curve = CpuPowerCurve(OperatingPoint(1, 4e9), coeffs, (0.0, 2e9))
        rho = 1.7e9
        naive = sum(c * rho**k for k, c in enumerate(coeffs))
        assert curve.evaluate(rho) == pytest.approx(naive, rel=1e-14)


class TestEnvelopeCurve:
    def test_strictly_increasing_required(self):
        op = OperatingPoint(1, 1e9)
        with pytest.raises(ValueError):
            EnvelopeCurve(
                "minimal_power",
                (EnvelopePoint(1.0, 2.0, op), EnvelopePoint(1.0, 3.0, op)),
            )

    def test_value_at_interpolates(self):
        op = OperatingPoint(1, 1e9)
        env = EnvelopeCurve(
            "minimal_power",
            (EnvelopePoint(0.0, 10.0, op), EnvelopePoint(2.0, 20.0, op)),
        )
        assert env.value_at(1.0) == 15.0
        assert env.value_at(-1.0) == 10.0
        assert env.value_at(5.0) == 20.0


class TestDiskModel:
    def test_exact_hit(self, profile):
        assert profile.disk.efficiency_at(1.6e9, 10240, "read") == 2.1e7

    def test_log_interpolation_between_blocks(self, profile):
        lo, hi = 10240, 104857600
        mid = int(math.sqrt(lo * hi))
        eff = profile.disk.efficiency_at(1.6e9, mid, "write")
        t = (math.log(mid) - math.log(lo)) / (math.log(hi) - math.log(lo))
        expected = 5.0e5 + (1.05e7 - 5.0e5) * t
        assert eff == pytest.approx(expected, rel=1e-12)

    def test_outside_hull_is_error(self, profile):
        with pytest.raises(UncalibratedBlockSize):
            profile.disk.efficiency_at(1.6e9, 1024, "read")
        with pytest.raises(UncalibratedBlockSize):
            profile.disk.efficiency_at(9.9e9, 10240, "read")


class TestNetworkModel:
    def test_zero_rate_efficiency_is_exactly_zero(self):
        assert NetEntry(beta1=0.3, beta2=-1e-12).efficiency(0.0) == 0.0

    def test_negative_efficiency_rejected_at_construction(self):
        with pytest.raises(ValueError):
            NetworkModel(
                {(1e9, 64, "send"): NetEntry(beta1=1e-3, beta2=-1e-9)},
                rate_domain=(1e7, 1e9),
            )

    def test_rate_domain_enforced(self, profile):
        with pytest.raises(RateOutOfDomain):
            profile.network.efficiency_at(1.6e9, 64, "receive", 1e9)

    def test_unknown_packet_size_outside_hull(self, profile):
        with pytest.raises(UncalibratedPacketSize):
            profile.network.efficiency_at(1.6e9, 9000, "receive", 1e8)


class TestServerProfile:
    def test_baseline_must_lie_within_curve_intercepts(self, profile):
        with pytest.raises(ValueError):
            ServerProfile(
                name="bad",
                frequencies=(1.6e9,),
                max_cores=2,
                cpu_curves=profile.cpu_curves,
                baseline=90.0,
            )

    def test_curve_frequency_must_be_declared(self, profile):
        with pytest.raises(ValueError):
            ServerProfile(
                name="bad",
                frequencies=(2.0e9,),
                max_cores=2,
                cpu_curves=profile.cpu_curves,
                baseline=84.55,
            )

    def test_round_trip_is_bit_identical(self, profile, tmp_path):
        doc = profile.to_doc()
        text = canonical_json(doc)
        path = tmp_path / "profile.json"
        path.write_text(text)
        loaded = ServerProfile.from_doc(load_doc(path, "server_profile"))
        assert canonical_json(loaded.to_doc()) == text
        assert loaded.cpu_curves == profile.cpu_curves
        assert loaded.disk == profile.disk
        assert loaded.network == profile.network
        assert loaded.schema_version == profile.schema_version

    def test_newer_schema_rejected(self, profile):
        doc = profile.to_doc()
        doc["schema_version"] = 99
        with pytest.raises(SchemaVersionError):
            ServerProfile.from_doc(doc)

    def test_wrong_kind_rejected(self, profile):
        doc = profile.to_doc()
        doc["kind"] = "activity_trace"
        with pytest.raises(FormatError):
            ServerProfile.from_doc(doc)


class TestTraceAndEstimate:
    def test_phase_needs_duration_or_load(self):
        op = OperatingPoint(1, 1.6e9)
        with pytest.raises(ValueError):
            Phase(active_cycles=1e9, operating_point=op)
        Phase(active_cycles=1e9, operating_point=op, load_acps=1e9)

    def test_trace_doc_round_trip(self):
        op = OperatingPoint(2, 1.6e9)
        trace = ActivityTrace(
            phases=(
                Phase(
                    label="a",
                    active_cycles=2e9,
                    operating_point=op,
                    duration=10.0,
                    net_send_volume=None,
                    net_rate=1e8,
                    packet_size=64,
                ),
            )
        )
        back = ActivityTrace.from_doc(json.loads(canonical_json(trace.to_doc())))
        assert back == trace
        assert back.phases[0].net_send_volume is None

    def test_estimate_additivity_is_exact_by_construction(self):
        estimate = EnergyEstimate(
            e_baseline_cpu=1234.5678,
            e_disk=17.25,
            e_network=3.125,
            per_phase=(
                PhaseEstimate("p", 10.0, 1e9, 1234.5678, 17.25, 3.125),
            ),
        )
        assert estimate.e_total == estimate.e_baseline_cpu + estimate.e_disk + estimate.e_network
        doc = estimate.to_doc()
        assert doc["e_total_j"] == estimate.e_total

    def test_negative_energy_rejected(self):
        with pytest.raises(ValueError):
            EnergyEstimate(e_baseline_cpu=-1.0, e_disk=0.0, e_network=0.0)


class TestFmtNum:
    def test_round_trip_shortest(self):
        assert fmt_num(84.5) == "84.5"
        assert fmt_num(1596000000.0) == "1596000000.0"
        assert fmt_num(7) == "7"
        value = 0.1 + 0.2
        assert float(fmt_num(value)) == value
