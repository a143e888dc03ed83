import math
import random

import numpy as np
import pytest

from wattbench.errors import CounterRegression, InsufficientSamples, NonMonotonicTimestamp, ParseError
from wattbench.hostsim import GroundTruth, SimulatedHost
from wattbench.telemetry import (
    CoreTicks,
    PowerSample,
    TickSnapshot,
    Timeslot,
    classify_ticks,
    parse_power_stream,
    parse_tick_stream,
    slot_statistics,
    ticks_to_acps,
)


def snap(ts, **counters):
    base = dict(user=0, nice=0, system=0, irq=0, softirq=0, iowait=0, idle=0)
    base.update(counters)
    return TickSnapshot(ts, (CoreTicks(**base),))


class TestClassifyTicks:
    def test_direct_delta(self):
        assert classify_ticks(snap(0.0), snap(1.0, user=100, idle=900)) == (100, 900)

    def test_iowait_is_passive(self):
        prev = snap(0.0, user=50, iowait=10)
        curr = snap(1.0, user=80, iowait=40)
        assert classify_ticks(prev, curr) == (30, 30)

    def test_counter_regression(self):
        with pytest.raises(CounterRegression):
            classify_ticks(snap(0.0, user=10), snap(1.0, user=5))

    def test_timestamp_must_advance(self):
        with pytest.raises(CounterRegression):
            classify_ticks(snap(1.0), snap(1.0))

    def test_core_count_change_rejected(self):
        two = TickSnapshot(1.0, (CoreTicks(0, 0, 0, 0, 0, 0, 0),) * 2)
        with pytest.raises(CounterRegression):
            classify_ticks(snap(0.0), two)

    def test_sums_across_cores(self):
        prev = TickSnapshot(0.0, (CoreTicks(0, 0, 0, 0, 0, 0, 0),) * 2)
        curr = TickSnapshot(
            1.0,
            (
                CoreTicks(40, 0, 10, 0, 0, 0, 50),
                CoreTicks(20, 5, 0, 1, 2, 30, 42),
            ),
        )
        assert classify_ticks(prev, curr) == (40 + 10 + 20 + 5 + 1 + 2, 50 + 30 + 42)


class TestTicksToAcps:
    def test_fully_loaded_core_equals_clock(self):
        assert ticks_to_acps(100, 2.0e9, 1.0) == 2.0e9

    def test_half_loaded_core(self):
        # 50/100 x 1.596 GHz, hand-computed
        assert ticks_to_acps(50, 1.596e9, 1.0) == pytest.approx(7.98e8, rel=1e-12)

    def test_idle(self):
        assert ticks_to_acps(0, 2.4e9, 1.0) == 0.0

    def test_linear_in_ticks_and_frequency(self):
        base = ticks_to_acps(10, 1e9, 2.0)
        assert ticks_to_acps(30, 1e9, 2.0) == pytest.approx(3 * base, rel=1e-12)
        assert ticks_to_acps(10, 3e9, 2.0) == pytest.approx(3 * base, rel=1e-12)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            ticks_to_acps(10, 1e9, 0.0)
        with pytest.raises(ValueError):
            ticks_to_acps(10, -1e9, 1.0)


class TestParsePowerStream:
    def test_two_samples(self):
        samples = parse_power_stream("0.0,84.5\n1.0,84.7\n")
        assert samples == [PowerSample(0.0, 84.5), PowerSample(1.0, 84.7)]

    def test_non_monotonic(self):
        with pytest.raises(NonMonotonicTimestamp):
            parse_power_stream("1.0,84.5\n0.5,84.0\n")

    def test_malformed_line_reports_number(self):
        with pytest.raises(ParseError) as err:
            parse_power_stream("0.0,84.5\nbroken\n")
        assert err.value.line_number == 2

    def test_non_positive_power_rejected(self):
        with pytest.raises(ParseError):
            parse_power_stream("0.0,0.0\n")

    def test_bytes_input(self):
        assert len(parse_power_stream(b"0.0,10.0\n1.0,11.0\n")) == 2

    def test_hostsim_constant_slot(self):
        # A noiseless, fully idle host with no OS-noise ticks draws its
        # baseline exactly; the emitted slot must parse back identically.
        truth = GroundTruth(baseline=85.0, noise_sigma=0.0, os_noise_ticks=0)
        host = SimulatedHost(truth, seed=1)
        host.apply_cpu_load(0.0, 1, 30)
        text = "\n".join(f"{s.timestamp!r},{s.watts!r}" for s in host.power_stream())
        samples = parse_power_stream(text)
        assert len(samples) == 30
        assert math.fsum(s.watts for s in samples) / 30 == 85.0


class TestParseTickStream:
    def test_round_trip_rows(self):
        text = "0.0,0,1,0,2,0,0,3,94\n0.0,1,0,0,0,0,0,0,100\n1.0,0,5,0,2,0,0,3,190\n1.0,1,0,0,0,0,0,0,200\n"
        snaps = parse_tick_stream(text)
        assert len(snaps) == 2
        assert snaps[0].cores[0].user == 1
        assert classify_ticks(snaps[0], snaps[1]) == (4, 96 + 100)

    def test_missing_core_rejected(self):
        with pytest.raises(ParseError):
            parse_tick_stream("0.0,1,0,0,0,0,0,0,100\n")


class TestSlotStatistics:
    def test_constant_signal(self):
        samples = [PowerSample(float(t), 100.0) for t in range(30)]
        slot = Timeslot(0.0, 30.0, "constant")
        assert slot_statistics(samples, slot, 5.0) == (100.0, 0.0, 20)

    def test_ramp_transient_excluded(self):
        ramp = [PowerSample(float(t), 20.0 * (t + 1)) for t in range(5)]
        flat = [PowerSample(float(t), 100.0) for t in range(5, 30)]
        mean, stddev, count = slot_statistics(ramp + flat, Timeslot(0, 30, "ramp"), 5.0)
        assert (mean, stddev, count) == (100.0, 0.0, 20)

    def test_gaussian_noise_mean(self):
        # Oracle: direct averaging of the same draws across 10 repetitions.
        rng = np.random.default_rng(7)
        kept = []
        results = []
        for rep in range(10):
            watts = 85.0 + 0.5 * rng.standard_normal(30)
            samples = [PowerSample(float(t), float(w)) for t, w in enumerate(watts)]
            mean, _, count = slot_statistics(samples, Timeslot(0, 30, f"rep{rep}"), 5.0)
            assert count == 20
            kept.extend(watts[5:25])
            results.append(mean)
        oracle = math.fsum(kept) / len(kept)
        pooled = math.fsum(results) / len(results)
        assert pooled == pytest.approx(oracle, rel=1e-12)
        assert abs(pooled - 85.0) < 0.5

    def test_reorder_invariance_and_outside_samples(self):
        rng = random.Random(3)
        samples = [PowerSample(float(t), 80.0 + (t % 7)) for t in range(30)]
        slot = Timeslot(0.0, 30.0, "s")
        expected = slot_statistics(samples, slot, 5.0)
        shuffled = samples[:]
        rng.shuffle(shuffled)
        shuffled += [PowerSample(-5.0, 1000.0), PowerSample(99.0, 1000.0)]
        assert slot_statistics(shuffled, slot, 5.0) == expected

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            slot_statistics([PowerSample(6.0, 10.0)], Timeslot(0, 30, "x"), 5.0)

    def test_slot_too_short_for_trim(self):
        samples = [PowerSample(float(t), 10.0) for t in range(8)]
        with pytest.raises(InsufficientSamples):
            slot_statistics(samples, Timeslot(0.0, 8.0, "x"), 5.0)
