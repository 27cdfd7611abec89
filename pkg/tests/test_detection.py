from dataclasses import replace

import numpy as np
import pytest

from heraldsim.calibration import predicted_rates
from heraldsim.coincidence import CoincidenceConfig, count
from heraldsim.errors import ConfigError
from heraldsim.detection import (ChannelMap, DetectorModel, PulseClock, apply_dead_time, check_dead_time,
                                 detect, read_tags_binary, read_tags_csv, to_tags, write_tags_binary,
                                 write_tags_csv)
from heraldsim.interference import NetworkConfig, route_batch
from heraldsim.pipeline import Selection, simulate_runs
from heraldsim.source import PhotonBatch
from test_interference import _many_pulses


def test_zero_efficiency_no_darks_is_silent(rng):
    model = DetectorModel(efficiency=(0.0,) * 4, dark_count_rate=0.0)
    routed = route_batch(_many_pulses(1000, [1, 2], [0, 0]), NetworkConfig(), rng)
    streams = detect(routed, model, 1e-3, rng)
    assert all(s.size == 0 for s in streams.values())


def test_dark_counts_only(rng):
    model = DetectorModel(dark_count_rate=100.0)
    routed = route_batch(PhotonBatch.empty(), NetworkConfig(), rng)
    streams = detect(routed, model, 100.0, rng)
    for c, t in streams.items():
        assert 10_000 - 300 <= t.size <= 10_000 + 300
        assert np.all((t >= 0) & (t < 100 * 10**12))


def test_unit_efficiency_detects_every_photon(rng):
    model = DetectorModel(efficiency=(1.0,) * 4, dark_count_rate=0.0, dead_time=0.0)
    routed = route_batch(_many_pulses(500, [1], [0]), NetworkConfig(), rng)
    streams = detect(routed, model, 1e-3, rng)
    assert streams[1].size == 500
    assert streams[2].size + streams[3].size == 500


def test_dead_time_filter_and_invariant():
    model = DetectorModel(dead_time=30e-9)
    t = np.array([0, 10_000, 29_999, 30_000, 45_000, 61_000, 200_000], np.int64)
    out = apply_dead_time({1: t}, model)[1]
    np.testing.assert_array_equal(out, [0, 30_000, 61_000, 200_000])
    assert check_dead_time({1: out}, model) == {}
    assert check_dead_time({1: t}, model) == {1: 1}


def test_simulated_streams_respect_dead_time(setup):
    plan = setup.plan(power_mw=100, duration=0.01, selection=Selection(), key=("dead-time-test",))
    streams = simulate_runs([plan])[0]
    assert check_dead_time(streams, setup.detector) == {}
    assert all(np.all(np.diff(t) >= 0) for t in streams.values())


def test_idler_singles_near_reference(setup):
    plan = setup.plan(power_mw=100, duration=0.05, selection=Selection(sources=(1,), heralds=(1,)),
                      key=("singles-test",))
    rep = count(simulate_runs([plan])[0], setup.coincidence, duration=plan.duration)
    assert rep.rate(1) == pytest.approx(380_000, rel=0.15)


def test_raising_an_efficiency_never_lowers_singles(setup):
    for ch in range(4):
        last = -1.0
        for scale in (0.5, 0.75, 1.0, 1.25):
            eff = list(setup.detector.efficiency)
            eff[ch] *= scale
            s = replace(setup, detector=replace(setup.detector, efficiency=tuple(eff)))
            singles, coinc, _ = predicted_rates(s, setup.detector.transmission, 100)
            value = singles if ch == 0 else coinc
            assert value >= last - 1e-9
            last = value


def test_model_validation():
    with pytest.raises(ConfigError):
        DetectorModel(efficiency=(0.5, 0.5, 0.5, 0.5), transmission=(3.0, 1.0, 1.0, 1.0))
    with pytest.raises(ConfigError, match="dead_time"):
        DetectorModel(dead_time=-1.0)
    with pytest.raises(ConfigError, match="dark_count_rate"):
        DetectorModel(dark_count_rate=-1.0)
    with pytest.raises(ConfigError):
        ChannelMap(1, 1, 3, 4)
    with pytest.raises(ValueError):
        detect(None, DetectorModel(), 0.0, None)


def test_pulse_clock_exact_and_overflow_safe():
    clock = PulseClock(76e6)
    idx = np.array([0, 1, 76, 76_000_000, 38 * 10**12], np.int64)
    expected = [0, 13157, 1_000_000, 10**12, 5 * 10**17]
    np.testing.assert_array_equal(clock.time_ps(idx), expected)
    assert clock.first_pulse_at_or_after(1_000_000) == 76
    assert clock.first_pulse_at_or_after(1_000_001) == 77


def _example_streams(rng):
    return {c: np.sort(rng.integers(0, 10**9, 200 * c)).astype(np.int64) for c in (1, 2, 3, 4)}


def test_binary_and_csv_roundtrip(tmp_path, rng):
    streams = _example_streams(rng)
    write_tags_binary(tmp_path / "t.bin", streams)
    assert (tmp_path / "t.bin").stat().st_size == 9 * sum(s.size for s in streams.values())
    write_tags_csv(tmp_path / "t.csv", streams)
    for back in (read_tags_binary(tmp_path / "t.bin"), read_tags_csv(tmp_path / "t.csv")):
        for c in streams:
            np.testing.assert_array_equal(back[c], streams[c])
    tags = to_tags(streams)
    assert len(tags) == sum(s.size for s in streams.values())
    assert all(a.time <= b.time for a, b in zip(tags, tags[1:]))


def test_binary_record_layout(tmp_path):
    write_tags_binary(tmp_path / "t.bin", {1: np.array([5], np.int64), 2: np.array([2**40], np.int64),
                                           3: np.empty(0, np.int64), 4: np.empty(0, np.int64)})
    raw = (tmp_path / "t.bin").read_bytes()
    assert raw == bytes([1]) + (5).to_bytes(8, "little") + bytes([2]) + (2**40).to_bytes(8, "little")


def test_bad_tag_files(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"\x01" * 10)
    with pytest.raises(ValueError, match="multiple"):
        read_tags_binary(tmp_path / "bad.bin")
    (tmp_path / "bad.csv").write_text("channel,time_ps\n7,100\n")
    with pytest.raises(ValueError, match="channel 7"):
        read_tags_csv(tmp_path / "bad.csv")
    (tmp_path / "empty.csv").write_text("channel,time_ps\n")
    assert all(v.size == 0 for v in read_tags_csv(tmp_path / "empty.csv").values())
