"""Threshold detector model and time-tag streams.

Tag times are integer picoseconds.  Pulse ``n`` arrives at
``n * 10**12 // repetition_rate`` ps, evaluated with exact integer arithmetic so
that block boundaries never move a tag.
"""
from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import ConfigError
from .interference import PORT_A, PORT_B, TO_IDLER_DETECTOR
from .source import UNDECIDED

CHANNELS = (1, 2, 3, 4)
TAG_RECORD = struct.Struct("<BQ")


@dataclass(frozen=True)
class ChannelMap:
    idler1: int = 1
    port_a: int = 2
    port_b: int = 3
    idler2: int = 4

    def __post_init__(self):
        if sorted((self.idler1, self.port_a, self.port_b, self.idler2)) != list(CHANNELS):
            raise ConfigError("channels", "roles must map one-to-one onto channels 1-4")


@dataclass(frozen=True)
class DetectorModel:
    """Per-channel efficiency and path transmission, indexed by channel - 1."""

    efficiency: tuple = (0.23, 0.22, 0.19, 0.11)
    transmission: tuple = (1.0, 1.0, 1.0, 1.0)
    dark_count_rate: float = 100.0
    dead_time: float = 30e-9
    jitter: float = 0.0
    channels: ChannelMap = ChannelMap()

    def __post_init__(self):
        if len(self.efficiency) != 4 or len(self.transmission) != 4:
            raise ConfigError("efficiency", "need four per-channel values")
        for ch in CHANNELS:
            p = self.probability(ch)
            if not 0.0 <= p <= 1.0:
                raise ConfigError("transmission", f"channel {ch}: efficiency x transmission = {p} not in [0, 1]")
        if not self.dark_count_rate >= 0:
            raise ConfigError("dark_count_rate", f"must be >= 0, got {self.dark_count_rate!r}")
        if not self.dead_time >= 0:
            raise ConfigError("dead_time", f"must be >= 0, got {self.dead_time!r}")
        if not self.jitter >= 0:
            raise ConfigError("jitter", f"must be >= 0, got {self.jitter!r}")

    def probability(self, channel):
        return float(self.efficiency[channel - 1]) * float(self.transmission[channel - 1])

    def herald_probability(self, source):
        ch = self.channels.idler1 if source == 1 else self.channels.idler2
        return self.probability(ch)

    @property
    def dead_time_ps(self):
        return int(round(self.dead_time * 1e12))


class PulseClock:
    def __init__(self, repetition_rate):
        r = Fraction(repetition_rate).limit_denominator(10**6)
        period = Fraction(10**12) / r
        self.num, self.den = period.numerator, period.denominator
        self.period_ps = float(period)

    def time_ps(self, index):
        # split the index so the product cannot overflow int64
        q, r = np.divmod(np.asarray(index, dtype=np.int64), self.den)
        return q * self.num + (r * self.num) // self.den

    def first_pulse_at_or_after(self, t_ps):
        return -((-int(t_ps) * self.den) // self.num)


@dataclass(frozen=True)
class TimeTag:
    channel: int
    time: float


def photon_channels(routed, model):
    """Detector channel reached by each photon (0 when it reaches none)."""
    b, out, cm = routed.batch, routed.output, model.channels
    ch = np.zeros(out.size, dtype=np.uint8)
    idler = out == TO_IDLER_DETECTOR
    ch[idler & (b.source == 1)] = cm.idler1
    ch[idler & (b.source == 2)] = cm.idler2
    ch[out == PORT_A] = cm.port_a
    ch[out == PORT_B] = cm.port_b
    return ch


def detect_photons(routed, model, clock, rng):
    """Clicks from photons only, per channel, before dead time.

    Photons whose detection was decided upstream (conditioned sampling) keep
    that decision; all others survive independently with efficiency x transmission.
    A detector that receives several photons in one pulse clicks once.
    """
    ch = photon_channels(routed, model)
    prob = np.zeros(ch.size)
    for c in CHANNELS:
        prob[ch == c] = model.probability(c)
    u = rng.random(ch.size)
    fixed = routed.batch.detected
    # pre-decided flags: bit 1 applies at port B, bit 0 everywhere else
    bit = np.where(routed.output == PORT_B, 2, 1).astype(np.int8)
    hit = np.where(fixed == UNDECIDED, u < prob, (fixed & bit) != 0) & (ch > 0)
    streams = {}
    for c in CHANNELS:
        pulses = np.unique(routed.batch.pulse[hit & (ch == c)])
        t = clock.time_ps(pulses)
        if model.jitter > 0 and t.size:
            t = t + np.rint(rng.normal(0.0, model.jitter * 1e12, t.size)).astype(np.int64)
            t.sort()
        streams[c] = t
    return streams


def dark_counts(model, t_start_ps, t_stop_ps, rng):
    """Homogeneous Poisson dark clicks on every channel in [t_start, t_stop)."""
    span = t_stop_ps - t_start_ps
    out = {}
    for c in CHANNELS:
        n = rng.poisson(model.dark_count_rate * span * 1e-12) if span > 0 else 0
        out[c] = np.sort(rng.integers(t_start_ps, t_stop_ps, size=n, dtype=np.int64)) if n else np.empty(0, np.int64)
    return out


def combine(*stream_sets):
    out = {}
    for c in CHANNELS:
        parts = [s[c] for s in stream_sets if c in s]
        out[c] = np.sort(np.concatenate(parts)) if parts else np.empty(0, np.int64)
    return out


def apply_dead_time(streams, model):
    d = model.dead_time_ps
    return {c: t[kernels.dead_time_mask(t, d)] for c, t in streams.items()}


def detect(routed, model, duration, rng, *, repetition_rate=76e6, t_start=0.0):
    """Tag streams (channel -> sorted int64 ps) over an acquisition of ``duration`` s."""
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration!r}")
    clock = PulseClock(repetition_rate)
    t0 = int(round(t_start * 1e12))
    t1 = t0 + int(round(duration * 1e12))
    photons = detect_photons(routed, model, clock, rng)
    photons = {c: t[(t >= t0) & (t < t1)] for c, t in photons.items()}
    return apply_dead_time(combine(photons, dark_counts(model, t0, t1, rng)), model)


def check_dead_time(streams, model):
    """Index of the first dead-time violation per channel (empty dict when clean)."""
    d = model.dead_time_ps
    bad = {}
    for c, t in streams.items():
        gaps = np.diff(t)
        hits = np.flatnonzero(gaps < d)
        if hits.size:
            bad[c] = int(hits[0] + 1)
    return bad


def to_tags(streams):
    """Flatten into TimeTag records (seconds), ordered by time then channel."""
    t, c = kernels.merge_streams([streams[k] for k in sorted(streams)], sorted(streams))
    return [TimeTag(int(ch), ts * 1e-12) for ts, ch in zip(t.tolist(), c.tolist())]


def write_tags_binary(path, streams):
    t, c = kernels.merge_streams([streams[k] for k in sorted(streams)], sorted(streams))
    rec = np.empty(t.size, dtype=np.dtype([("channel", "u1"), ("time_ps", "<u8")], align=False))
    rec["channel"] = c
    rec["time_ps"] = t
    with open(path, "wb") as fh:
        fh.write(rec.tobytes())


def read_tags_binary(path):
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % TAG_RECORD.size:
        raise ValueError(f"{path}: size {raw.size} is not a multiple of {TAG_RECORD.size}-byte records")
    rec = raw.view(np.dtype([("channel", "u1"), ("time_ps", "<u8")], align=False))
    return _split(rec["channel"], rec["time_ps"].astype(np.int64))


def write_tags_csv(path, streams):
    t, c = kernels.merge_streams([streams[k] for k in sorted(streams)], sorted(streams))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "time_ps"])
        w.writerows(zip(c.tolist(), t.tolist()))


def read_tags_csv(path):
    with warnings.catch_warnings():
        # a header-only file is a valid empty acquisition
        warnings.simplefilter("ignore", UserWarning)
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if data.size == 0:
        return {c: np.empty(0, np.int64) for c in CHANNELS}
    return _split(data[:, 0], data[:, 1])


def _split(channels, times):
    """Per-channel streams in file order (sortedness is checked by the counter)."""
    channels = np.asarray(channels)
    bad = ~np.isin(channels, CHANNELS)
    if bad.any():
        raise ValueError(f"record {int(np.flatnonzero(bad)[0])}: channel {int(channels[bad][0])} not in 1-4")
    return {c: np.asarray(times[channels == c], dtype=np.int64) for c in CHANNELS}

