"""Windowed multi-fold coincidence counting over time-tag streams."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, InsufficientCountsError, UnsortedStreamError

DEFAULT_SETS = ((1, 2), (1, 3), (2, 3), (1, 2, 3), (1, 2, 3, 4))


def _set_key(channels):
    return ",".join(str(c) for c in channels)


@dataclass(frozen=True)
class CoincidenceConfig:
    window: float = 1e-9
    sets: tuple = DEFAULT_SETS
    pulse_period: float = 1.0 / 76e6

    def __post_init__(self):
        if not 0 < self.window < self.pulse_period:
            raise ConfigError("window", f"must lie in (0, {self.pulse_period:.4g}) s, got {self.window!r}")
        norm = []
        for s in self.sets:
            s = tuple(sorted(int(c) for c in s))
            if len(s) < 2 or len(set(s)) != len(s) or not set(s) <= {1, 2, 3, 4}:
                raise ConfigError("sets", f"invalid channel set {s}")
            norm.append(s)
        if len(norm) > 32:
            raise ConfigError("sets", "at most 32 channel sets")
        object.__setattr__(self, "sets", tuple(norm))

    @property
    def window_ps(self):
        return int(round(self.window * 1e12))


@dataclass
class CountReport:
    duration: float
    singles: dict = field(default_factory=dict)
    coincidences: dict = field(default_factory=dict)

    def cc(self, *channels):
        return self.coincidences[tuple(sorted(channels))]

    def rate(self, *channels):
        n = self.singles[channels[0]] if len(channels) == 1 else self.cc(*channels)
        return n / self.duration

    def __add__(self, other):
        return CountReport(
            self.duration + other.duration,
            {c: self.singles.get(c, 0) + other.singles.get(c, 0) for c in set(self.singles) | set(other.singles)},
            {s: self.coincidences.get(s, 0) + other.coincidences.get(s, 0)
             for s in set(self.coincidences) | set(other.coincidences)},
        )

    def violations(self):
        """Descriptions of broken count invariants (empty when consistent)."""
        bad = []
        for s, n in self.coincidences.items():
            lowest = min(self.singles.get(c, 0) for c in s)
            if n > lowest:
                bad.append(f"{_set_key(s)}: {n} exceeds smallest single {lowest}")
            for t, m in self.coincidences.items():
                if set(t) < set(s) and n > m:
                    bad.append(f"{_set_key(s)}: {n} exceeds subset {_set_key(t)} = {m}")
        return bad

    def to_dict(self):
        return {
            "duration_s": self.duration,
            "singles": {str(c): int(self.singles[c]) for c in sorted(self.singles)},
            "coincidences": {_set_key(s): int(self.coincidences[s]) for s in sorted(self.coincidences)},
            "singles_rate_hz": {str(c): self.singles[c] / self.duration for c in sorted(self.singles)},
            "coincidence_rate_hz": {_set_key(s): self.coincidences[s] / self.duration
                                    for s in sorted(self.coincidences)},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["duration_s"]),
            {int(k): int(v) for k, v in d["singles"].items()},
            {tuple(int(c) for c in k.split(",")): int(v) for k, v in d["coincidences"].items()},
        )


def check_sorted(streams):
    for c in sorted(streams):
        t = np.asarray(streams[c])
        drops = np.flatnonzero(np.diff(t) < 0)
        if drops.size:
            raise UnsortedStreamError(c, int(drops[0] + 1))


def _count_segment(args):
    times, channels, masks, window = args
    return kernels.count_coincidences(times, channels, masks, window)


def split_points(times, window, n_segments):
    """Cut indices at gaps longer than the window, close to equal-size segments.

    No coincidence can straddle such a gap, so counting segments separately is
    exact.
    """
    if n_segments <= 1 or times.size < 2:
        return []
    gaps = np.flatnonzero(np.diff(times) > window) + 1
    if gaps.size == 0:
        return []
    targets = (np.arange(1, n_segments) * times.size) // n_segments
    cuts = np.unique(gaps[np.minimum(np.searchsorted(gaps, targets), gaps.size - 1)])
    return [int(c) for c in cuts if 0 < c < times.size]


def count(streams, cfg=None, duration=None, workers=1):
    """CountReport for ``streams`` (channel -> sorted int64 ps)."""
    cfg = cfg or CoincidenceConfig()
    check_sorted(streams)
    chans = sorted(streams)
    times, channels = kernels.merge_streams([streams[c] for c in chans], chans)
    if duration is None:
        duration = (times[-1] - times[0]) * 1e-12 if times.size > 1 else 0.0
        duration = duration or 1.0
    masks = np.array([sum(1 << c for c in s) for s in cfg.sets], dtype=np.uint32)
    w = cfg.window_ps
    cuts = split_points(times, w, workers)
    if cuts:
        bounds = [0] + cuts + [times.size]
        jobs = [(times[a:b], channels[a:b], masks, w) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            totals = np.sum(list(pool.map(_count_segment, jobs)), axis=0)
    else:
        totals = kernels.count_coincidences(times, channels, masks, w)
    return CountReport(
        float(duration),
        {c: int(np.asarray(streams[c]).size) for c in chans},
        {s: int(n) for s, n in zip(cfg.sets, totals)},
    )


def g2_heralded(report, herald=1, signals=(2, 3)):
    """Heralded second-order correlation 2 N_hab N_h / (N_ha + N_hb)^2 and its
    Poisson uncertainty (all counts treated as independent)."""
    h, a, b = herald, signals[0], signals[1]
    n_h = report.singles[h]
    n_ha, n_hb = report.cc(h, a), report.cc(h, b)
    n_hab = report.cc(h, a, b)
    doubles = n_ha + n_hb
    if doubles == 0:
        raise InsufficientCountsError("insufficient counts: no herald-signal coincidences")
    g2 = 2.0 * n_hab * n_h / doubles**2
    # a zero triple count still carries the uncertainty of one count
    rel = np.sqrt(1.0 / max(n_hab, 1) + 1.0 / max(n_h, 1) + 4.0 / doubles)
    sigma = (g2 if n_hab else 2.0 * n_h / doubles**2) * rel
    return g2, float(sigma)
