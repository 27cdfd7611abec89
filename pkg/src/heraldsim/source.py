"""Pulsed pair emission with per-Schmidt-mode thermal statistics.

Each Schmidt mode k of a source is an independent two-mode squeezed vacuum, so
the number of pairs it emits per pulse is geometric with mean ``mu * lambda_k``.
Besides plain per-pulse sampling this module provides the conditioned samplers
used by the block simulation, which only materialises pulses that can matter
(pulses with at least one pair, or with a detected idler on a herald arm).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .errors import ConfigError

ARM_SIGNAL = 0
ARM_IDLER = 1
# detection flag for photons whose fate is decided later by the detector model
UNDECIDED = -1

PAIRS_PER_MW = 6.0e-4
REPETITION_RATE = 76e6


def mean_pairs(power_mw, pairs_per_mw=PAIRS_PER_MW):
    """Mean number of pairs per pulse; linear in pump power (low-gain regime)."""
    if not np.isfinite(power_mw) or power_mw < 0:
        raise ConfigError("pump_power", f"must be non-negative, got {power_mw!r}")
    return pairs_per_mw * power_mw


@dataclass(frozen=True)
class EmissionConfig:
    mean_pairs_per_pulse: float
    weights: np.ndarray = field(default_factory=lambda: np.array([1.0]), repr=False)
    repetition_rate: float = REPETITION_RATE
    source_id: int = 1

    def __post_init__(self):
        if not np.isfinite(self.mean_pairs_per_pulse) or self.mean_pairs_per_pulse < 0:
            raise ConfigError("mean_pairs_per_pulse", f"must be non-negative, got {self.mean_pairs_per_pulse!r}")
        if not self.repetition_rate > 0:
            raise ConfigError("repetition_rate", f"must be positive, got {self.repetition_rate!r}")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise ConfigError("weights", "Schmidt weights must be non-negative and sum to one")
        object.__setattr__(self, "weights", w)

    @classmethod
    def at_power(cls, power_mw, weights, *, pairs_per_mw=PAIRS_PER_MW, cutoff=1e-6, **kw):
        w = np.asarray(weights, dtype=float)
        w = w[w >= cutoff]
        return cls(mean_pairs(power_mw, pairs_per_mw), w / w.sum(), **kw)

    @property
    def mode_means(self):
        return self.mean_pairs_per_pulse * self.weights


@dataclass(frozen=True)
class PhotonRecord:
    source: int
    arm: int
    mode: int
    pair: int


@dataclass(frozen=True)
class PulseEvent:
    index: int
    nominal_time: float
    photons: tuple = ()

    def count(self, source=None, arm=None):
        return sum(1 for p in self.photons
                   if (source is None or p.source == source) and (arm is None or p.arm == arm))


@dataclass
class PhotonBatch:
    """Column store of photons, sorted by (pulse, source, mode, arm).

    ``pulses`` lists every pulse that was materialised, including ones whose
    photons were all filtered out; the detector uses it to place dark counts.
    """

    pulse: np.ndarray
    source: np.ndarray
    arm: np.ndarray
    mode: np.ndarray
    detected: np.ndarray
    pulses: np.ndarray

    def __len__(self):
        return self.pulse.size

    @classmethod
    def empty(cls):
        return cls(np.empty(0, np.int64), np.empty(0, np.int8), np.empty(0, np.int8),
                   np.empty(0, np.int32), np.empty(0, np.int8), np.empty(0, np.int64))

    @classmethod
    def from_pulses(cls, pulses):
        rows = [(ev.index, p.source, p.mode, p.arm) for ev in pulses for p in ev.photons]
        rows.sort()
        if not rows:
            b = cls.empty()
            b.pulses = np.array([ev.index for ev in pulses], dtype=np.int64)
            return b
        a = np.array(rows, dtype=np.int64)
        return cls(a[:, 0].copy(), a[:, 1].astype(np.int8), a[:, 3].astype(np.int8),
                   a[:, 2].astype(np.int32), np.full(len(rows), UNDECIDED, np.int8),
                   np.array(sorted({ev.index for ev in pulses}), dtype=np.int64))

    def signals(self):
        return self.arm == ARM_SIGNAL


def thermal_counts(mode_means, size, rng):
    """Pairs per mode per pulse, shape (size, n_modes)."""
    m = np.asarray(mode_means, dtype=float)
    return rng.geometric(1.0 / (1.0 + m), size=(size, m.size)) - 1


def sample_pulse(emissions, rng, index=0):
    """One pulse from a set of independent sources (a PulseEvent)."""
    photons = []
    pair = 0
    rate = emissions[0].repetition_rate if emissions else REPETITION_RATE
    for cfg in emissions:
        counts = thermal_counts(cfg.mode_means, 1, rng)[0]
        for k, c in enumerate(counts):
            for _ in range(int(c)):
                photons.append(PhotonRecord(cfg.source_id, ARM_SIGNAL, k, pair))
                photons.append(PhotonRecord(cfg.source_id, ARM_IDLER, k, pair))
                pair += 1
    return PulseEvent(index, index / rate, tuple(photons))


def _geometric_pmf(mean, n_max):
    q = mean / (1.0 + mean)
    return (1.0 - q) * q ** np.arange(n_max + 1)


class PairNumberModel:
    """Distribution of the total pair number of one source and of its split
    over Schmidt modes.

    The total is a sum of independent geometric variables; its pmf is kept up
    to ``n_max`` with the neglected tail below ``tail``.
    """

    def __init__(self, mode_means, tail=1e-13):
        self.mode_means = np.asarray(mode_means, dtype=float)
        n_max = 8
        while True:
            suffix = self._suffix_tables(n_max)
            if 1.0 - suffix[0].sum() < tail or n_max >= 4096:
                break
            n_max *= 2
        self.n_max = n_max
        self._suffix = suffix
        self.pmf = suffix[0] / suffix[0].sum()

    def _suffix_tables(self, n_max):
        # Q[k][r] = P(modes k.. together emit r pairs)
        k_modes = self.mode_means.size
        q = np.zeros((k_modes + 1, n_max + 1))
        q[k_modes, 0] = 1.0
        for k in range(k_modes - 1, -1, -1):
            q[k] = np.convolve(_geometric_pmf(self.mode_means[k], n_max), q[k + 1])[: n_max + 1]
        return q

    @property
    def p_empty(self):
        return float(self.pmf[0])

    def herald_weights(self, efficiency):
        """Unnormalised pmf of N given at least one idler detected."""
        n = np.arange(self.pmf.size)
        return self.pmf * (1.0 - (1.0 - efficiency) ** n)

    def herald_probability(self, efficiency):
        return float(self.herald_weights(efficiency).sum())

    def sample_totals(self, weights, size, rng):
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), self.n_max).astype(np.int64)

    def sample_modes(self, totals, rng):
        """Split each total over modes.  Returns (owner, mode) per pair,
        sorted by owner then mode; ``owner`` indexes ``totals``."""
        totals = np.asarray(totals, dtype=np.int64)
        k_modes = self.mode_means.size
        owners, modes = [], []
        singles = np.flatnonzero(totals == 1)
        if singles.size:
            m = self.mode_means
            w = m / (1.0 + m)
            cdf = np.cumsum(w / w.sum())
            owners.append(singles)
            modes.append(np.minimum(np.searchsorted(cdf, rng.random(singles.size), side="right"), k_modes - 1))
        multi = np.flatnonzero(totals >= 2)
        if multi.size:
            remaining = totals[multi].copy()
            q = self._suffix
            for k in range(k_modes):
                active = remaining > 0
                if not active.any():
                    break
                if k == k_modes - 1:
                    j = remaining.copy()
                else:
                    g = _geometric_pmf(self.mode_means[k], self.n_max)
                    j = np.zeros_like(remaining)
                    idx = np.flatnonzero(active)
                    u = rng.random(idx.size)
                    for r in np.unique(remaining[idx]):
                        sel = idx[remaining[idx] == r]
                        p = g[: r + 1] * q[k + 1][r - np.arange(r + 1)]
                        cdf = np.cumsum(p)
                        cdf /= cdf[-1]
                        j[sel] = np.minimum(np.searchsorted(cdf, u[remaining[idx] == r], side="right"), r)
                if j.any():
                    owners.append(np.repeat(multi, j))
                    modes.append(np.full(int(j.sum()), k))
                remaining -= j
        if not owners:
            return np.empty(0, np.int64), np.empty(0, np.int32)
        owner = np.concatenate(owners).astype(np.int64)
        mode = np.concatenate(modes).astype(np.int32)
        order = np.lexsort((mode, owner))
        return owner[order], mode[order]


def conditional_binomial_at_least_one(n, efficiency, rng):
    """Binomial(n, eta) draws conditioned on being >= 1 (requires n >= 1)."""
    n = np.asarray(n, dtype=np.int64)
    out = np.empty(n.size, dtype=np.int64)
    u = rng.random(n.size)
    for value in np.unique(n):
        sel = n == value
        k = np.arange(1, value + 1)
        p = binom.pmf(k, value, efficiency)
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        out[sel] = 1 + np.minimum(np.searchsorted(cdf, u[sel], side="right"), value - 1)
    return out


def choose_detected(owner, n_detected, rng):
    """Mark ``n_detected[o]`` uniformly chosen members of each owner group.

    ``owner`` must be sorted.
    """
    u = rng.random(owner.size)
    flags = np.zeros(owner.size, dtype=bool)
    if owner.size == 0:
        return flags
    starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    sizes = np.diff(np.r_[starts, owner.size])
    single = starts[sizes == 1]
    flags[single] = n_detected[owner[single]] >= 1
    multi = np.repeat(sizes > 1, sizes)
    if multi.any():
        idx = np.flatnonzero(multi)
        o = owner[idx]
        order = np.lexsort((u[idx], o))
        first = np.searchsorted(o[order], o[order], side="left")
        rank = np.arange(idx.size) - first
        flags[idx[order]] = rank < n_detected[o[order]]
    return flags


def draw_positions(n_pulses, probability, rng):
    """Indices in [0, n_pulses) of pulses selected independently with ``probability``."""
    if probability <= 0 or n_pulses <= 0:
        return np.empty(0, np.int64)
    if probability >= 1:
        return np.arange(n_pulses, dtype=np.int64)
    expected = n_pulses * probability
    chunk = int(expected + 5 * np.sqrt(expected) + 16)
    parts, pos = [], -1
    while True:
        cand = pos + np.cumsum(rng.geometric(probability, size=chunk))
        inside = cand[cand < n_pulses]
        parts.append(inside)
        if inside.size < cand.size:
            break
        pos = int(cand[-1])
    return np.concatenate(parts).astype(np.int64)
