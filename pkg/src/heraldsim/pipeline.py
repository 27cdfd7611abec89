"""Block-wise Monte Carlo of the two-source experiment.

A run covers ``n_pulses`` consecutive laser pulses, split into fixed blocks.
Only pulses that can contribute to the requested counts are materialised:

* ``heralds``: sources whose idler detector must click,
* ``min_live``: minimum number of unblocked signal photons that would be
  detected at whichever splitter port they leave,
* otherwise at least one pair must be emitted.

Selection is exact: the selected pulses are drawn as an independent thinning
of the pulse train, and their contents from the corresponding conditional
distribution.  Detection of the conditioned photons is decided at sampling
time and honoured by the detector model.  What is lost are clicks of
unselected pulses, which matter only through dead time.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binom

from .config import Config
from .detection import (ChannelMap, DetectorModel, PulseClock, apply_dead_time, combine,
                        dark_counts, detect_photons)
from .coincidence import CoincidenceConfig
from .interference import NetworkConfig, route_batch
from .rng import StreamFactory
from .schmidt import decompose, heralded_density_matrix
from .source import (ARM_IDLER, ARM_SIGNAL, UNDECIDED, EmissionConfig, PairNumberModel, PhotonBatch,
                     choose_detected, conditional_binomial_at_least_one, draw_positions)
from .spectral import FrequencyGrid, SourceParams, build_jsa

SOURCES = (1, 2)


@dataclass(frozen=True)
class Selection:
    sources: tuple = SOURCES
    heralds: tuple = ()
    min_live: int = 0


@dataclass(frozen=True)
class RunPlan:
    """Everything a worker needs to simulate blocks of one run."""

    mode_means: dict = field(repr=False)
    network: NetworkConfig
    detector: DetectorModel
    selection: Selection
    n_pulses: int
    repetition_rate: float
    seed: int
    key: tuple
    dark_mode: str = "full"
    guard_ps: int = 0
    block_selected: int = 100_000

    @property
    def duration(self):
        return self.n_pulses / self.repetition_rate


class SelectionTable:
    """Joint conditional distribution of (pairs, live signals) for both sources."""

    def __init__(self, plan):
        sel, det, net = plan.selection, plan.detector, plan.network
        cm = det.channels
        eta_a, eta_b = det.probability(cm.port_a), det.probability(cm.port_b)
        self.p_live = 1.0 - (1.0 - eta_a) * (1.0 - eta_b)
        self.live_pattern = np.array([eta_a * eta_b, eta_a * (1 - eta_b), (1 - eta_a) * eta_b]) / max(self.p_live, 1e-300)
        self.models, weights = {}, []
        for s in SOURCES:
            means = plan.mode_means.get(s) if s in sel.sources else None
            if means is None or not np.any(means):
                self.models[s] = None
                weights.append(np.ones((1, 1)))
                continue
            m = PairNumberModel(means)
            self.models[s] = m
            w = m.herald_weights(det.herald_probability(s)) if s in sel.heralds else m.pmf.copy()
            n = np.arange(w.size)
            if sel.min_live > 0 and s not in net.blocked_signals:
                live = binom.pmf(n[None, :], n[:, None], self.p_live)  # [N, l]
                weights.append(w[:, None] * live)
            else:
                weights.append(w[:, None])
        w1, w2 = weights
        table = w1[:, :, None, None] * w2[None, None, :, :]
        n1 = np.arange(w1.shape[0])[:, None, None, None]
        l1 = np.arange(w1.shape[1])[None, :, None, None]
        n2 = np.arange(w2.shape[0])[None, None, :, None]
        l2 = np.arange(w2.shape[1])[None, None, None, :]
        ok = (n1 + n2 >= 1) & (l1 + l2 >= sel.min_live)
        for s in sel.heralds:
            if self.models.get(s) is None:
                ok &= False
        table = np.where(ok, table, 0.0)
        self.shape = table.shape
        flat = table.ravel()
        self.probability = float(flat.sum())
        self.cdf = np.cumsum(flat) / self.probability if self.probability > 0 else None

    def sample(self, size, rng):
        idx = np.searchsorted(self.cdf, rng.random(size), side="right")
        idx = np.minimum(idx, self.cdf.size - 1)
        return np.unravel_index(idx, self.shape)


def _block_bounds(plan, p_sel):
    if p_sel <= 0:
        size = plan.n_pulses
    else:
        size = int(min(max(plan.block_selected / p_sel, 1e5), 2**40))
    edges = list(range(0, plan.n_pulses, max(size, 1))) + [plan.n_pulses]
    return list(zip(edges[:-1], edges[1:]))


def _source_photons(s, pulse_idx, totals, live, table, plan, rng):
    """Columns for the photons of source ``s`` in the selected pulses."""
    model = table.models[s]
    owner, mode = model.sample_modes(totals, rng)
    n = owner.size
    idler_flag = np.full(n, UNDECIDED, np.int8)
    signal_flag = np.full(n, UNDECIDED, np.int8)
    if s in plan.selection.heralds and n:
        has = totals > 0
        d = np.zeros(totals.size, np.int64)
        d[has] = conditional_binomial_at_least_one(totals[has], plan.detector.herald_probability(s), rng)
        idler_flag = choose_detected(owner, d, rng).astype(np.int8)
    if live is not None and n:
        chosen = choose_detected(owner, live, rng)
        pattern = np.searchsorted(np.cumsum(table.live_pattern), rng.random(n), side="right")
        # bit 0: detected if it leaves port A, bit 1: if it leaves port B
        bits = np.array([3, 1, 2, 2], np.int8)[np.minimum(pattern, 3)]
        signal_flag = np.where(chosen, bits, 0).astype(np.int8)
    pulse = pulse_idx[owner]
    src = np.full(n, s, np.int8)
    return (
        np.concatenate([pulse, pulse]),
        np.concatenate([src, src]),
        np.concatenate([np.full(n, ARM_SIGNAL, np.int8), np.full(n, ARM_IDLER, np.int8)]),
        np.concatenate([mode, mode]),
        np.concatenate([signal_flag, idler_flag]),
    )


def build_batch(plan, table, pulse_idx, rng):
    """PhotonBatch for the given selected pulses, sorted by (pulse, source, mode, arm)."""
    n1, l1, n2, l2 = table.sample(pulse_idx.size, rng)
    counts = {1: (np.asarray(n1, np.int64), np.asarray(l1, np.int64)),
              2: (np.asarray(n2, np.int64), np.asarray(l2, np.int64))}
    cols = []
    for s in SOURCES:
        totals, live = counts[s]
        if table.models[s] is None or not totals.any():
            continue
        counted = plan.selection.min_live > 0 and s not in plan.network.blocked_signals
        cols.append(_source_photons(s, pulse_idx, totals, live if counted else None, table, plan, rng))
    if not cols:
        b = PhotonBatch.empty()
        b.pulses = pulse_idx
        return b
    pulse, src, arm, mode, det = (np.concatenate(c) for c in zip(*cols))
    order = np.lexsort((arm, mode, src, pulse))
    return PhotonBatch(pulse[order], src[order], arm[order], mode[order], det[order], pulse_idx)


def local_dark_counts(model, centers_ps, guard_ps, t0, t1, rng):
    """Dark clicks restricted to the union of [c - guard, c + guard] windows."""
    if centers_ps.size == 0 or model.dark_count_rate == 0:
        return {c: np.empty(0, np.int64) for c in (1, 2, 3, 4)}
    lo = np.maximum(centers_ps - guard_ps, t0)
    hi = np.minimum(centers_ps + guard_ps + 1, t1)
    # merge overlapping windows (centres are sorted)
    new = np.r_[True, lo[1:] > np.maximum.accumulate(hi)[:-1]]
    starts = lo[new]
    ends = np.maximum.reduceat(hi, np.flatnonzero(new))
    lengths = ends - starts
    cum = np.r_[0, np.cumsum(lengths)]
    out = {}
    for c in (1, 2, 3, 4):
        n = rng.poisson(model.dark_count_rate * cum[-1] * 1e-12)
        u = np.sort(rng.integers(0, cum[-1], size=n, dtype=np.int64))
        k = np.searchsorted(cum, u, side="right") - 1
        out[c] = starts[k] + (u - cum[k])
    return out


def simulate_block(plan, bounds, block_index):
    """Raw click streams (before dead time) of one block."""
    start, stop = bounds
    rng = StreamFactory(plan.seed).generator(*plan.key, "block", block_index)
    table = SelectionTable(plan)
    clock = PulseClock(plan.repetition_rate)
    t0, t1 = int(clock.time_ps(start)), int(clock.time_ps(stop))
    if table.probability > 0:
        pulse_idx = start + draw_positions(stop - start, table.probability, rng)
        batch = build_batch(plan, table, pulse_idx, rng)
        routed = route_batch(batch, plan.network, rng)
        photons = detect_photons(routed, plan.detector, clock, rng)
    else:
        pulse_idx = np.empty(0, np.int64)
        photons = {c: np.empty(0, np.int64) for c in (1, 2, 3, 4)}
    if plan.dark_mode == "full":
        darks = dark_counts(plan.detector, t0, t1, rng)
    elif plan.dark_mode == "local":
        darks = local_dark_counts(plan.detector, clock.time_ps(pulse_idx), plan.guard_ps, t0, t1, rng)
    else:
        darks = {}
    return combine(photons, darks), int(pulse_idx.size)


def _run_block(args):
    return simulate_block(*args)


def simulate_runs(plans, workers=1):
    """Tag streams (after dead time) for each plan; identical for any worker count."""
    tasks, owners = [], []
    for i, plan in enumerate(plans):
        p_sel = SelectionTable(plan).probability
        for b, bounds in enumerate(_block_bounds(plan, p_sel)):
            tasks.append((plan, bounds, b))
            owners.append(i)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, tasks, chunksize=1))
    else:
        results = [_run_block(t) for t in tasks]
    out = []
    for i, plan in enumerate(plans):
        parts = [r[0] for r, o in zip(results, owners) if o == i]
        merged = {c: np.concatenate([p[c] for p in parts]) for c in (1, 2, 3, 4)}
        out.append(apply_dead_time(merged, plan.detector))
    return out


@dataclass
class Setup:
    """Physical model assembled from a configuration."""

    config: Config
    source1: SourceParams
    source2: SourceParams
    grid: FrequencyGrid
    jsa1: object = field(repr=False)
    schmidt1: object = field(repr=False)
    schmidt2: object = field(repr=False)
    rho1: object = field(repr=False)
    rho2: object = field(repr=False)
    network: NetworkConfig = field(repr=False)
    detector: DetectorModel = field(repr=False)
    coincidence: CoincidenceConfig = field(repr=False)
    pairs_per_mw: float = 6e-4
    repetition_rate: float = 76e6
    cutoff: float = 1e-6
    seed: int = 1584
    workers: int = 1

    @classmethod
    def from_config(cls, config=None, seed=None, workers=None):
        cfg = config or Config.load()
        src = source_params(cfg)
        src2 = replace(src, center_offset=cfg.float("source2", "center_offset_rad_s", 0.0))
        grid = FrequencyGrid.around_degeneracy(src, cfg.int("grid", "n_points"),
                                               cfg.float("grid", "span_pump_sigmas"))
        jsa1 = build_jsa(src, grid)
        d1 = decompose(jsa1)
        d2 = d1 if src2 == src else decompose(build_jsa(src2, grid))
        rho1 = heralded_density_matrix(d1, "signal")
        rho2 = heralded_density_matrix(d2, "signal")
        rep = cfg.float("emission", "repetition_rate_hz")
        network = NetworkConfig.from_density_matrices(
            rho1, rho2,
            half_range=cfg.float("network", "overlap_half_range_ps") * 1e-12,
            n=cfg.int("network", "overlap_points"),
            reflectivity=cfg.float("network", "reflectivity"),
            extra_distinguishability=cfg.float("network", "extra_distinguishability"),
        )
        detector = detector_model(cfg)
        coinc = CoincidenceConfig(window=cfg.float("coincidence", "window_ns") * 1e-9, pulse_period=1.0 / rep)
        return cls(cfg, src, src2, grid, jsa1, d1, d2, rho1, rho2, network, detector, coinc,
                   pairs_per_mw=cfg.float("emission", "pairs_per_mw"), repetition_rate=rep,
                   cutoff=cfg.float("emission", "schmidt_cutoff"),
                   seed=cfg.int("simulation", "seed") if seed is None else int(seed),
                   workers=cfg.int("simulation", "workers") if workers is None else int(workers))

    def emission(self, source, power_mw):
        d = self.schmidt1 if source == 1 else self.schmidt2
        return EmissionConfig.at_power(power_mw, d.coefficients, pairs_per_mw=self.pairs_per_mw,
                                       cutoff=self.cutoff, repetition_rate=self.repetition_rate,
                                       source_id=source)

    def mode_means(self, power_mw, sources=SOURCES):
        return {s: self.emission(s, power_mw).mode_means for s in sources}

    @property
    def accumulation_scale(self):
        return self.config.float("simulation", "accumulation_scale", 1.0)

    def plan(self, *, power_mw, duration, selection, key, delay=0.0, blocked=(), dark_mode="full"):
        n_pulses = int(round(duration * self.accumulation_scale * self.repetition_rate))
        if n_pulses <= 0:
            raise ValueError(f"duration {duration!r} s covers no pulse")
        return RunPlan(
            mode_means=self.mode_means(power_mw, selection.sources),
            network=replace(self.network, delay=float(delay), blocked_signals=frozenset(blocked)),
            detector=self.detector,
            selection=selection,
            n_pulses=n_pulses,
            repetition_rate=self.repetition_rate,
            seed=self.seed,
            key=tuple(key),
            dark_mode=dark_mode,
            guard_ps=self.detector.dead_time_ps + self.coincidence.window_ps,
            block_selected=self.config.int("simulation", "block_selected_pulses"),
        )


def source_params(cfg):
    return SourceParams(
        pump_center_wavelength=cfg.float("source", "pump_center_wavelength_nm") * 1e-9,
        pump_duration_fwhm=cfg.float("source", "pump_duration_fwhm_ps") * 1e-12,
        crystal_length=cfg.float("source", "crystal_length_mm") * 1e-3,
        poling_period=cfg.float("source", "poling_period_um") * 1e-6,
        crystal_temperature=cfg.float("source", "crystal_temperature_c"),
        degenerate_wavelength=cfg.float("source", "degenerate_wavelength_nm") * 1e-9,
        tune_temperature=cfg.bool("source", "tune_temperature"),
    )


def detector_model(cfg):
    return DetectorModel(
        efficiency=cfg.floats("detector", "efficiency"),
        transmission=cfg.floats("detector", "transmission"),
        dark_count_rate=cfg.float("detector", "dark_count_rate_hz"),
        dead_time=cfg.float("detector", "dead_time_ns") * 1e-9,
        jitter=cfg.float("detector", "jitter_ps") * 1e-12,
        channels=ChannelMap(*(cfg.int("detector", f"channel_{r}") for r in ("idler1", "port_a", "port_b", "idler2"))),
    )
