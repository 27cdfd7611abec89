"""One-time calibration of the per-channel path transmissions.

Detector efficiencies are fixed device values; the transmissions absorb the
unknown coupling and heralding losses.  Three measured numbers fix them:

* idler-1 singles (pumping source 1 only) -> idler-1 path,
* herald coincidences CC12 + CC13 (source 1 only) -> the two splitter ports,
  taken to share one transmission,
* 4-fold background (one signal blocked at a time) -> idler-2 path.

The solution is frozen into ``data/default.ini``; the test suite re-derives it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from scipy.optimize import brentq

from . import rates


@dataclass(frozen=True)
class Calibration:
    transmission: tuple
    idler_singles_cps: float
    herald_coincidences_cps: float
    background_counts: float


def _live(p, k):
    return 1.0 / (1.0 + k * p)


def predicted_rates(setup, transmission, power_mw):
    """(idler-1 singles cps, CC12 + CC13 cps, 4-fold background per second)."""
    det = replace(setup.detector, transmission=tuple(transmission))
    eta = tuple(det.probability(c) for c in (det.channels.idler1, det.channels.port_a,
                                            det.channels.port_b, det.channels.idler2))
    rep = setup.repetition_rate
    k = max(int(-(-det.dead_time * rep // 1)) - 1, 0)
    means = setup.mode_means(power_mw)
    pmf1, pmf2 = rates.pair_pmf(means[1]), rates.pair_pmf(means[2])
    r = setup.network.reflectivity
    p_h = rates.herald_probability(pmf1, eta[0])
    singles = rates.dead_time_rate(p_h, rep, det.dead_time) + det.dark_count_rate
    p_ha, p_hb, _ = rates.herald_signal_probabilities(pmf1, eta[0], eta[1], eta[2], r)
    n = len(pmf1)
    mean_pairs = float(sum(i * pmf1[i] for i in range(n)))
    p_a = (1 - r) * eta[1] * mean_pairs
    p_b = r * eta[2] * mean_pairs
    coinc = rep * _live(p_h, k) * (p_ha * _live(p_a, k) + p_hb * _live(p_b, k))
    bg = rep * (rates.four_fold_probability(pmf1, pmf2, eta, 0.0, r, blocked=(1,))
                + rates.four_fold_probability(pmf1, pmf2, eta, 0.0, r, blocked=(2,)))
    return singles, coinc, bg


def calibrate(setup):
    cfg = setup.config
    power = cfg.float("calibration", "power_mw")
    target_singles = cfg.float("calibration", "idler_singles_cps")
    target_coinc = cfg.float("calibration", "herald_coincidences_cps")
    target_bg = cfg.float("calibration", "background_counts") / cfg.float("calibration", "background_accumulation_s")
    eff = setup.detector.efficiency
    t = [1.0, 1.0, 1.0, 1.0]

    def solve(index_set, target, which):
        def f(x):
            for i in index_set:
                t[i] = x
            return predicted_rates(setup, t, power)[which] - target
        hi = min(1.0 / eff[i] for i in index_set)
        x = brentq(f, 1e-6, hi, xtol=1e-12)
        for i in index_set:
            t[i] = x

    solve((0,), target_singles, 0)
    solve((1, 2), target_coinc, 1)
    solve((3,), target_bg, 2)
    s, c, b = predicted_rates(setup, t, power)
    return Calibration(tuple(t), s, c, b * cfg.float("calibration", "background_accumulation_s"))
