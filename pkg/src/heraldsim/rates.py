"""Closed-form per-pulse click probabilities of the simulated setup.

Under the pairwise-bunching model a matched pair bunches with the same
probability whatever its Schmidt mode, so every count rate depends only on the
total pair numbers of the two sources.  Summing over those numbers gives exact
rates (up to the pmf truncation) without sampling.  Dark counts are ignored;
dead time enters only through :func:`dead_time_rate`.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from .source import PairNumberModel


def pair_pmf(mode_means):
    return PairNumberModel(mode_means).pmf


def herald_probability(pmf, efficiency):
    n = np.arange(len(pmf))
    return float(np.sum(pmf * (1.0 - (1.0 - efficiency) ** n)))


def dead_time_rate(p_click, repetition_rate, dead_time):
    """Mean click rate of a channel clicking independently with ``p_click`` per
    pulse behind a non-paralyzable dead time spanning ``k`` further pulses."""
    period = 1.0 / repetition_rate
    k = max(int(np.ceil(dead_time / period - 1e-12)) - 1, 0)
    return repetition_rate * p_click / (1.0 + k * p_click)


@lru_cache(maxsize=4096)
def port_distribution(n1, n2, overlap, reflectivity=0.5):
    """Distribution of the number of signals leaving port A, given ``n1``
    unblocked signals from source 1 and ``n2`` from source 2.

    Returns an array indexed by the count at port A.
    """
    t = 1.0 - reflectivity
    k = min(n1, n2)
    same = 2.0 * reflectivity * t
    # photons at A from one interfering pair: 0, 1 or 2
    pair_at_a = np.array([same, 1.0 - 2.0 * same, same])
    out = np.zeros(n1 + n2 + 1)
    for b in range(k + 1):  # bunched pairs
        pb = comb(k, b) * overlap**b * (1 - overlap) ** (k - b)
        if pb == 0:
            continue
        # independent photons: free source-1 photons reach A with t, source-2 with r
        m1, m2 = n1 - b, n2 - b
        a1 = np.array([comb(m1, j) * t**j * (1 - t) ** (m1 - j) for j in range(m1 + 1)])
        a2 = np.array([comb(m2, j) * reflectivity**j * (1 - reflectivity) ** (m2 - j) for j in range(m2 + 1)])
        indep = np.convolve(a1, a2)
        bunched = np.ones(1)
        for _ in range(b):
            bunched = np.convolve(bunched, pair_at_a)
        out += pb * np.convolve(bunched, indep)
    return out


def _both_ports_click(n_a, n_b, eta_a, eta_b):
    return (1.0 - (1.0 - eta_a) ** n_a) * (1.0 - (1.0 - eta_b) ** n_b)


def signal_pair_probability(pmf1, pmf2, eta, overlap, reflectivity=0.5, blocked=(), herald=(),
                            n_max=10):
    """P(channel 2 and channel 3 click, plus the idler channels in ``herald``).

    ``eta`` is the tuple of four channel click probabilities (idler1, port A,
    port B, idler2); ``herald`` lists sources whose idler must also click.
    """
    e1, ea, eb, e4 = eta
    p1 = np.asarray(pmf1)[: n_max + 1]
    p2 = np.asarray(pmf2)[: n_max + 1]
    total = 0.0
    for n1 in range(p1.size):
        for n2 in range(p2.size):
            w = p1[n1] * p2[n2]
            if w == 0:
                continue
            if 1 in herald:
                w *= 1.0 - (1.0 - e1) ** n1
            if 2 in herald:
                w *= 1.0 - (1.0 - e4) ** n2
            s1 = 0 if 1 in blocked else n1
            s2 = 0 if 2 in blocked else n2
            dist = port_distribution(s1, s2, float(overlap), float(reflectivity))
            n_a = np.arange(dist.size)
            total += w * float(np.sum(dist * _both_ports_click(n_a, s1 + s2 - n_a, ea, eb)))
    return total


def herald_signal_probabilities(pmf, eta_h, eta_a, eta_b, reflectivity=0.5):
    """Single-source (other source off) probabilities of herald&A, herald&B and
    herald&A&B clicks, with the source's signals on input 1."""
    t = 1.0 - reflectivity
    n = np.arange(len(pmf))
    h = 1.0 - (1.0 - eta_h) ** n
    qa, qb = t * eta_a, reflectivity * eta_b
    no_a = (1.0 - qa) ** n
    no_b = (1.0 - qb) ** n
    neither = (1.0 - qa - qb) ** n
    p_ha = float(np.sum(pmf * h * (1.0 - no_a)))
    p_hb = float(np.sum(pmf * h * (1.0 - no_b)))
    p_hab = float(np.sum(pmf * h * (1.0 - no_a - no_b + neither)))
    return p_ha, p_hb, p_hab


def four_fold_probability(pmf1, pmf2, eta, overlap, reflectivity=0.5, blocked=()):
    return signal_pair_probability(pmf1, pmf2, eta, overlap, reflectivity, blocked, herald=(1, 2))


def two_fold_probability(pmf1, pmf2, eta, overlap, reflectivity=0.5):
    return signal_pair_probability(pmf1, pmf2, eta, overlap, reflectivity)


def dip_prediction(pmf1, pmf2, eta, overlap0, reflectivity=0.5, fold=4):
    """Raw and background-corrected visibility predicted at zero delay."""
    if fold == 4:
        base = four_fold_probability(pmf1, pmf2, eta, 0.0, reflectivity)
        dip = four_fold_probability(pmf1, pmf2, eta, overlap0, reflectivity)
        bg = (four_fold_probability(pmf1, pmf2, eta, 0.0, reflectivity, blocked=(1,))
              + four_fold_probability(pmf1, pmf2, eta, 0.0, reflectivity, blocked=(2,)))
    else:
        base = two_fold_probability(pmf1, pmf2, eta, 0.0, reflectivity)
        dip = two_fold_probability(pmf1, pmf2, eta, overlap0, reflectivity)
        bg = 0.0
    return {
        "baseline": base,
        "minimum": dip,
        "background": bg,
        "raw": (base - dip) / base,
        "corrected": (base - dip) / (base - bg) if base > bg else float("nan"),
    }
