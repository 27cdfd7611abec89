"""Slow reference implementations used only by the tests."""
import bisect
import itertools

import numpy as np


def brute_force_counts(streams, sets, window):
    """Coincidence counts by explicit tuple enumeration.

    Every tuple with one tag per channel of a set, all within ``window`` after
    its earliest tag (ordered by time, then channel), is listed up front.  The
    tuples are then accepted greedily in order of (anchor, other members) when
    none of their tags has been taken by an earlier tuple of the same set.
    """
    tags = sorted((int(t), c) for c in streams for t in streams[c])
    order = {tag: i for i, tag in enumerate(tags)}
    per_channel = {c: sorted((int(t), c) for t in streams[c]) for c in streams}
    out = []
    for chans in sets:
        tuples = []
        for anchor in tags:
            if anchor[1] not in chans:
                continue
            t0 = anchor[0]
            options = []
            for c in chans:
                if c == anchor[1]:
                    continue
                lst = per_channel.get(c, [])
                lo = bisect.bisect_left(lst, (t0, -1))
                hi = bisect.bisect_right(lst, (t0 + window, 99))
                options.append([x for x in lst[lo:hi] if order[x] > order[anchor]])
            for combo in itertools.product(*options):
                tuples.append((order[anchor],) + tuple(sorted(order[x] for x in combo)))
        tuples.sort()
        taken, n = set(), 0
        for tup in tuples:
            if tup[0] in taken or taken.intersection(tup[1:]):
                continue
            taken.update(tup)
            n += 1
        out.append(n)
    return np.array(out)


def random_streams(rng, n_tags, span_ps, channels=(1, 2, 3, 4)):
    n = rng.multinomial(n_tags, np.ones(len(channels)) / len(channels))
    return {c: np.sort(rng.integers(0, span_ps, k)).astype(np.int64) for c, k in zip(channels, n)}


def correlated_streams(rng, n_events, period_ps, p_click, spread_ps):
    """Pulsed streams where channels click in the same pulse, giving real k-folds."""
    pulses = np.sort(rng.choice(10 * n_events, n_events, replace=False)).astype(np.int64)
    out = {}
    for c in (1, 2, 3, 4):
        hit = rng.random(pulses.size) < p_click
        t = pulses[hit] * period_ps + rng.integers(0, spread_ps + 1, hit.sum())
        out[c] = np.sort(t).astype(np.int64)
    return out


def fock_two_fold_coincidence(mean, reflectivity, indistinguishable, n_max=40):
    """Probability that both outputs of a lossless splitter hold photons when
    each input carries an independent single-mode thermal state.

    Computed in the photon-number basis: indistinguishable inputs through the
    splitter unitary, distinguishable ones photon by photon.
    """
    from math import comb, factorial, sqrt

    refl, trans = reflectivity, 1.0 - reflectivity
    thermal = [mean**n / (1 + mean) ** (n + 1) for n in range(n_max)]
    total = 0.0
    for n1 in range(n_max):
        for n2 in range(n_max):
            at_a = np.zeros(n1 + n2 + 1)
            if indistinguishable:
                amp = np.zeros(n1 + n2 + 1)
                # input 1 transmits into A, input 2 reflects into A
                for k1 in range(n1 + 1):
                    for k2 in range(n2 + 1):
                        amp[k1 + k2] += (comb(n1, k1) * sqrt(trans) ** k1 * sqrt(refl) ** (n1 - k1)
                                         * comb(n2, k2) * sqrt(refl) ** k2 * (-sqrt(trans)) ** (n2 - k2))
                for na in range(n1 + n2 + 1):
                    at_a[na] = amp[na] ** 2 * factorial(na) * factorial(n1 + n2 - na) / (factorial(n1) * factorial(n2))
            else:
                for k1 in range(n1 + 1):
                    for k2 in range(n2 + 1):
                        at_a[k1 + k2] += (comb(n1, k1) * trans**k1 * refl ** (n1 - k1)
                                          * comb(n2, k2) * refl**k2 * trans ** (n2 - k2))
            total += thermal[n1] * thermal[n2] * at_a[1:-1].sum() if n1 + n2 >= 2 else 0.0
    return total
