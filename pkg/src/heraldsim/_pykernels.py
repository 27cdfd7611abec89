"""Reference implementations of the inner loops.

These define the semantics; the compiled module must reproduce them exactly.
"""
from __future__ import annotations

import numpy as np


def dead_time_mask(times, dead):
    """Non-paralyzable dead time: keep a tag only if it is at least ``dead``
    after the previously *kept* tag."""
    times = np.asarray(times, dtype=np.int64)
    keep = np.zeros(times.size, dtype=bool)
    if times.size == 0:
        return keep
    # fast path: nothing within a dead time of its predecessor
    if times.size == 1 or np.min(np.diff(times)) >= dead:
        keep[:] = True
        return keep
    last = None
    for i, t in enumerate(times.tolist()):
        if last is None or t - last >= dead:
            keep[i] = True
            last = t
    return keep


def merge_streams(times_list, channel_ids):
    """Merge per-channel sorted streams into one stream ordered by (time, channel)."""
    channel_ids = np.asarray(channel_ids, dtype=np.uint8)
    if len(times_list) == 0:
        return np.empty(0, np.int64), np.empty(0, np.uint8)
    t = np.concatenate([np.asarray(a, dtype=np.int64) for a in times_list])
    c = np.concatenate([np.full(len(a), ch, dtype=np.uint8) for a, ch in zip(times_list, channel_ids)])
    order = np.lexsort((c, t))
    return t[order], c[order]


def count_coincidences(times, channels, masks, window):
    """Greedy earliest-available coincidence counting for several channel sets.

    Tags are visited in (time, channel) order.  For each set, a tag not yet
    consumed by that set anchors a search over the following tags within
    ``window``; the earliest unconsumed tag of every other channel in the set is
    taken.  A complete match is counted and all its tags are consumed for that
    set only.  An incomplete search consumes nothing.
    """
    times = np.asarray(times, dtype=np.int64).tolist()
    channels = np.asarray(channels, dtype=np.uint8).tolist()
    masks = [int(m) for m in masks]
    n = len(times)
    counts = [0] * len(masks)
    used = [0] * n
    for i in range(n):
        ti = times[i]
        bit_i = 1 << channels[i]
        for s, mask in enumerate(masks):
            sbit = 1 << s
            if not mask & bit_i or used[i] & sbit:
                continue
            need = mask & ~bit_i
            found = 0
            picked = []
            j = i + 1
            while j < n and times[j] - ti <= window:
                bit_j = 1 << channels[j]
                if need & bit_j and not found & bit_j and not used[j] & sbit:
                    found |= bit_j
                    picked.append(j)
                    if found == need:
                        break
                j += 1
            if found == need:
                counts[s] += 1
                used[i] |= sbit
                for q in picked:
                    used[q] |= sbit
    return np.array(counts, dtype=np.int64)


def _pair_signals(modes1, modes2):
    """Cross-source signal pairing: equal Schmidt modes first, leftovers in mode order.

    Inputs are ascending mode lists; returns (i, j) index pairs.
    """
    partner1 = [-1] * len(modes1)
    partner2 = [-1] * len(modes2)
    a = b = 0
    while a < len(modes1) and b < len(modes2):
        if modes1[a] == modes2[b]:
            partner1[a], partner2[b] = b, a
            a += 1
            b += 1
        elif modes1[a] < modes2[b]:
            a += 1
        else:
            b += 1
    free1 = [i for i, p in enumerate(partner1) if p < 0]
    free2 = [j for j, p in enumerate(partner2) if p < 0]
    for i, j in zip(free1, free2):
        partner1[i] = j
    return [(i, partner1[i]) for i in range(len(modes1)) if partner1[i] >= 0]


def route_signals(pulse, source, mode, u, overlap, reflectivity):
    """Output port (0 = A, 1 = B) for every unblocked signal photon.

    Inputs must be sorted by (pulse, source, mode).  ``u[:, 0]`` drives the
    independent splitter choice, ``u[:, 1]`` the bunching decision of a matched
    pair and ``u[:, 2]`` the outcome of a bunched pair (read from the
    source-1 member): both at A, both at B, or one at each port.
    """
    pulse = np.asarray(pulse, dtype=np.int64)
    source = np.asarray(source, dtype=np.int8)
    mode = np.asarray(mode, dtype=np.int32)
    u = np.asarray(u, dtype=np.float64)
    t = 1.0 - reflectivity
    hit = u[:, 0] < t
    port = np.where(source == 1, np.where(hit, 0, 1), np.where(hit, 1, 0)).astype(np.int8)
    if pulse.size == 0:
        return port
    starts = np.flatnonzero(np.r_[True, pulse[1:] != pulse[:-1]])
    stops = np.r_[starts[1:], pulse.size]
    has1 = np.add.reduceat((source == 1).astype(np.int64), starts) > 0
    has2 = np.add.reduceat((source == 2).astype(np.int64), starts) > 0
    for g in np.flatnonzero(has1 & has2):
        lo, hi = int(starts[g]), int(stops[g])
        mid = lo + int(np.count_nonzero(source[lo:hi] == 1))
        pairs = _pair_signals(mode[lo:mid].tolist(), mode[mid:hi].tolist())
        for i, j in pairs:
            a, b = lo + i, mid + j
            if u[a, 1] < overlap:
                same = 2.0 * reflectivity * t
                if u[a, 2] < 2.0 * same:
                    p = 0 if u[a, 2] < same else 1
                    port[a] = p
                    port[b] = p
                else:
                    port[a], port[b] = 0, 1
    return port
