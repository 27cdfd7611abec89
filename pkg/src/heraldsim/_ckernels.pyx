# cython: language_level=3
"""Compiled inner loops.  Semantics are defined by heraldsim._pykernels."""
import numpy as np

from libc.stdint cimport int8_t, int32_t, int64_t, uint8_t, uint32_t


def dead_time_mask(const int64_t[::1] times, int64_t dead):
    cdef Py_ssize_t n = times.shape[0], i
    keep_arr = np.zeros(n, dtype=np.bool_)
    cdef uint8_t[::1] keep = keep_arr.view(np.uint8)
    cdef int64_t last
    cdef bint have = False
    with nogil:
        for i in range(n):
            if not have or times[i] - last >= dead:
                keep[i] = 1
                last = times[i]
                have = True
    return keep_arr


def merge_streams(list times_list, const uint8_t[::1] channel_ids):
    cdef Py_ssize_t k = len(times_list), s, total = 0, out_i, best
    cdef int64_t best_t, t
    heads = np.zeros(k, dtype=np.int64)
    sizes = np.array([len(a) for a in times_list], dtype=np.int64)
    cdef int64_t[::1] head = heads
    cdef int64_t[::1] size = sizes
    cdef int64_t[:, ::1] data
    total = int(sizes.sum())
    width = int(sizes.max()) if k else 0
    packed = np.zeros((k, max(width, 1)), dtype=np.int64)
    for s in range(k):
        packed[s, : sizes[s]] = times_list[s]
    data = packed
    out_t_arr = np.empty(total, dtype=np.int64)
    out_c_arr = np.empty(total, dtype=np.uint8)
    cdef int64_t[::1] out_t = out_t_arr
    cdef uint8_t[::1] out_c = out_c_arr
    with nogil:
        for out_i in range(total):
            best = -1
            for s in range(k):
                if head[s] < size[s]:
                    t = data[s, head[s]]
                    if best < 0 or t < best_t or (t == best_t and channel_ids[s] < channel_ids[best]):
                        best = s
                        best_t = t
            out_t[out_i] = best_t
            out_c[out_i] = channel_ids[best]
            head[best] += 1
    return out_t_arr, out_c_arr


def count_coincidences(const int64_t[::1] times, const uint8_t[::1] channels,
                       const uint32_t[::1] masks, int64_t window):
    cdef Py_ssize_t n = times.shape[0], n_sets = masks.shape[0]
    cdef Py_ssize_t i, j, s, q, nf
    cdef uint32_t bit_i, bit_j, need, found, sbit
    cdef int64_t ti
    cdef Py_ssize_t picked[32]
    counts_arr = np.zeros(n_sets, dtype=np.int64)
    used_arr = np.zeros(n, dtype=np.uint32)
    cdef int64_t[::1] counts = counts_arr
    cdef uint32_t[::1] used = used_arr
    with nogil:
        for i in range(n):
            ti = times[i]
            bit_i = (<uint32_t>1) << channels[i]
            for s in range(n_sets):
                sbit = (<uint32_t>1) << s
                if (masks[s] & bit_i) == 0 or (used[i] & sbit) != 0:
                    continue
                need = masks[s] & ~bit_i
                found = 0
                nf = 0
                j = i + 1
                while j < n and times[j] - ti <= window:
                    bit_j = (<uint32_t>1) << channels[j]
                    if (need & bit_j) != 0 and (found & bit_j) == 0 and (used[j] & sbit) == 0:
                        found = found | bit_j
                        picked[nf] = j
                        nf = nf + 1
                        if found == need:
                            break
                    j = j + 1
                if found == need:
                    counts[s] += 1
                    used[i] |= sbit
                    for q in range(nf):
                        used[picked[q]] |= sbit
    return counts_arr


def route_signals(const int64_t[::1] pulse, const int8_t[::1] source,
                  const int32_t[::1] mode, const double[:, ::1] u,
                  double overlap, double reflectivity):
    cdef Py_ssize_t n = pulse.shape[0]
    ports_arr = np.empty(n, dtype=np.int8)
    cdef int8_t[::1] port = ports_arr
    partner_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] partner = partner_arr
    cdef Py_ssize_t start = 0, stop, mid, a, b, i
    cdef double t = 1.0 - reflectivity
    cdef double same = 2.0 * reflectivity * t
    cdef int8_t p
    with nogil:
        # independent routing: source 1 enters input 1 (transmitted -> A), source 2 input 2
        for i in range(n):
            if source[i] == 1:
                port[i] = 0 if u[i, 0] < t else 1
            else:
                port[i] = 1 if u[i, 0] < t else 0
        while start < n:
            stop = start
            while stop < n and pulse[stop] == pulse[start]:
                stop += 1
            mid = start
            while mid < stop and source[mid] == 1:
                mid += 1
            if mid > start and mid < stop:
                # equal Schmidt modes first (both halves sorted by mode)
                a = start
                b = mid
                while a < mid and b < stop:
                    if mode[a] == mode[b]:
                        partner[a] = b
                        partner[b] = a
                        a += 1
                        b += 1
                    elif mode[a] < mode[b]:
                        a += 1
                    else:
                        b += 1
                # leftovers paired in mode order
                a = start
                b = mid
                while True:
                    while a < mid and partner[a] >= 0:
                        a += 1
                    while b < stop and partner[b] >= 0:
                        b += 1
                    if a >= mid or b >= stop:
                        break
                    partner[a] = b
                    partner[b] = a
                for a in range(start, mid):
                    b = partner[a]
                    if b >= 0 and u[a, 1] < overlap:
                        # both to A, both to B (2RT each), else one per port
                        if u[a, 2] < 2.0 * same:
                            p = 0 if u[a, 2] < same else 1
                            port[a] = p
                            port[b] = p
                        else:
                            port[a] = 0
                            port[b] = 1
            start = stop
    return ports_arr
