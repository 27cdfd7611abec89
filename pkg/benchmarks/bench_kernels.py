"""Compiled kernels against the pure-Python fallback on synthetic tag streams.

    python benchmarks/bench_kernels.py [--tags N] [--repeat R]

The Python fallback is timed on a smaller slice because it is orders of
magnitude slower; rates are reported per tag so the two are comparable.
"""
import argparse
import time

import numpy as np

from heraldsim import _pykernels
from heraldsim.coincidence import DEFAULT_SETS

try:
    from heraldsim import _ckernels
except ImportError:
    _ckernels = None

MASKS = np.array([sum(1 << c for c in s) for s in DEFAULT_SETS], np.uint32)


def synthetic(n_tags, seed=0):
    """Pulsed 76 MHz streams, 40 % click probability per channel and pulse."""
    rng = np.random.default_rng(seed)
    n_pulses = int(n_tags / 1.6)
    pulses = np.sort(rng.choice(10 * n_pulses, n_pulses, replace=False)).astype(np.int64)
    out = []
    for _ in range(4):
        hit = rng.random(n_pulses) < 0.4
        out.append(np.sort(pulses[hit] * 13158 + rng.integers(0, 800, hit.sum())))
    return out


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench(impl, streams, repeat):
    ids = np.array([1, 2, 3, 4], np.uint8)
    n = sum(s.size for s in streams)
    t_merge = best_of(lambda: impl.merge_streams(streams, ids), repeat)
    times, chans = impl.merge_streams(streams, ids)
    t_count = best_of(lambda: impl.count_coincidences(times, chans, MASKS, 1000), repeat)
    t_dead = best_of(lambda: impl.dead_time_mask(streams[0], 30_000), repeat)
    return {"merge": n / t_merge, "count": n / t_count, "dead_time": streams[0].size / t_dead}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tags", type=int, default=4_000_000)
    ap.add_argument("--python-tags", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = {}
    if _ckernels is not None:
        big = synthetic(args.tags)
        rows["compiled"] = bench(_ckernels, big, args.repeat)
    small = synthetic(args.python_tags, seed=1)
    rows["python"] = bench(_pykernels, small, 1)
    if _ckernels is not None:
        ids = np.array([1, 2, 3, 4], np.uint8)
        tc, cc = _ckernels.merge_streams(small, ids)
        tp, cp = _pykernels.merge_streams(small, ids)
        same = (np.array_equal(tc, tp) and np.array_equal(cc, cp) and np.array_equal(
            _ckernels.count_coincidences(tc, cc, MASKS, 1000), _pykernels.count_coincidences(tp, cp, MASKS, 1000)))
        print(f"compiled and python results identical on {sum(s.size for s in small)} tags: {same}")

    print(f"{'kernel':<10}" + "".join(f"{name:>16}" for name in rows) + ("     speed-up" if len(rows) == 2 else ""))
    for kernel in ("merge", "count", "dead_time"):
        line = f"{kernel:<10}" + "".join(f"{rows[name][kernel] / 1e6:>11.2f} Mt/s" for name in rows)
        if len(rows) == 2:
            line += f"{rows['compiled'][kernel] / rows['python'][kernel]:>12.0f}x"
        print(line)


if __name__ == "__main__":
    main()
