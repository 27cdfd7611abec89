"""Kernel dispatch: compiled extension when available, pure Python otherwise.

Set ``HERALDSIM_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HERALDSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels


def dead_time_mask(times, dead):
    return _impl.dead_time_mask(np.ascontiguousarray(times, dtype=np.int64), int(dead))


def merge_streams(times_list, channel_ids):
    times_list = [np.ascontiguousarray(a, dtype=np.int64) for a in times_list]
    return _impl.merge_streams(times_list, np.ascontiguousarray(channel_ids, dtype=np.uint8))


def count_coincidences(times, channels, masks, window):
    masks = np.ascontiguousarray(masks, dtype=np.uint32)
    if masks.size > 32:
        raise ValueError("at most 32 channel sets can be counted in one pass")
    return _impl.count_coincidences(
        np.ascontiguousarray(times, dtype=np.int64),
        np.ascontiguousarray(channels, dtype=np.uint8),
        masks,
        int(window),
    )


def route_signals(pulse, source, mode, u, overlap, reflectivity):
    return _impl.route_signals(
        np.ascontiguousarray(pulse, dtype=np.int64),
        np.ascontiguousarray(source, dtype=np.int8),
        np.ascontiguousarray(mode, dtype=np.int32),
        np.ascontiguousarray(u, dtype=np.float64).reshape(-1, 3),
        float(overlap),
        float(reflectivity),
    )
