import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heraldsim import _pykernels, kernels

ck = pytest.importorskip("heraldsim._ckernels")


def test_compiled_backend_selected():
    assert kernels.BACKEND == "compiled"


def _streams(seed, n, span):
    rng = np.random.default_rng(seed)
    return [np.sort(rng.integers(0, span, rng.integers(0, n + 1))).astype(np.int64) for _ in range(4)]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 400), span=st.integers(1, 20000),
       window=st.integers(1, 3000))
def test_merge_and_count_identical(seed, n, span, window):
    streams = _streams(seed, n, span)
    ids = np.array([1, 2, 3, 4], np.uint8)
    t_c, c_c = ck.merge_streams(streams, ids)
    t_p, c_p = _pykernels.merge_streams(streams, ids)
    np.testing.assert_array_equal(t_c, t_p)
    np.testing.assert_array_equal(c_c, c_p)
    masks = np.array([0b110, 0b1010, 0b1100, 0b1110, 0b11110], np.uint32)
    np.testing.assert_array_equal(ck.count_coincidences(t_c, c_c, masks, window),
                                  _pykernels.count_coincidences(t_p, c_p, masks, window))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 2000), dead=st.integers(0, 500))
def test_dead_time_identical(seed, n, dead):
    t = np.sort(np.random.default_rng(seed).integers(0, 20000, n)).astype(np.int64)
    np.testing.assert_array_equal(ck.dead_time_mask(t, dead), _pykernels.dead_time_mask(t, dead))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 300), o=st.floats(0, 1), r=st.floats(0, 1))
def test_route_signals_identical(seed, n, o, r):
    rng = np.random.default_rng(seed)
    pulse = np.sort(rng.integers(0, max(n // 3, 1), n)).astype(np.int64)
    source = rng.integers(1, 3, n).astype(np.int8)
    mode = rng.integers(0, 3, n).astype(np.int32)
    order = np.lexsort((mode, source, pulse))
    pulse, source, mode = pulse[order], source[order], mode[order]
    u = rng.random((n, 3))
    np.testing.assert_array_equal(ck.route_signals(pulse, source, mode, u, o, r),
                                  _pykernels.route_signals(pulse, source, mode, u, o, r))


def test_too_many_sets_rejected():
    with pytest.raises(ValueError):
        kernels.count_coincidences(np.zeros(1, np.int64), np.ones(1, np.uint8), np.ones(33, np.uint32), 10)


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, HERALDSIM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import heraldsim; print(heraldsim.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
