import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sightline import _pykernels, kernels

try:
    from sightline import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

IMPLS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if os.environ.get("SIGHTLINE_PURE_PYTHON") == "1":
        assert kernels.BACKEND == "python"
    elif _ckernels is not None:
        assert kernels.BACKEND == "cython"


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=300), st.integers(0, 40))
@settings(max_examples=50)
def test_autocorrelation_agrees(values, max_lag):
    x = np.array(values)
    ref = np.array([sum(x[i] * x[i + k] for i in range(len(x) - k)) if k < len(x) else 0.0
                    for k in range(max_lag + 1)])
    for impl in IMPLS:
        np.testing.assert_allclose(impl.autocorrelation(x, max_lag), ref, rtol=1e-9, atol=1e-12)


@given(st.integers(1, 12), st.integers(1, 12), st.booleans(), st.integers(0, 2 ** 31))
@settings(max_examples=50)
def test_luma_rotate_agrees(h, w, rgb, seed):
    rng = np.random.default_rng(seed)
    shape = (h, w, 3) if rgb else (h, w)
    img = rng.integers(0, 256, size=shape, dtype=np.uint8)
    outs = [impl.luma_rotate_cw(img) for impl in IMPLS]
    assert outs[0].shape == (w, h)
    for o in outs[1:]:
        np.testing.assert_array_equal(o, outs[0])


def test_luma_weights_and_rotation_direction():
    img = np.array([[[255, 0, 0], [100, 100, 100]],
                    [[0, 0, 0], [0, 255, 0]]], dtype=np.uint8)
    for impl in IMPLS:
        out = impl.luma_rotate_cw(img)
        # clockwise: the bottom-left pixel ends up top-left
        assert out.tolist() == [[0, 76], [150, 100]]


@needs_ext
def test_compiled_matches_python_on_large_input():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(4000)
    np.testing.assert_allclose(_ckernels.autocorrelation(x, 300), _pykernels.autocorrelation(x, 300),
                               rtol=1e-10, atol=1e-9)
