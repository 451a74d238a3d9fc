# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
from libc.stdint cimport uint32_t, uint8_t

def autocorrelation(x, Py_ssize_t max_lag):
    cdef double[::1] v = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.zeros(max_lag + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, i, top = min(max_lag, n - 1)
    cdef double acc
    with nogil:
        for k in range(top + 1):
            acc = 0.0
            for i in range(n - k):
                acc = acc + v[i] * v[i + k]
            out[k] = acc
    return out_arr


def luma_rotate_cw(pixels):
    a = np.ascontiguousarray(pixels, dtype=np.uint8)
    if a.ndim not in (2, 3):
        raise ValueError(f"expected HxW or HxWx3 pixels, got shape {a.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
    cdef const uint8_t[:, :, ::1] src = a
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], ch = src.shape[2]
    if ch != 1 and ch != 3:
        raise ValueError(f"expected HxW or HxWx3 pixels, got shape {pixels.shape}")
    out_arr = np.empty((w, h), dtype=np.uint8)
    cdef uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    cdef uint32_t y
    with nogil:
        for r in range(h):
            for c in range(w):
                if ch == 3:
                    y = (299 * <uint32_t>src[r, c, 0] + 587 * <uint32_t>src[r, c, 1]
                         + 114 * <uint32_t>src[r, c, 2] + 500) // 1000
                else:
                    y = src[r, c, 0]
                # clockwise: (r, c) -> (c, h-1-r)
                out[c, h - 1 - r] = <uint8_t>y
    return out_arr
