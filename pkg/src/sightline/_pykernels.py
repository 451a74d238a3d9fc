"""Pure-Python/numpy versions of the hot kernels.

These are the reference behaviour; ``_ckernels.pyx`` must agree with them
bit for bit.
"""
import numpy as np


def autocorrelation(x, max_lag):
    """Biased autocorrelation r[k] = sum_n x[n] x[n+k] for k in 0..max_lag."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.zeros(max_lag + 1, dtype=np.float64)
    for k in range(min(max_lag, n - 1) + 1):
        out[k] = float(np.dot(x[: n - k], x[k:]))
    return out


def luma_rotate_cw(pixels):
    """Integer luma (round-half-up of 0.299R+0.587G+0.114B), rotated 90 degrees clockwise."""
    a = np.asarray(pixels, dtype=np.uint8)
    if a.ndim == 3:
        w = a.astype(np.uint32)
        gray = ((299 * w[..., 0] + 587 * w[..., 1] + 114 * w[..., 2] + 500) // 1000).astype(np.uint8)
    elif a.ndim == 2:
        gray = a
    else:
        raise ValueError(f"expected HxW or HxWx3 pixels, got shape {a.shape}")
    return np.ascontiguousarray(np.rot90(gray, k=-1))
