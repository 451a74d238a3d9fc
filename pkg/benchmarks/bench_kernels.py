"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Inputs match what the pipeline sees: one 640x480 RGB camera frame
(luma/rotate) and one 25 ms pitch window at 16 kHz (autocorrelation).
"""
import argparse
import timeit

import numpy as np

from sightline import _pykernels

try:
    from sightline import _ckernels
except ImportError:
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, (480, 640, 3), dtype=np.uint8)
    window = rng.standard_normal(400)
    return {
        "luma_rotate_cw (640x480)": lambda k: k.luma_rotate_cw(frame),
        "autocorrelation (400, lag 267)": lambda k: k.autocorrelation(window, 267),
    }


def best(fn, repeat):
    number = 1
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':32} " + " ".join(f"{name:>12}" for name, _ in impls) + f" {'speedup':>9}")
    for label, call in cases().items():
        times = [best(lambda k=k: call(k), args.repeat) for _, k in impls]
        speedup = f"{times[0] / times[-1]:8.1f}x" if len(times) > 1 else "       -"
        print(f"{label:32} " + " ".join(f"{t * 1e3:10.3f}ms" for t in times) + f" {speedup}")
    if _ckernels is None:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
