"""Benchmark the lattice-convolution kernels: compiled vs fallback vs FFT.

Run:  python3 bench/benchmark_convolution.py [--sizes 4,8,12,16] [--batch 16]

The compiled path and the numpy fallback implement the same direct pairwise
accumulation; the FFT path computes the identical linear convolution on the
zero-padded product cube.  All three agree to rounding; this script reports
wall times and the max cross-path deviation.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qpkdv._kernels import _convolve_fft, backend, fallback
from qpkdv.lattice import FrequencyVector, TruncationBox

try:
    from qpkdv._kernels import _convolve

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

SQRT2 = "1.41421356237309504880168872420969807856967187537694807317667"


def run_direct(batch_fn, u, v, box):
    n = u.shape[0]
    U = np.ascontiguousarray(u.T)
    V = np.ascontiguousarray(v.T)
    out = np.zeros((box.full_size, n), dtype=np.complex128)
    lin = box._lin.astype(np.int64)
    batch_fn(U, V, lin, lin, out)
    return out[box._full_to_box].T


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,8,12,16")
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    alpha = FrequencyVector(["1", SQRT2])
    print(f"active backend: {backend()}   batch: {args.batch} time samples")
    print(f"{'M':>4} {'modes':>6} {'compiled':>10} {'fallback':>10} {'fft':>10} {'max dev':>9}")
    for M in [int(s) for s in args.sizes.split(",")]:
        box = TruncationBox(alpha, M)
        rng = np.random.default_rng(M)
        B = len(box)
        u = rng.normal(size=(args.batch, B)) + 1j * rng.normal(size=(args.batch, B))
        v = rng.normal(size=(args.batch, B)) + 1j * rng.normal(size=(args.batch, B))

        results, times = {}, {}
        paths = [("fallback", lambda: run_direct(fallback.convolve_batch, u, v, box))]
        if HAVE_COMPILED:
            paths.append(
                ("compiled", lambda: run_direct(_convolve.convolve_batch, u, v, box))
            )
        paths.append(("fft", lambda: _convolve_fft(u, v, box)[:, box._full_to_box]))
        for name, fn in paths:
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                results[name] = fn()
                best = min(best, time.perf_counter() - t0)
            times[name] = best

        ref = results["fallback"]
        dev = max(
            float(np.max(np.abs(results[name] - ref)))
            for name in results
            if name != "fallback"
        )
        print(
            f"{M:>4} {B:>6} "
            f"{times.get('compiled', float('nan')):>9.4f}s "
            f"{times['fallback']:>9.4f}s "
            f"{times['fft']:>9.4f}s "
            f"{dev:>9.2e}"
        )


if __name__ == "__main__":
    main()
