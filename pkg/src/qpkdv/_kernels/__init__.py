"""Kernel backend selection and the box-level convolution entry point.

Two algorithms sit behind one entry point: a direct pairwise accumulation
(compiled Cython kernel when available, numpy fallback otherwise) that wins
for sparse inputs, and an exact zero-padded FFT convolution on the full
product cube that wins for dense batches.  The choice is by operation-count
estimate; QPKDV_FORCE_FALLBACK=1 disables the compiled extension and
QPKDV_CONV=direct|fft pins the algorithm (both set before import/use).
All paths agree up to floating-point rounding.
"""

from __future__ import annotations

import os

import numpy as np

from . import fallback

_BACKEND = "fallback"
_batch = fallback.convolve_batch
if not os.environ.get("QPKDV_FORCE_FALLBACK"):
    try:
        from . import _convolve  # compiled extension

        _batch = _convolve.convolve_batch
        _BACKEND = "compiled"
    except ImportError:
        pass

# the FFT path costs about this many flops per padded-grid point per slice
# (calibrated against the compiled direct kernel on dense M=16 batches)
_FFT_COST_FACTOR = 4.0


def backend() -> str:
    """Name of the active convolution backend: 'compiled' or 'fallback'."""
    return _BACKEND


def _convolve_fft(u, v, box):
    """Exact linear convolution via zero-padded FFT on the product cube.

    u, v: (n, B) over the box enumeration.  Returns the flat (n, full_size)
    product-cube array, C-ordered to match box._full_to_box.
    """
    n = u.shape[0]
    M, N = box.M, box.N
    small = (2 * M + 1,) * N
    pad = (4 * M + 1,) * N
    small_size = (2 * M + 1) ** N
    strides = np.array([(2 * M + 1) ** (N - 1 - d) for d in range(N)], dtype=np.int64)
    slots = ((box.kvecs + M) * strides).sum(axis=1)
    axes = tuple(range(1, N + 1))
    cu = np.zeros((n, small_size), dtype=np.complex128)
    cv = np.zeros((n, small_size), dtype=np.complex128)
    cu[:, slots] = u
    cv[:, slots] = v
    fu = np.fft.fftn(cu.reshape((n,) + small), s=pad, axes=axes)
    fv = np.fft.fftn(cv.reshape((n,) + small), s=pad, axes=axes)
    w = np.fft.ifftn(fu * fv, axes=axes)
    return w.reshape(n, box.full_size)


def convolve_on_box(u, v, box, with_leakage: bool = False):
    """Lattice convolution of dense box vectors, truncated to the box.

    u, v: complex arrays of shape (B,) or (n, B) over the box enumeration.
    Returns w of the same shape with w(k) = sum_{ki+kj=k} u(ki) v(kj) for k in
    the box (the k=0 slot is structurally dropped: mean-zero reduction).
    With with_leakage=True also returns the l2 mass of product modes falling
    outside the box (scalar, or (n,) per time sample).
    """
    B = len(box)
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    single = u.ndim == 1
    u2 = u.reshape(-1, B)
    v2 = v.reshape(-1, B)
    n = u2.shape[0]
    nzu = np.flatnonzero(np.any(u2 != 0, axis=0))
    nzv = np.flatnonzero(np.any(v2 != 0, axis=0))
    mode = os.environ.get("QPKDV_CONV", "auto")
    direct_cost = float(len(nzu)) * len(nzv) * n
    fft_cost = _FFT_COST_FACTOR * n * box.full_size * max(np.log2(box.full_size), 1.0)
    use_fft = mode == "fft" or (mode != "direct" and direct_cost > fft_cost)
    if use_fft:
        out_t = _convolve_fft(u2, v2, box)
        out = out_t.T
    else:
        U = np.ascontiguousarray(u2.T)
        V = np.ascontiguousarray(v2.T)
        out = np.zeros((box.full_size, n), dtype=np.complex128)
        if len(nzu) and len(nzv):
            lin = box._lin.astype(np.int64)
            _batch(
                np.ascontiguousarray(U[nzu]),
                np.ascontiguousarray(V[nzv]),
                lin[nzu],
                lin[nzv],
                out,
            )
    inbox = out[box._full_to_box]  # (B, n)
    w = inbox[:, 0] if single else inbox.T.reshape(u.shape)
    if not with_leakage:
        return w
    total = np.sum(np.abs(out) ** 2, axis=0)  # (n,)
    kept = np.sum(np.abs(inbox) ** 2, axis=0) + np.abs(out[box._origin_full]) ** 2
    leak = np.maximum(total - kept, 0.0)
    return w, (float(leak[0]) if single else leak.reshape(u.shape[:-1]))
