"""Pure numpy fallback for the lattice-convolution hot loop.

Same contract as the compiled kernel: vectorized shift-and-add over the rows
of the first factor.  Exact (no FFT), just slower than the extension.
"""

import numpy as np


def convolve_batch(u, v, lin_u, lin_v, out):
    """Accumulate out[lin_u[i] + lin_v[j], t] += u[i, t] * v[j, t].

    For a fixed row i the output slots lin_u[i] + lin_v are pairwise distinct,
    so a fancy-indexed in-place add is safe.
    """
    for i in range(u.shape[0]):
        out[lin_u[i] + lin_v] += u[i] * v
