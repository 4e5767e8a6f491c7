# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop: batched lattice convolution by direct summation.

Inputs are row-major (mode, time) arrays together with per-mode linear
offsets into the flattened full product grid; the offsets are chosen so that
the output slot of a pairing is simply the sum of the two input offsets.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def convolve_batch(
    const double complex[:, ::1] u,
    const double complex[:, ::1] v,
    const long long[::1] lin_u,
    const long long[::1] lin_v,
    double complex[:, ::1] out,
):
    """Accumulate out[lin_u[i] + lin_v[j], t] += u[i, t] * v[j, t]."""
    cdef Py_ssize_t bu = u.shape[0]
    cdef Py_ssize_t bv = v.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t i, j, t
    cdef long long o
    cdef double complex ui
    if n == 1:
        for i in range(bu):
            ui = u[i, 0]
            for j in range(bv):
                out[lin_u[i] + lin_v[j], 0] += ui * v[j, 0]
    else:
        for i in range(bu):
            for j in range(bv):
                o = lin_u[i] + lin_v[j]
                for t in range(n):
                    out[o, t] += u[i, t] * v[j, t]
