"""Cross-checks between the convolution backends (direct, FFT, fallback)."""

import numpy as np
import pytest

from qpkdv._kernels import _convolve_fft, backend, convolve_on_box, fallback
from qpkdv.lattice import FrequencyVector, TruncationBox

from conftest import SQRT2, brute_convolve


def _rand(box, seed, n=None):
    rng = np.random.default_rng(seed)
    shape = (len(box),) if n is None else (n, len(box))
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_backend_reports():
    assert backend() in ("compiled", "fallback")


def test_direct_vs_fft(box2_m4, monkeypatch):
    u = _rand(box2_m4, 0, 6)
    v = _rand(box2_m4, 1, 6)
    monkeypatch.setenv("QPKDV_CONV", "direct")
    wd, ld = convolve_on_box(u, v, box2_m4, with_leakage=True)
    monkeypatch.setenv("QPKDV_CONV", "fft")
    wf, lf = convolve_on_box(u, v, box2_m4, with_leakage=True)
    assert np.max(np.abs(wd - wf)) < 1e-12
    assert np.max(np.abs(ld - lf)) < 1e-12 * np.max(ld)


def test_fallback_vs_active(box2_m4):
    u = _rand(box2_m4, 2, 4)
    v = _rand(box2_m4, 3, 4)
    B = len(box2_m4)
    U = np.ascontiguousarray(u.T)
    V = np.ascontiguousarray(v.T)
    out = np.zeros((box2_m4.full_size, 4), dtype=np.complex128)
    lin = box2_m4._lin.astype(np.int64)
    fallback.convolve_batch(U, V, lin, lin, out)
    w_fb = out[box2_m4._full_to_box].T
    w = convolve_on_box(u, v, box2_m4)
    assert np.max(np.abs(w - w_fb)) < 1e-12


def test_single_vector_brute_force(box2_m4):
    u = _rand(box2_m4, 4)
    v = _rand(box2_m4, 5)
    w, leak = convolve_on_box(u, v, box2_m4, with_leakage=True)
    cu = {k: u[i] for i, k in enumerate(box2_m4.indices)}
    cv = {k: v[i] for i, k in enumerate(box2_m4.indices)}
    oracle = brute_convolve(cu, cv, box2_m4)
    for k, c in oracle.items():
        assert w[box2_m4.position(k)] == pytest.approx(c, rel=1e-10)
    # leakage oracle: full double loop including out-of-box targets
    acc = {}
    for ki, ci in cu.items():
        for kj, cj in cv.items():
            ks = tuple(a + b for a, b in zip(ki, kj))
            acc[ks] = acc.get(ks, 0j) + ci * cj
    leak_oracle = sum(
        abs(c) ** 2 for ks, c in acc.items() if any(ks) and ks not in box2_m4
    )
    assert leak == pytest.approx(leak_oracle, rel=1e-10)


def test_shapes_and_origin_drop(box2_m4):
    u = _rand(box2_m4, 6)
    w = convolve_on_box(u, u, box2_m4)
    assert w.shape == u.shape
    w2 = convolve_on_box(u[None, :], u[None, :], box2_m4)
    assert w2.shape == (1, len(box2_m4))
    assert np.max(np.abs(w2[0] - w)) < 1e-12


def test_n1_lattice():
    alpha = FrequencyVector(["1"])
    box = TruncationBox(alpha, 5)
    u = _rand(box, 7)
    w = convolve_on_box(u, u, box)
    cu = {k: u[i] for i, k in enumerate(box.indices)}
    oracle = brute_convolve(cu, cu, box)
    for k, c in oracle.items():
        assert w[box.position(k)] == pytest.approx(c, rel=1e-10)


def test_empty_input(box2_m4):
    z = np.zeros(len(box2_m4), dtype=complex)
    w, leak = convolve_on_box(z, z, box2_m4, with_leakage=True)
    assert not np.any(w) and leak == 0.0
