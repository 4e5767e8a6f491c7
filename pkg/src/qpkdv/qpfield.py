"""Quasi-periodic functions as sparse spectral fields.

A field is a finite map from nonzero multi-indices k to complex amplitudes,
representing f(x) = sum_k fhat(k) exp(i alpha.k x).  There is never an entry
at k = 0 (mean-zero reduction) and stored amplitudes below the canonical
pruning threshold are dropped, so equal fields compare equal.

Products are lattice convolutions truncated to a caller-supplied box; the l2
mass of product modes outside the box is available as a leakage diagnostic.
There is no position-space grid and no FFT here: the frequencies alpha.k are
incommensurate, the convolution is lattice-native.
"""

from __future__ import annotations

import io

import numpy as np

from ._kernels import convolve_on_box
from .lattice import (
    FrequencyVector,
    LatticeError,
    TruncationBox,
    WeightProfile,
    box_weights,
    weight,
)

PRUNE_THRESHOLD = 1e-30

SNAPSHOT_VERSION = 1


class CoefficientField:
    """Immutable sparse map multi-index -> complex amplitude.

    real_symmetric means coeff(-k) = conj(coeff(k)) with a support closed
    under negation; it is verified at construction.
    """

    __slots__ = ("alpha", "coeff", "real_symmetric")

    def __init__(self, alpha: FrequencyVector, coeff: dict, real_symmetric: bool = False):
        clean = {}
        for k, c in coeff.items():
            k = tuple(int(kj) for kj in k)
            if len(k) != alpha.N:
                raise LatticeError(f"index {k} does not match alpha dimension {alpha.N}")
            c = complex(c)
            if all(kj == 0 for kj in k):
                raise LatticeError("fields are mean-zero: no entry at k = 0")
            if abs(c) > PRUNE_THRESHOLD:
                clean[k] = c
        if real_symmetric:
            for k, c in clean.items():
                neg = tuple(-kj for kj in k)
                if neg not in clean:
                    raise LatticeError(f"real_symmetric: support misses -k for k={k}")
                if abs(clean[neg] - np.conj(c)) > 1e-12 * max(1.0, abs(c)):
                    raise LatticeError(f"real_symmetric: coeff(-k) != conj(coeff(k)) at k={k}")
        self.alpha = alpha
        self.coeff = dict(sorted(clean.items()))
        self.real_symmetric = bool(real_symmetric)

    # -- basic protocol ----------------------------------------------------

    @property
    def support(self):
        return tuple(self.coeff.keys())

    def __len__(self):
        return len(self.coeff)

    def __getitem__(self, k):
        return self.coeff.get(tuple(k), 0j)

    def __eq__(self, other):
        return (
            isinstance(other, CoefficientField)
            and self.alpha == other.alpha
            and self.coeff == other.coeff
        )

    def __add__(self, other):
        if self.alpha != other.alpha:
            raise LatticeError("fields have different alpha")
        out = dict(self.coeff)
        for k, c in other.coeff.items():
            out[k] = out.get(k, 0j) + c
        return CoefficientField(
            self.alpha, out, self.real_symmetric and other.real_symmetric
        )

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c) -> "CoefficientField":
        sym = self.real_symmetric and float(np.imag(c)) == 0.0
        return CoefficientField(
            self.alpha, {k: c * v for k, v in self.coeff.items()}, sym
        )

    def __repr__(self):
        return f"CoefficientField({len(self)} modes, N={self.alpha.N})"


def zero_field(alpha: FrequencyVector, real_symmetric: bool = False) -> CoefficientField:
    return CoefficientField(alpha, {}, real_symmetric)


def single_mode(alpha: FrequencyVector, k, amplitude) -> CoefficientField:
    return CoefficientField(alpha, {tuple(k): amplitude})


# -- dense bridge ----------------------------------------------------------


def field_to_dense(f: CoefficientField, box: TruncationBox) -> np.ndarray:
    """Dense complex vector over the box enumeration (indices outside raise)."""
    u = np.zeros(len(box), dtype=np.complex128)
    for k, c in f.coeff.items():
        u[box.position(k)] = c
    return u


def dense_to_field(
    u: np.ndarray, box: TruncationBox, real_symmetric: bool = False
) -> CoefficientField:
    nz = np.flatnonzero(np.abs(u) > PRUNE_THRESHOLD)
    return CoefficientField(
        box.alpha, {box.indices[i]: complex(u[i]) for i in nz}, real_symmetric
    )


# -- operations ------------------------------------------------------------


def gnorm(f: CoefficientField, profile: WeightProfile) -> float:
    """Weighted l2 norm of the coefficients: ||w(k) fhat(k)||_{l2}."""
    if profile.N != f.alpha.N:
        raise LatticeError("profile dimension does not match field")
    acc = 0.0
    for k, c in f.coeff.items():
        acc += (weight(profile, f.alpha, k) * abs(c)) ** 2
    return float(np.sqrt(acc))


def gnorm_dense(u: np.ndarray, profile: WeightProfile, box: TruncationBox) -> float:
    """gnorm of a dense box vector (vectorized; used in hot paths)."""
    w = box_weights(profile, box)
    return float(np.sqrt(np.sum((w * np.abs(u)) ** 2)))


def evaluate(f: CoefficientField, x: float) -> complex:
    """Pointwise value sum_k fhat(k) exp(i alpha.k x)."""
    acc = 0j
    for k, c in f.coeff.items():
        acc += c * np.exp(1j * float(f.alpha.dot(k)) * x)
    return complex(acc)


def convolve_product(
    u: CoefficientField,
    v: CoefficientField,
    box: TruncationBox,
    with_leakage: bool = False,
):
    """Spectral product (lattice convolution) truncated to the box.

    w(k) = sum_{k' != 0, k' != k} uhat(k-k') vhat(k') for k in the box, k != 0.
    The k'=0 / k'=k exclusions are automatic (fields store no k=0 entry).
    """
    if u.alpha != v.alpha:
        raise LatticeError("fields have different alpha")
    du, dv = field_to_dense(u, box), field_to_dense(v, box)
    sym = u.real_symmetric and v.real_symmetric
    if with_leakage:
        w, leak = convolve_on_box(du, dv, box, with_leakage=True)
        return dense_to_field(w, box, sym), leak
    return dense_to_field(convolve_on_box(du, dv, box), box, sym)


def x_derivative(f: CoefficientField) -> CoefficientField:
    """Multiply each amplitude by i * (alpha . k)."""
    out = {k: 1j * float(f.alpha.dot(k)) * c for k, c in f.coeff.items()}
    return CoefficientField(f.alpha, out, f.real_symmetric)


def linear_propagator(f: CoefficientField, t: float) -> CoefficientField:
    """Free Airy evolution: phase exp(i (alpha.k)^3 t) per mode.

    Sign convention: with this phase, free solutions have zero modulation in
    the restriction-norm machinery (see restriction_norms).
    """
    out = {}
    for k, c in f.coeff.items():
        phi = float(f.alpha.dot(k)) ** 3
        out[k] = c * np.exp(1j * phi * t)
    return CoefficientField(f.alpha, out, f.real_symmetric)


def random_field(
    box: TruncationBox,
    seed: int,
    decay,
    real_symmetric: bool = False,
) -> CoefficientField:
    """Deterministic random field: |coeff(k)| = decay(k), uniform phases.

    decay is a callable on multi-indices (or an array over the box
    enumeration).  With real_symmetric=True, phases are drawn on the
    lexicographically-positive half lattice and mirrored conjugate.
    """
    rng = np.random.default_rng(seed)
    if callable(decay):
        mags = np.array([float(decay(k)) for k in box.indices])
    else:
        mags = np.asarray(decay, dtype=float)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(box))
    coeff = {}
    if real_symmetric:
        for i, k in enumerate(box.indices):
            if k > tuple(-kj for kj in k):  # positive half, lexicographic
                continue
            c = mags[i] * np.exp(1j * phases[i])
            coeff[k] = c
            coeff[tuple(-kj for kj in k)] = np.conj(c)
        # mirror magnitudes must agree for the flag to verify
        return CoefficientField(box.alpha, coeff, real_symmetric=True)
    for i, k in enumerate(box.indices):
        coeff[k] = mags[i] * np.exp(1j * phases[i])
    return CoefficientField(box.alpha, coeff)


# -- snapshot format -------------------------------------------------------


def save_snapshot(f: CoefficientField, path, box_M: int | None = None):
    """Text snapshot: header with alpha/N/M/symmetry, one mode per line."""
    with open(path, "w") as fh:
        fh.write(dumps_snapshot(f, box_M))


def dumps_snapshot(f: CoefficientField, box_M: int | None = None) -> str:
    out = io.StringIO()
    alpha_strs = ",".join(f.alpha.sources)
    out.write(f"# qpkdv-snapshot v{SNAPSHOT_VERSION}\n")
    out.write(f"# alpha: {alpha_strs}\n")
    out.write(f"# N: {f.alpha.N}\n")
    out.write(f"# M: {box_M if box_M is not None else ''}\n")
    out.write(f"# real_symmetric: {int(f.real_symmetric)}\n")
    for k, c in f.coeff.items():
        ks = " ".join(str(kj) for kj in k)
        out.write(f"{ks} {c.real!r} {c.imag!r}\n")
    return out.getvalue()


def load_snapshot(path_or_text) -> CoefficientField:
    if "\n" in str(path_or_text):
        text = path_or_text
    else:
        with open(path_or_text) as fh:
            text = fh.read()
    alpha = None
    sym = False
    coeff = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("alpha:"):
                alpha = FrequencyVector(body.split(":", 1)[1].strip().split(","))
            elif body.startswith("real_symmetric:"):
                sym = bool(int(body.split(":", 1)[1]))
            continue
        parts = line.split()
        k = tuple(int(p) for p in parts[:-2])
        coeff[k] = complex(float(parts[-2]), float(parts[-1]))
    if alpha is None:
        raise ValueError("snapshot has no alpha header")
    return CoefficientField(alpha, coeff, sym)
