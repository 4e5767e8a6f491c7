"""Multi-index lattice geometry for quasi-periodic spectral fields.

A quasi-periodic function with base frequencies alpha = (alpha_1, ..., alpha_N)
has its spectrum on {alpha . k : k integer multi-index}. This module owns the
frequency vector, the multi-index truncation box, the weighted-norm geometry
(sigma, a, s), and the simplex condition on the weight exponents.

Base frequencies are held at high precision (mpmath, >= 50 significant digits)
because |alpha . k| can be arbitrarily close to zero on a large box and the
norm weights raise it to negative powers. Double precision is used only after
the dot product has been formed at high precision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf

# Working precision (decimal digits) for all alpha.k arithmetic.
DEFAULT_DPS = 60

# Below this, |alpha . k| is treated as an exact rational dependence.
DEPENDENCE_THRESHOLD = mpf("1e-30")


class LatticeError(ValueError):
    """Domain error in lattice geometry (zero index, zero frequency, ...)."""


class RationalDependenceError(LatticeError):
    """alpha . k vanished (within threshold) for a k on the active box."""

    def __init__(self, k, value):
        self.k = tuple(k)
        self.value = value
        super().__init__(
            f"alpha is rationally dependent on the active box: "
            f"|alpha . k| = {mp.nstr(abs(value), 6)} <= 1e-30 at k = {self.k}"
        )


def _to_mpf(x) -> mpf:
    if isinstance(x, str):
        return mpf(x)
    if isinstance(x, (int, float)):
        # floats are accepted verbatim; callers who care about digits beyond
        # double precision must pass strings or mpf values
        return mpf(x)
    return mpf(x)


class FrequencyVector:
    """Base frequencies alpha, immutable, held at high precision.

    Components may be given as decimal strings, mpmath values, or numbers.
    Every component must be finite and nonzero.
    """

    __slots__ = ("values", "floats", "N", "precision", "sources")

    def __init__(self, components, precision: int = DEFAULT_DPS):
        if precision < 15:
            raise ValueError("precision must be at least 15 digits")
        components = tuple(components)
        with mp.workdps(precision):
            vals = tuple(_to_mpf(c) for c in components)
            self.sources = tuple(
                c if isinstance(c, str) else mp.nstr(v, precision)
                for c, v in zip(components, vals)
            )
        if len(vals) < 1:
            raise LatticeError("alpha must have at least one component")
        for j, v in enumerate(vals):
            if not mp.isfinite(v) or v == 0:
                raise LatticeError(f"alpha[{j}] must be finite and nonzero, got {v}")
        self.values = vals
        self.floats = np.array([float(v) for v in vals])
        self.N = len(vals)
        self.precision = precision

    def dot(self, k) -> mpf:
        """alpha . k at working precision (k has exact integer components)."""
        if len(k) != self.N:
            raise LatticeError(f"dimension mismatch: alpha has N={self.N}, k={tuple(k)}")
        with mp.workdps(self.precision):
            return mp.fsum(a * int(kj) for a, kj in zip(self.values, k))

    def __eq__(self, other):
        return isinstance(other, FrequencyVector) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def __repr__(self):
        comps = ", ".join(mp.nstr(v, 12) for v in self.values)
        return f"FrequencyVector(({comps}), N={self.N})"


def generated_frequency(alpha: FrequencyVector, k) -> float:
    """The real frequency alpha . k generated by multi-index k."""
    return float(alpha.dot(k))


@dataclass(frozen=True)
class WeightProfile:
    """Exponent bundle (sigma, a) of the weighted coefficient norm.

    The weight at multi-index k is |alpha.k|^a * prod_j <k_j>^{sigma_j} with
    <x> = (1+x^2)^{1/2}.  s is always the component sum of sigma.
    """

    sigma: tuple
    a: float
    assumption_A_validated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
        if self.assumption_A_validated:
            ok, _ = check_assumption_A(self.sigma)
            if not ok:
                raise LatticeError("profile flagged validated but assumption (A) fails")

    @property
    def s(self) -> float:
        return float(sum(self.sigma))

    @property
    def N(self) -> int:
        return len(self.sigma)

    def negated(self) -> "WeightProfile":
        return WeightProfile(tuple(-s for s in self.sigma), -self.a)


def weight(profile: WeightProfile, alpha: FrequencyVector, k) -> float:
    """|alpha.k|^a * prod_j (1+k_j^2)^{sigma_j/2} for a single index k != 0."""
    k = tuple(int(kj) for kj in k)
    if all(kj == 0 for kj in k):
        raise LatticeError("weight is undefined at k = 0")
    adk = alpha.dot(k)
    if abs(adk) <= DEPENDENCE_THRESHOLD:
        raise RationalDependenceError(k, adk)
    w = abs(float(adk)) ** profile.a
    for kj, sj in zip(k, profile.sigma):
        w *= (1.0 + kj * kj) ** (sj / 2.0)
    return w


def lambda_s_vertices(s: float, N: int) -> list:
    """Vertices d_1..d_N of the exponent simplex at total weight s.

    d_j has j-th component 0 and the remaining components s/(N-1).
    """
    if N < 2:
        raise LatticeError("the exponent simplex needs N >= 2 (for N=1 use sigma=(s,))")
    c = s / (N - 1)
    return [tuple(0.0 if i == j else c for i in range(N)) for j in range(N)]


def check_assumption_A(sigma) -> tuple:
    """Validate the simplex condition on the weight exponents.

    After sorting sigma ascending, requires sigma_(1) >= 0 and
    sum_{i<=j} sigma_(i) > (j-1)/2 for every j from 2 to N (the j=N case is
    s > (N-1)/2).  Returns (ok, report); the report names the first violated
    inequality.
    """
    sig = sorted(float(x) for x in sigma)
    N = len(sig)
    if N == 0:
        return False, "sigma is empty"
    if sig[0] < 0:
        return False, f"sigma_(1) >= 0 violated: min(sigma) = {sig[0]}"
    partial = sig[0]
    for j in range(2, N + 1):
        partial += sig[j - 1]
        if not partial > (j - 1) / 2:
            if j == N:
                return False, f"s > (N-1)/2 violated: s = {partial} <= {(N - 1) / 2}"
            return (
                False,
                f"sum of {j} smallest sigma_j > {(j - 1) / 2} violated: sum = {partial}",
            )
    if N == 1 and not sig[0] > 0:
        return False, f"s > 0 violated for N=1: s = {sig[0]}"
    return True, "assumption (A) holds"


class TruncationBox:
    """All multi-indices k != 0 with |k_j| <= M, in lexicographic order.

    Construction verifies |alpha . k| > 1e-30 for every enumerated k; a
    violation aborts with the offending index (the standing hypothesis
    alpha . k != 0 is enforced on the finite set actually used).
    """

    __slots__ = (
        "alpha",
        "M",
        "N",
        "indices",
        "kvecs",
        "adk",
        "adk_mp",
        "_pos",
        "_lin",
        "_full_to_box",
        "_origin_full",
    )

    def __init__(self, alpha: FrequencyVector, M: int):
        if M < 1:
            raise LatticeError("box bound M must be >= 1")
        self.alpha = alpha
        self.M = int(M)
        self.N = alpha.N
        idx = [
            k
            for k in itertools.product(range(-M, M + 1), repeat=self.N)
            if any(kj != 0 for kj in k)
        ]
        self.indices = idx
        self.kvecs = np.array(idx, dtype=np.int64)
        with mp.workdps(alpha.precision):
            self.adk_mp = [alpha.dot(k) for k in idx]
        for k, v in zip(idx, self.adk_mp):
            if abs(v) <= DEPENDENCE_THRESHOLD:
                raise RationalDependenceError(k, v)
        self.adk = np.array([float(v) for v in self.adk_mp])
        self._pos = {k: i for i, k in enumerate(idx)}
        # Linear offsets into the full product grid (side 4M+1, the support of
        # a box-box convolution): lin(k) = sum_d (k_d + M) * stride_d, chosen
        # so that lin_full(ki + kj) = lin(ki) + lin(kj).
        side = 4 * M + 1
        strides = np.array(
            [side ** (self.N - 1 - d) for d in range(self.N)], dtype=np.int64
        )
        self._lin = ((self.kvecs + M) * strides).sum(axis=1)
        self._full_to_box = ((self.kvecs + 2 * M) * strides).sum(axis=1)
        self._origin_full = int((2 * M * strides).sum())

    def __len__(self):
        return len(self.indices)

    def __contains__(self, k):
        return tuple(k) in self._pos

    def position(self, k) -> int:
        return self._pos[tuple(k)]

    @property
    def full_size(self) -> int:
        return (4 * self.M + 1) ** self.N

    def __repr__(self):
        return f"TruncationBox(M={self.M}, N={self.N}, size={len(self)})"


def box_weights(profile: WeightProfile, box: TruncationBox) -> np.ndarray:
    """Vector of norm weights over the box enumeration (float64)."""
    if profile.N != box.N:
        raise LatticeError("profile dimension does not match box")
    w = np.abs(box.adk) ** profile.a
    for j, sj in enumerate(profile.sigma):
        w *= (1.0 + box.kvecs[:, j].astype(float) ** 2) ** (sj / 2.0)
    return w


def min_frequency_gap(alpha: FrequencyVector, box: TruncationBox):
    """Smallest |alpha . k| on the box and the first index attaining it."""
    if len(box) == 0:
        raise LatticeError("box is empty")
    i = int(np.argmin(np.abs(box.adk)))
    return float(abs(box.adk[i])), box.indices[i]
