"""Continued fractions, approximation-type estimation, and norm inflation.

The ill-posedness construction lives here: for mu = alpha_1/alpha_2 with
convergents p_n/q_n, a two-mode datum f_n is built whose second Picard
iterate has a closed form (three output modes, oscillatory time integrals
in closed form).  Growth of ||u_2|| / ||f_n||^2 along the convergents
witnesses failure of C^2 dependence on the data at the origin.

All partial quotients and convergents are exact Python integers; the source
value mu is held at >= 200 decimal digits so the quotient extraction and
the small divisors delta_n = alpha_1 q_n - alpha_2 p_n stay trustworthy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf

from .lattice import FrequencyVector, WeightProfile, weight
from .qpfield import CoefficientField, gnorm

DIOPHANTINE_DPS = 220

# mu values closer to a rational than this are treated as that rational
RATIONAL_CUTOFF_DIGITS = 10


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients [a0; a1, a2, ...] plus the source value."""

    quotients: tuple
    mu: str  # decimal form at working precision
    depth: int
    precision: int = DIOPHANTINE_DPS
    rational: bool = False
    precision_exhausted: bool = False

    def __post_init__(self):
        for i, a in enumerate(self.quotients[1:], start=1):
            if a < 1:
                raise ValueError(f"partial quotient a_{i} = {a} < 1")

    def value(self) -> mpf:
        with mp.workdps(self.precision):
            return mpf(self.mu)


@dataclass(frozen=True)
class Convergent:
    n: int
    p: int
    q: int


@dataclass(frozen=True)
class TypeEstimate:
    """Sampled evidence for the approximation type (K, rho) of mu.

    rho_n and K_n are per-convergent samples; rho_hat is the max over the
    tail half and K_hat the binding constant at that exponent.  These are
    estimates from finitely many convergents, not the infimum itself.
    """

    rho_n: tuple
    K_n: tuple
    rho_hat: float
    K_hat: float


def continued_fraction(mu, depth: int, precision: int = DIOPHANTINE_DPS) -> ContinuedFraction:
    """Gauss-map quotient extraction at high precision.

    Stops early with rational=True when the remainder vanishes to working
    precision, and with precision_exhausted=True when the convergent
    denominators outgrow the digit budget (quotients past that point would
    be noise).
    """
    with mp.workdps(precision):
        x = mpf(mu) if isinstance(mu, (str, int, float)) else mpf(mu)
        mu_str = mp.nstr(x, precision)
        quotients = []
        rational = False
        exhausted = False
        # frac parts below this are artifacts of finite precision
        eps = mpf(10) ** (-(precision - RATIONAL_CUTOFF_DIGITS))
        q_prev, q_cur = 0, 1  # track denominators to bound usable depth
        y = x
        for i in range(depth):
            a = int(mp.floor(y))
            if i >= 1 and a < 1:
                exhausted = True
                break
            quotients.append(a)
            q_prev, q_cur = q_cur, (a * q_cur + q_prev if i >= 1 else 1)
            frac = y - a
            if frac < eps:
                rational = frac == 0 or abs(frac) < eps
                break
            if mpf(q_cur) ** 2 > mpf(10) ** (precision - RATIONAL_CUTOFF_DIGITS):
                exhausted = True
                break
            y = 1 / frac
    return ContinuedFraction(
        tuple(quotients), mu_str, len(quotients), precision, rational, exhausted
    )


def from_quotients(quotients, precision: int = DIOPHANTINE_DPS) -> ContinuedFraction:
    """Continued fraction from an explicit quotient list (to engineer rho)."""
    quotients = tuple(int(a) for a in quotients)
    if not quotients:
        raise ValueError("need at least one partial quotient")
    with mp.workdps(precision):
        # exact tail-to-head evaluation
        val = mpf(quotients[-1])
        for a in reversed(quotients[:-1]):
            val = a + 1 / val
        mu_str = mp.nstr(val, precision)
    return ContinuedFraction(quotients, mu_str, len(quotients), precision)


def liouville_flavored(depth: int, precision: int = DIOPHANTINE_DPS) -> ContinuedFraction:
    """Quotients a0 = a1 = 2, a_{n+1} = q_n: doubly exponential denominators.

    The convergent gaps then give rho_n >= 1 for every computed n >= 2.
    """
    quotients = [2, 2]
    q_prev, q_cur = 1, 2
    for _ in range(depth - 2):
        a = q_cur
        quotients.append(a)
        q_prev, q_cur = q_cur, a * q_cur + q_prev
    return from_quotients(quotients[:depth], precision)


def convergents(cf: ContinuedFraction) -> list:
    """Exact three-term recurrence; coprimality asserted per pair."""
    out = []
    p_prev, p_cur = 1, cf.quotients[0]
    q_prev, q_cur = 0, 1
    out.append(Convergent(0, p_cur, q_cur))
    for n, a in enumerate(cf.quotients[1:], start=1):
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        if math.gcd(p_cur, q_cur) != 1:
            raise AssertionError(f"convergent p_{n}/q_{n} not in lowest terms")
        out.append(Convergent(n, p_cur, q_cur))
    return out


def _log_big(q: int, precision: int) -> float:
    with mp.workdps(precision):
        return float(mp.log(mpf(q)))


def rho_estimate(cf: ContinuedFraction) -> TypeEstimate:
    """Per-convergent samples of the type exponent and constant.

    Since |mu - p_n/q_n| is comparable to 1/(q_n q_{n+1}), writing the gap
    as 1/q_n^{2+rho_n} gives rho_n = log q_{n+1} / log q_n - 1.
    """
    conv = convergents(cf)
    if len(conv) < 4:
        raise ValueError("rho estimation needs at least 4 convergents")
    rho = []
    for n in range(len(conv) - 1):
        if conv[n].q < 2:
            continue
        rho.append(
            _log_big(conv[n + 1].q, cf.precision) / _log_big(conv[n].q, cf.precision)
            - 1.0
        )
    if not rho:
        raise ValueError("all denominators below 2; cannot estimate rho")
    tail = rho[len(rho) // 2 :]
    rho_hat = max(tail)
    mu = cf.value()
    K = []
    with mp.workdps(cf.precision):
        for n in range(len(conv) - 1):
            if conv[n].q < 2:
                continue
            gap = abs(mu - mpf(conv[n].p) / conv[n].q)
            K.append(float(gap * mpf(conv[n].q) ** (2.0 + rho_hat)))
    return TypeEstimate(tuple(rho), tuple(K), float(rho_hat), float(min(K)))


# -- the two-mode inflation datum ------------------------------------------


@dataclass(frozen=True)
class InflationDatum:
    n: int
    p: int
    q: int
    f: CoefficientField
    delta: object  # mpf small divisor alpha_1 q - alpha_2 p
    f_norm: float


def _small_divisor(alpha: FrequencyVector, p: int, q: int) -> mpf:
    with mp.workdps(alpha.precision):
        return alpha.values[0] * q - alpha.values[1] * p


def inflation_data(
    n: int,
    alpha: FrequencyVector,
    profile: WeightProfile,
    cf: ContinuedFraction | None = None,
) -> InflationDatum:
    """The two-mode datum built on the n-th convergent of mu = alpha1/alpha2.

    Support {(-q_n, 0), (q_n, -p_n)} with magnitudes chosen so that each
    mode contributes about unit mass to the weighted norm:

        fhat((-q_n, 0))   = |q_n|^{-a-sigma1}
        fhat((q_n, -p_n)) = |delta_n|^{-a} |q_n|^{-sigma1} |p_n|^{-sigma2}

    If cf is given (engineered quotients) it must agree with alpha1/alpha2
    to 1e-30 relative.
    """
    if alpha.N != 2:
        raise ValueError("the inflation construction needs N = 2")
    if profile.N != 2:
        raise ValueError("profile dimension must be 2")
    with mp.workdps(max(alpha.precision, 60)):
        mu = alpha.values[0] / alpha.values[1]
        if cf is None:
            cf = continued_fraction(mu, n + 2, max(alpha.precision, DIOPHANTINE_DPS))
        else:
            if abs(cf.value() - mu) > mpf("1e-30") * abs(mu):
                raise ValueError("continued fraction disagrees with alpha1/alpha2")
    conv = convergents(cf)
    if n >= len(conv):
        raise ValueError(f"convergent {n} not available (depth {len(conv)})")
    p, q = conv[n].p, conv[n].q
    delta = _small_divisor(alpha, p, q)
    if delta == 0:
        raise ValueError("delta_n = 0: mu is rational at this convergent")
    d = abs(float(delta))
    if d == 0.0:
        raise ValueError(f"delta_{n} underflows double precision; reduce depth")
    s1, s2 = profile.sigma
    a = profile.a
    coeff = {
        (-q, 0): abs(q) ** (-a - s1),
        (q, -p): d ** (-a) * abs(q) ** (-s1) * abs(p) ** (-s2),
    }
    f = CoefficientField(alpha, coeff)
    return InflationDatum(n, p, q, f, delta, gnorm(f, profile))


def oscillatory_integral(t: float, y: float) -> complex:
    """int_0^t exp(-i t' y) dt' = (1 - e^{-ity})/(iy), with the y->0 limit t.

    Evaluated in the cancellation-free form t e^{-ity/2} sinc(ty/2pi).
    """
    return t * np.exp(-0.5j * t * y) * np.sinc(t * y / (2.0 * np.pi))


@dataclass(frozen=True)
class SecondIterateReport:
    I1: float  # weighted norm of the (0, -p) component
    I2: float  # weighted norm of the (-2q, 0) component
    I3: float  # weighted norm of the (2q, -2p) component
    u2_norm: float


def second_iterate_exact(
    datum: InflationDatum,
    t: float,
    alpha: FrequencyVector,
    profile: WeightProfile,
):
    """Closed-form second Picard iterate of the two-mode datum at time t.

    The quadratic Duhamel response of the free evolution of f lands on
    exactly three modes, (0,-p), (-2q, 0) and (2q,-2p); per mode

        u2(t, k) = e^{i (alpha.k)^3 t} (-i)(alpha.k)
                   * (sum of fhat pair products) * E(t, phi_alpha(k, k'))

    with E the oscillatory integral above and phi_alpha the cubic-phase
    resonance 3 (alpha.k)(alpha.k')(alpha.(k-k')).
    """
    if not -1.0 <= t <= 1.0:
        raise ValueError("t must lie in [-1, 1]")
    p, q = datum.p, datum.q
    A, B = (-q, 0), (q, -p)
    cA, cB = datum.f[A], datum.f[B]
    modes = [
        ((0, -p), 2.0 * cA * cB, B),  # k = A + B, pairs (A,B) and (B,A)
        ((-2 * q, 0), cA * cA, A),  # k = 2A
        ((2 * q, -2 * p), cB * cB, B),  # k = 2B
    ]
    coeff = {}
    norms = []
    with mp.workdps(alpha.precision):
        for k, pairsum, kp in modes:
            if all(x == 0 for x in k):
                # mean-zero projection: the k = 0 output (possible at the
                # first convergent, where p = 0) carries no amplitude
                norms.append(0.0)
                continue
            adk = alpha.dot(k)
            a_kp = alpha.dot(kp)
            a_diff = adk - a_kp
            phi = float(3 * adk * a_kp * a_diff)
            adk_f = float(adk)
            amp = (
                np.exp(1j * adk_f**3 * t)
                * (-1j * adk_f)
                * pairsum
                * oscillatory_integral(t, phi)
            )
            coeff[k] = amp
            norms.append(weight(profile, alpha, k) * abs(amp))
    u2 = CoefficientField(alpha, coeff)
    report = SecondIterateReport(
        norms[0], norms[1], norms[2], float(np.sqrt(sum(x * x for x in norms)))
    )
    return u2, report


# -- the inflation report --------------------------------------------------


@dataclass
class InflationRow:
    n: int
    p: int
    q: int
    delta: float
    f_norm: float
    I1: float
    I2: float
    I3: float
    ratio: float  # max_t ||u2(t)|| / ||f_n||^2


@dataclass
class InflationReport:
    rows: list = field(default_factory=list)
    a: float = 0.0
    rho_hat: float = float("nan")
    threshold: float = float("nan")
    above_threshold: bool = False
    monotone_growing: bool = False

    def threshold_line(self) -> str:
        side = ">" if self.above_threshold else "<="
        return (
            f"inflation threshold: a > {self.threshold:.6g} "
            f"(rho_hat = {self.rho_hat:.6g}); a = {self.a:.6g} {side} threshold"
        )

    def growth_factor(self) -> float:
        if len(self.rows) < 2 or self.rows[0].ratio == 0:
            return float("nan")
        return self.rows[-1].ratio / self.rows[0].ratio


def inflation_threshold(profile: WeightProfile, rho_hat: float) -> float:
    """a must exceed (2 min sigma - min(1, rho)) / (1 + rho) for inflation."""
    return (2.0 * min(profile.sigma) - min(1.0, rho_hat)) / (1.0 + rho_hat)


def inflation_report(
    mu_spec,
    alpha: FrequencyVector,
    profile: WeightProfile,
    t: float,
    n_range,
    t_grid: int = 64,
) -> InflationReport:
    """Per-convergent inflation table with the analytic threshold.

    mu_spec may be a ContinuedFraction (engineered quotients) or None to
    derive mu = alpha1/alpha2 directly.  At fixed t the oscillatory factors
    can dip below their envelope, so each row maximizes ||u2|| over a grid
    of t_grid points in (0, t].
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    n_range = list(n_range)
    if isinstance(mu_spec, ContinuedFraction):
        cf = mu_spec
    elif mu_spec is None:
        with mp.workdps(alpha.precision):
            cf = continued_fraction(
                alpha.values[0] / alpha.values[1],
                max(n_range) + 2,
                max(alpha.precision, DIOPHANTINE_DPS),
            )
    else:
        cf = continued_fraction(mu_spec, max(n_range) + 2)
    est = rho_estimate(cf)
    report = InflationReport(a=profile.a, rho_hat=est.rho_hat)
    report.threshold = inflation_threshold(profile, est.rho_hat)
    report.above_threshold = profile.a > report.threshold
    ts = np.linspace(t / t_grid, t, t_grid)
    for n in n_range:
        datum = inflation_data(n, alpha, profile, cf)
        best = None
        for tj in ts:
            _, rep = second_iterate_exact(datum, float(tj), alpha, profile)
            if best is None or rep.u2_norm > best.u2_norm:
                best = rep
        report.rows.append(
            InflationRow(
                n,
                datum.p,
                datum.q,
                float(abs(datum.delta)),
                datum.f_norm,
                best.I1,
                best.I2,
                best.I3,
                best.u2_norm / datum.f_norm**2,
            )
        )
    ratios = [r.ratio for r in report.rows]
    report.monotone_growing = all(b > a for a, b in zip(ratios, ratios[1:]))
    return report


# -- borderline divergence (critical-line lattice sums) --------------------


def borderline_divergence_demo(
    N: int,
    profile: WeightProfile,
    n: int,
    alpha: FrequencyVector | None = None,
):
    """Bounded-norm data whose pairing against a band test function diverges.

    On the lattice points of A_n = {<x> <= n, 2|alpha_N| <= |alpha.x| <=
    4|alpha_N|} put fhat(k) = <k>^{1-N} / log<k>.  Returns the weighted
    coefficient norm of this datum (stays bounded when sum sigma_j <=
    (N-1)/2) and the pairing S_n = sum of the coefficients (the test
    function is 1 on the frequency band), which grows without bound.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if any(s < 0 for s in profile.sigma):
        raise ValueError(f"hypothesis sigma_j >= 0 violated: sigma = {profile.sigma}")
    if profile.s > (N - 1) / 2:
        raise ValueError(
            f"hypothesis sum sigma_j <= (N-1)/2 violated: s = {profile.s} > {(N - 1) / 2}"
        )
    if alpha is None:
        # 1 and square roots of successive primes: rationally independent
        primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
        alpha = FrequencyVector(
            ["1"] + [mp.nstr(mp.sqrt(primes[j]), 60) for j in range(N - 1)]
        )
    if alpha.N != N or profile.N != N:
        raise ValueError("alpha/profile dimension mismatch")
    af = alpha.floats
    aN = abs(af[-1])
    lo, hi = 2.0 * aN, 4.0 * aN
    s_pair = 0.0
    g2 = 0.0
    sig = np.array(profile.sigma)
    a = profile.a
    # enumerate the band row by row: for each prefix of N-1 coordinates the
    # admissible last coordinates fill two short intervals
    import itertools as _it

    for prefix in _it.product(range(-n, n + 1), repeat=N - 1):
        r = float(np.dot(af[:-1], prefix))
        pref2 = float(np.dot(np.square(prefix, dtype=float), np.ones(N - 1)))
        if 1.0 + pref2 > n * n:
            continue
        cands = set()
        for b0, b1 in ((lo, hi), (-hi, -lo)):
            kN_lo = math.ceil((b0 - r) / af[-1] - 1e-12)
            kN_hi = math.floor((b1 - r) / af[-1] + 1e-12)
            cands.update(range(kN_lo, kN_hi + 1))
        for kN in cands:
            adk = r + af[-1] * kN
            if not (lo <= abs(adk) <= hi):
                continue
            jap2 = 1.0 + pref2 + kN * kN  # <k>^2
            if jap2 > n * n:
                continue
            jap = math.sqrt(jap2)
            fk = jap ** (1 - N) / math.log(jap)
            s_pair += fk
            k = prefix + (kN,)
            w = abs(adk) ** a
            for kj, sj in zip(k, sig):
                w *= (1.0 + kj * kj) ** (sj / 2.0)
            g2 += (w * fk) ** 2
    return float(np.sqrt(g2)), float(s_pair)
