"""Discretized Fourier-restriction (Bourgain) machinery.

Space-time fields are stored as rotating-frame envelopes: the stored series
for mode k is exp(-i (alpha.k)^3 t) * uhat(t, k), so the dispersive phase is
removed analytically and the time grid only has to resolve the modulation
content, not the cubic frequencies themselves.  The discrete time transform
of an envelope therefore lives directly on the centered modulation variable
lam = tau + (alpha.k)^3, and the weight <lam>^b is exact on the grid.

Sign convention (checked by a start-up self test): the transform kernel is
exp(+i tau t), so a free solution -- phase exp(+i (alpha.k)^3 t) per mode --
concentrates at tau + (alpha.k)^3 = 0, i.e. at lam = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from mpmath import mp

from .dynamics import TimeWindow, Trajectory
from .lattice import (
    FrequencyVector,
    TruncationBox,
    WeightProfile,
    box_weights,
    min_frequency_gap,
)
from ._kernels import convolve_on_box
from .qpfield import CoefficientField, field_to_dense

SQRT2PI = np.sqrt(2.0 * np.pi)


# -- exact resonance identity ---------------------------------------------


def resonance(alpha: FrequencyVector, k, kp) -> float:
    """3 (alpha.k)(alpha.k')(alpha.(k-k')): the cubic-phase mismatch.

    Computed at the frequency vector's working precision; the small factors
    |alpha.(k-k')| suffer catastrophic cancellation in double precision.
    """
    with mp.workdps(alpha.precision):
        a = alpha.dot(k)
        b = alpha.dot(kp)
        return float(3 * a * b * (a - b))


def resonance_identity_residual(alpha: FrequencyVector, k, kp) -> float:
    """Relative residual of (a^3 - (a-b)^3 - b^3) - 3ab(a-b) at high precision."""
    with mp.workdps(alpha.precision):
        a = alpha.dot(k)
        b = alpha.dot(kp)
        lhs = a**3 - (a - b) ** 3 - b**3
        rhs = 3 * a * b * (a - b)
        if rhs == 0:
            return 0.0 if lhs == 0 else float("inf")
        return float(abs(lhs - rhs) / abs(rhs))


def resonance_identity_max_residual(alpha: FrequencyVector, pairs) -> float:
    """Max relative residual over many (k, k') pairs, with cached cubes."""
    cache = {}

    def vals(k):
        k = tuple(int(x) for x in k)
        if k not in cache:
            a = alpha.dot(k)
            cache[k] = (a, a**3)
        return cache[k]

    worst = 0.0
    with mp.workdps(alpha.precision):
        for k, kp in pairs:
            a, a3 = vals(k)
            b, b3 = vals(kp)
            diff = tuple(int(x) - int(y) for x, y in zip(k, kp))
            c, c3 = vals(diff)
            rhs = 3 * a * b * c
            lhs = a3 - c3 - b3
            if rhs == 0:
                if lhs != 0:
                    return float("inf")
                continue
            r = abs(lhs - rhs) / abs(rhs)
            if r > worst:
                worst = float(r)
    return worst


def modulations(alpha: FrequencyVector, tau, k, taup, kp):
    """The three modulations |tau + (alpha.k)^3| etc. of a quadruple."""
    a = float(alpha.dot(k))
    b = float(alpha.dot(kp))
    c = a - b
    m1 = abs(tau + a**3)
    m2 = abs(taup + b**3)
    m3 = abs((tau - taup) + c**3)
    return m1, m2, m3, abs(a * b * c)


def omega_classify(alpha: FrequencyVector, tau, k, taup, kp) -> int:
    """Index (1, 2 or 3) of the maximal modulation; ties to the smaller index."""
    m1, m2, m3, _ = modulations(alpha, tau, k, taup, kp)
    if m1 >= m2 and m1 >= m3:
        return 1
    if m2 >= m3:
        return 2
    return 3


def lemma_max_modulation_check(alpha: FrequencyVector, tau, k, taup, kp) -> bool:
    """max modulation >= |alpha.k||alpha.(k-k')||alpha.k'| / 3, with slack.

    The exact identity makes the max at least 3x the bound; the 1e-9 slack
    absorbs double-precision rounding of the modulations.
    """
    m1, m2, m3, abc = modulations(alpha, tau, k, taup, kp)
    return max(m1, m2, m3) >= abc / 3.0 * (1.0 - 1e-9)


def lemma_max_modulation_batch(adk, adkp, tau, taup) -> np.ndarray:
    """Vectorized lemma check from precomputed frequencies (float64)."""
    adk = np.asarray(adk)
    adkp = np.asarray(adkp)
    c = adk - adkp
    m1 = np.abs(tau + adk**3)
    m2 = np.abs(taup + adkp**3)
    m3 = np.abs((tau - taup) + c**3)
    abc = np.abs(adk * adkp * c)
    return np.maximum(np.maximum(m1, m2), m3) >= abc / 3.0 * (1.0 - 1e-9)


# -- space-time fields and transforms -------------------------------------


def _check_tgrid(times):
    times = np.asarray(times, dtype=float)
    n = len(times)
    if n < 4 or (n & (n - 1)) != 0:
        raise ValueError("time grid length must be a power of two (>= 4)")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt):
        raise ValueError("time grid must be uniform")
    return times, float(dt)


class SpaceTimeField:
    """Per-mode complex time series (rotating-frame envelopes) on a box."""

    __slots__ = ("box", "times", "dt", "env", "windowed")

    def __init__(self, box: TruncationBox, times, env, windowed: bool = False):
        self.times, self.dt = _check_tgrid(times)
        env = np.asarray(env, dtype=np.complex128)
        if env.shape != (len(self.times), len(box)):
            raise ValueError("env must have shape (n_times, box size)")
        self.box = box
        self.env = env
        self.windowed = bool(windowed)

    @property
    def alpha(self):
        return self.box.alpha

    @classmethod
    def free_solution(cls, f: CoefficientField, box: TruncationBox, times):
        """Envelope of the free evolution of f: constant in time."""
        times = np.asarray(times, dtype=float)
        return cls(box, times, np.tile(field_to_dense(f, box), (len(times), 1)))

    @classmethod
    def from_trajectory(cls, traj: Trajectory):
        phases = np.exp(-1j * np.outer(traj.times, traj.box.adk**3))
        return cls(traj.box, traj.times, phases * traj.data)

    def lab_frame(self) -> np.ndarray:
        """Actual coefficient samples uhat(t, k) (phases restored)."""
        return self.env * np.exp(1j * np.outer(self.times, self.box.adk**3))

    def apply_window(self, window: TimeWindow) -> "SpaceTimeField":
        chi = window.samples(self.times)[:, None]
        return SpaceTimeField(self.box, self.times, chi * self.env, windowed=True)

    def scaled(self, c) -> "SpaceTimeField":
        return SpaceTimeField(self.box, self.times, c * self.env, self.windowed)

    def product(self, other: "SpaceTimeField") -> "SpaceTimeField":
        """Pointwise-in-time spectral product uv, truncated to the box."""
        if other.box is not self.box and other.box.indices != self.box.indices:
            raise ValueError("fields must share a box")
        phases = np.exp(1j * np.outer(self.times, self.box.adk**3))
        w_lab = convolve_on_box(self.env * phases, other.env * phases, self.box)
        return SpaceTimeField(
            self.box,
            self.times,
            np.conj(phases) * w_lab,
            windowed=self.windowed and other.windowed,
        )

    def x_derivative(self) -> "SpaceTimeField":
        return SpaceTimeField(
            self.box, self.times, 1j * self.box.adk * self.env, self.windowed
        )


class ModulationTable:
    """Per-mode transform samples on the centered modulation grid lam."""

    __slots__ = ("box", "lam", "dlam", "data", "t0", "dt")

    def __init__(self, box, lam, dlam, data, t0, dt):
        self.box = box
        self.lam = lam
        self.dlam = dlam
        self.data = data
        self.t0 = t0
        self.dt = dt

    def mode_l2(self, b: float = 0.0) -> np.ndarray:
        w = (1.0 + self.lam**2) ** (b / 2.0)
        return np.sqrt(np.sum((w[:, None] * np.abs(self.data)) ** 2, axis=0) * self.dlam)

    def mode_l1(self, b: float = 0.0) -> np.ndarray:
        w = (1.0 + self.lam**2) ** (b / 2.0)
        return np.sum(w[:, None] * np.abs(self.data), axis=0) * self.dlam


def _forward_1d(samples: np.ndarray, times: np.ndarray):
    """Unitary-convention transform: g~(tau) = (2pi)^{-1/2} int g e^{+i tau t} dt."""
    n = len(times)
    dt = times[1] - times[0]
    lam = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
    spec = np.fft.ifft(samples, axis=0) * (n * dt / SQRT2PI)
    phase = np.exp(1j * lam * times[0])
    return lam, phase[:, None] * spec if samples.ndim == 2 else phase * spec


def time_transform(u: SpaceTimeField) -> ModulationTable:
    """Per-mode discrete transform of the envelopes onto the lam grid."""
    lam, spec = _forward_1d(u.env, u.times)
    dlam = 2.0 * np.pi / (len(u.times) * u.dt)
    return ModulationTable(u.box, lam, dlam, spec, u.times[0], u.dt)


def inverse_transform(table: ModulationTable, box=None) -> SpaceTimeField:
    n = len(table.lam)
    phase = np.exp(-1j * table.lam * table.t0)
    env = np.fft.fft(phase[:, None] * table.data, axis=0) * (SQRT2PI / (n * table.dt))
    times = table.t0 + table.dt * np.arange(n)
    return SpaceTimeField(box or table.box, times, env)


def xnorm(u: SpaceTimeField, profile: WeightProfile, b: float) -> float:
    """|| <lam>^b u~ ||, l2 in tau per mode, weighted l2 over modes."""
    table = time_transform(u)
    w = box_weights(profile, u.box)
    return float(np.sqrt(np.sum((w * table.mode_l2(b)) ** 2)))


def ynorm(u: SpaceTimeField, profile: WeightProfile, b: float) -> float:
    """Same with l1 in tau per mode."""
    table = time_transform(u)
    w = box_weights(profile, u.box)
    return float(np.sqrt(np.sum((w * table.mode_l1(b)) ** 2)))


def znorm(u: SpaceTimeField, profile: WeightProfile) -> float:
    return xnorm(u, profile, 0.5) + ynorm(u, profile, 0.0)


# -- probe ensembles -------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    seed: int = 0
    size: int = 100
    gamma: float = 2.0
    n_time: int = 64


def random_spacetime_field(
    box: TruncationBox, times, seed: int, gamma: float, window: TimeWindow
) -> SpaceTimeField:
    """Windowed random envelope: magnitude <k>^-gamma, smooth random modulation."""
    rng = np.random.default_rng(seed)
    times = np.asarray(times, dtype=float)
    n, B = len(times), len(box)
    kk = box.kvecs.astype(float)
    amps = (1.0 + np.sum(kk**2, axis=1)) ** (-gamma / 2.0)
    amps = amps * np.exp(1j * rng.uniform(0, 2 * np.pi, B))
    span = times[-1] - times[0]
    r = np.arange(-2, 3)
    basis = np.exp(1j * np.pi * np.outer(times, r) / span)
    coefs = rng.normal(size=(5, B)) + 1j * rng.normal(size=(5, B))
    env = (basis @ coefs) / np.sqrt(10.0) * amps
    return SpaceTimeField(box, times, env).apply_window(window)


def near_resonant_pair(box: TruncationBox, times, window: TimeWindow):
    """Adversarial two-mode pair built around the smallest |alpha.k| on the box."""
    _, kmin = min_frequency_gap(box.alpha, box)
    e1 = tuple(1 if j == 0 else 0 for j in range(box.N))
    u = CoefficientField(box.alpha, {kmin: 1.0, e1: 1.0})
    v = CoefficientField(
        box.alpha, {tuple(-x for x in kmin): 1.0, tuple(-x for x in e1): 1.0}
    )
    fu = SpaceTimeField.free_solution(u, box, times).apply_window(window)
    fv = SpaceTimeField.free_solution(v, box, times).apply_window(window)
    return fu, fv


@dataclass
class ProbeStatistics:
    which: str
    T: float
    ratios: np.ndarray
    records: list = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if len(self.ratios) else 0.0

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios)) if len(self.ratios) else 0.0

    def quantile(self, q) -> float:
        return float(np.quantile(self.ratios, q))

    def summary(self) -> dict:
        return {
            "which": self.which,
            "T": self.T,
            "pairs": int(len(self.ratios)),
            "max": self.max_ratio,
            "mean": self.mean_ratio,
            "q50": self.quantile(0.5),
            "q90": self.quantile(0.9),
            "q99": self.quantile(0.99),
        }


_PROBES = ("BE1", "BE2", "BE3", "E41", "E42")


def _probe_norms(which, w, u, v, sigma, b):
    p0 = WeightProfile(sigma, 0.0)
    ph = WeightProfile(sigma, -0.5)
    if which == "BE1":
        return xnorm(w, p0, 0.0), xnorm(u, p0, b) * xnorm(v, p0, b)
    if which == "BE2":
        return xnorm(w, p0, -b), xnorm(u, p0, b) * xnorm(v, p0, 0.0)
    if which == "BE3":
        return ynorm(w, p0, -0.5), xnorm(u, p0, b) * xnorm(v, p0, b)
    wx = w.x_derivative()
    rhs = xnorm(u, ph, 0.5) * xnorm(v, ph, 0.5)
    if which == "E41":
        return xnorm(wx, ph, -0.5), rhs
    if which == "E42":
        return ynorm(wx, ph, -1.0), rhs
    raise ValueError(f"unknown probe {which!r}; choose from {_PROBES}")


def bilinear_probe(
    profile: WeightProfile,
    b: float,
    T: float,
    ensemble: EnsembleSpec,
    which: str,
    box: TruncationBox,
) -> ProbeStatistics:
    """Ratio distribution LHS/RHS of one bilinear estimate over an ensemble.

    For E41/E42 the inputs are time-windowed into [-T, T] and the grid spans
    [-2T, 2T]; for BE1-BE3 the window scale is 1 on a [-2, 2] grid.  The
    first ensemble pair is always the adversarial near-resonant one.
    """
    if which not in _PROBES:
        raise ValueError(f"unknown probe {which!r}; choose from {_PROBES}")
    scale = T / 2.0 if which in ("E41", "E42") else 1.0
    times = np.linspace(-2 * scale, 2 * scale, ensemble.n_time, endpoint=False)
    window = TimeWindow(scale)
    ratios = []
    records = []
    for i in range(ensemble.size):
        if i == 0:
            u, v = near_resonant_pair(box, times, window)
        else:
            u = random_spacetime_field(
                box, times, 10_000 * ensemble.seed + 2 * i, ensemble.gamma, window
            )
            v = random_spacetime_field(
                box, times, 10_000 * ensemble.seed + 2 * i + 1, ensemble.gamma, window
            )
        w = u.product(v)
        lhs, rhs = _probe_norms(which, w, u, v, profile.sigma, b)
        if rhs > 0:
            ratios.append(lhs / rhs)
            records.append((i, T, lhs, rhs, lhs / rhs))
    return ProbeStatistics(which, T, np.array(ratios), records)


@dataclass
class SweepStatistics:
    which: str
    Ts: np.ndarray
    max_ratios: np.ndarray
    slope: float
    slope_stderr: float
    per_T: list = field(default_factory=list)


def probe_T_sweep(
    profile: WeightProfile,
    b: float,
    Ts,
    ensemble: EnsembleSpec,
    which: str,
    box: TruncationBox,
) -> SweepStatistics:
    """Dyadic-T sweep of a probe; fits the log-log slope of the max ratio."""
    stats = [bilinear_probe(profile, b, T, ensemble, which, box) for T in Ts]
    Ts = np.asarray(Ts, dtype=float)
    y = np.log(np.array([s.max_ratio for s in stats]))
    x = np.log(Ts)
    (slope, _), cov = np.polyfit(x, y, 1, cov=True)
    return SweepStatistics(
        which, Ts, np.exp(y), float(slope), float(np.sqrt(cov[0, 0])), stats
    )


def time_localization_probe(
    profile: WeightProfile,
    eps: float,
    epsp: float,
    Ts,
    ensemble: EnsembleSpec,
    box: TruncationBox,
) -> SweepStatistics:
    """Ratio X^{..,1/2-eps} / X^{..,1/2} for fields supported in [-T, T]."""
    if not eps > epsp > 0:
        raise ValueError("need eps > eps' > 0")
    max_ratios = []
    per_T = []
    for T in Ts:
        scale = T / 2.0
        times = np.linspace(-2 * scale, 2 * scale, ensemble.n_time, endpoint=False)
        window = TimeWindow(scale)
        ratios = []
        for i in range(ensemble.size):
            u = random_spacetime_field(
                box, times, 10_000 * ensemble.seed + i, ensemble.gamma, window
            )
            hi = xnorm(u, profile, 0.5)
            if hi > 0:
                ratios.append(xnorm(u, profile, 0.5 - eps) / hi)
        ratios = np.array(ratios)
        max_ratios.append(float(np.max(ratios)))
        per_T.append(ProbeStatistics("LOC", T, ratios))
    Ts = np.asarray(Ts, dtype=float)
    y = np.log(np.array(max_ratios))
    (slope, _), cov = np.polyfit(np.log(Ts), y, 1, cov=True)
    return SweepStatistics(
        "LOC", Ts, np.array(max_ratios), float(slope), float(np.sqrt(cov[0, 0])), per_T
    )


# -- start-up sign-convention self test ------------------------------------


def _sign_convention_selftest():
    # a pure phase exp(+i theta t), windowed, must concentrate at tau = -theta
    theta = 3.0
    times = np.linspace(-4.0, 4.0, 256, endpoint=False)
    g = TimeWindow(1.0)(times) * np.exp(1j * theta * times)
    lam, spec = _forward_1d(g, times)
    peak = lam[int(np.argmax(np.abs(spec)))]
    dlam = 2 * np.pi / (times[-1] + (times[1] - times[0]) - times[0])
    if abs(peak + theta) > 2 * dlam:
        raise AssertionError(
            "time-transform sign convention broken: free solutions must have "
            f"zero modulation (peak at tau={peak}, expected {-theta})"
        )


_sign_convention_selftest()
