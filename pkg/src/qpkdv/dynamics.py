"""Time evolution of the truncated spectral KdV system.

Spectral form of u_t + u_xxx + (u^2)_x = 0 on the frequency lattice:

    d uhat_k / dt = i (alpha.k)^3 uhat_k - i (alpha.k) (uhat * uhat)(k)

The stiff diagonal phase is integrated exactly (interaction-picture /
Lawson schemes); only the quadratic term is stepped numerically.  The
Duhamel map and its Picard iteration operate on trajectories sampled on a
uniform grid, with the oscillatory factor removed analytically before the
composite-Simpson quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from ._kernels import convolve_on_box
from .lattice import LatticeError, TruncationBox, WeightProfile, box_weights
from .qpfield import (
    CoefficientField,
    convolve_product,
    dense_to_field,
    field_to_dense,
    gnorm_dense,
    x_derivative,
)


class NumericalAbortError(RuntimeError):
    """A coefficient became non-finite during time stepping."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite coefficient at step {step}")


SCHEMES = ("exponential-RK4", "exponential-Euler")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    T: float
    box: TruncationBox
    scheme: str = "exponential-RK4"
    nonlinear: bool = True
    store_every: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0 or self.dt > self.T:
            raise ValueError("need 0 < dt <= T")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")


@dataclass
class Trajectory:
    """Time-indexed dense states on a box, write-once.

    data[i] is the coefficient vector (box enumeration) at times[i].
    g00/leakage are per-step diagnostics on the full stepping grid
    (diag_times), which may be finer than the stored state grid.
    """

    box: TruncationBox
    times: np.ndarray
    data: np.ndarray
    real_symmetric: bool = False
    diag_times: np.ndarray | None = None
    g00: np.ndarray | None = None
    leakage: np.ndarray | None = None

    @property
    def alpha(self):
        return self.box.alpha

    @property
    def n_times(self) -> int:
        return len(self.times)

    def field(self, i: int) -> CoefficientField:
        return dense_to_field(self.data[i], self.box, self.real_symmetric)

    def terminal_field(self) -> CoefficientField:
        return self.field(self.n_times - 1)


class TimeWindow:
    """Smooth bump: 1 on |t| < T, 0 on |t| > 2T, C-infinity in between."""

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("window scale must be positive")
        self.scale = float(scale)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = 2.0 - np.abs(t) / self.scale  # >=1 inside, <=0 outside
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            hx = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
            h1 = np.where(x < 1, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
        out = hx / (hx + h1)
        return out if out.shape else float(out)

    def samples(self, tgrid) -> np.ndarray:
        return self(np.asarray(tgrid))


def rhs(u: CoefficientField, box: TruncationBox, nonlinear: bool = True) -> CoefficientField:
    """Full right-hand side: linear dispersion minus the derivative of u^2."""
    du = field_to_dense(u, box)
    out = 1j * box.adk**3 * du
    if nonlinear:
        out = out - 1j * box.adk * convolve_on_box(du, du, box)
    return dense_to_field(out, box, real_symmetric=False)


def _nonlinear_term(u: np.ndarray, box: TruncationBox, with_leakage=False):
    # -i (alpha.k) (u*u)(k), truncated to the box
    if with_leakage:
        w, leak = convolve_on_box(u, u, box, with_leakage=True)
        return -1j * box.adk * w, leak
    return -1j * box.adk * convolve_on_box(u, u, box)


def integrate(f: CoefficientField, cfg: IntegratorConfig, direction: int = 1) -> Trajectory:
    """March the truncated system from f over [0, direction*T].

    Negative-time integration (direction=-1) reverses the propagator phase;
    the grid is still stored in increasing |t| order starting at 0.
    """
    box = cfg.box
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    n_steps = int(round(cfg.T / cfg.dt))
    dt = direction * cfg.T / n_steps
    phi = box.adk**3
    e_full = np.exp(1j * phi * dt)
    e_half = np.exp(1j * phi * dt / 2)

    u = field_to_dense(f, box)
    times = np.arange(n_steps + 1) * dt
    stored = [u.copy()]
    stored_t = [0.0]
    g00 = np.empty(n_steps + 1)
    leak = np.zeros(n_steps + 1)
    g00[0] = float(np.linalg.norm(u))

    for step in range(1, n_steps + 1):
        if cfg.nonlinear:
            if cfg.scheme == "exponential-Euler":
                k1, lk = _nonlinear_term(u, box, with_leakage=True)
                u = e_full * (u + dt * k1)
            else:  # Lawson (interaction-picture) RK4
                k1, lk = _nonlinear_term(u, box, with_leakage=True)
                k2 = np.conj(e_half) * _nonlinear_term(e_half * (u + 0.5 * dt * k1), box)
                k3 = np.conj(e_half) * _nonlinear_term(e_half * u + 0.5 * dt * e_half * k2, box)
                k4 = np.conj(e_full) * _nonlinear_term(e_full * (u + dt * k3), box)
                u = e_full * (u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
            leak[step] = lk
        else:
            u = e_full * u
        nrm2 = np.vdot(u, u).real
        if not np.isfinite(nrm2):
            raise NumericalAbortError(step)
        g00[step] = np.sqrt(nrm2)
        if step % cfg.store_every == 0 or step == n_steps:
            stored.append(u.copy())
            stored_t.append(times[step])

    return Trajectory(
        box=box,
        times=np.array(stored_t),
        data=np.array(stored),
        real_symmetric=f.real_symmetric,
        diag_times=times,
        g00=g00,
        leakage=leak,
    )


def free_trajectory(f: CoefficientField, box: TruncationBox, times) -> Trajectory:
    """Exact linear evolution of f sampled on an arbitrary time grid."""
    times = np.asarray(times, dtype=float)
    u0 = field_to_dense(f, box)
    phases = np.exp(1j * np.outer(times, box.adk**3))
    return Trajectory(
        box=box, times=times, data=phases * u0, real_symmetric=f.real_symmetric
    )


def duhamel_map(f: CoefficientField, u: Trajectory, T: float | None = None) -> Trajectory:
    """One application of the integral-equation map M(u).

    Per mode, the free part plus the quadrature of
    exp(i phi (t-t')) * (-i)(alpha.k) (u*u)(t', k) over [0, t], with the
    oscillation factored exactly and composite Simpson on the grid.
    The time grid must contain t=0 (one- or two-sided windows).
    """
    box = u.box
    t = u.times
    if len(t) < 3:
        raise ValueError("duhamel_map needs at least 3 grid nodes")
    if T is not None and not np.isclose(t[-1], T):
        raise ValueError("trajectory grid does not cover [0, T]")
    i0 = int(np.argmin(np.abs(t)))
    if abs(t[i0]) > 1e-12 * max(1.0, abs(t[-1])):
        raise ValueError("trajectory grid must contain t = 0")
    phi = box.adk**3
    prod = convolve_on_box(u.data, u.data, box)
    integrand = (-1j * box.adk) * prod * np.exp(-1j * np.outer(t, phi))
    cum = cumulative_simpson(
        integrand.real, x=t, axis=0, initial=0.0
    ) + 1j * cumulative_simpson(integrand.imag, x=t, axis=0, initial=0.0)
    cum = cum - cum[i0]
    f0 = field_to_dense(f, box)
    out = np.exp(1j * np.outer(t, phi)) * (f0 + cum)
    return Trajectory(box=box, times=t, data=out, real_symmetric=False)


@dataclass
class PicardReport:
    iterates: int
    znorms: list = field(default_factory=list)
    diff_norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    def summary(self) -> str:
        lines = [f"picard: {self.iterates} iterates, converged={self.converged}"]
        for m, d in enumerate(self.diff_norms):
            r = self.ratios[m - 1] if m >= 1 else float("nan")
            lines.append(f"  m={m + 1}: |u(m+1)-u(m)| = {d:.3e}  ratio = {r:.3f}")
        return "\n".join(lines)


def _sup_gnorm(data: np.ndarray, profile: WeightProfile, box: TruncationBox) -> float:
    w = box_weights(profile, box)
    return float(np.sqrt(np.max(np.sum((w * np.abs(data)) ** 2, axis=1))))


def picard_iterate(
    f: CoefficientField,
    T: float,
    m_max: int,
    tol: float,
    profile: WeightProfile,
    box: TruncationBox,
    n_nodes: int = 257,
    two_sided: bool = False,
):
    """Iterate the integral-equation map from the free solution.

    Successive differences are measured in the computable surrogate of the
    space-time norm: sup over the grid of the weighted coefficient norm at
    exponent a (typically a = -1/2).  Divergence (ratio > 1 three times in a
    row) is reported, not fatal.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if two_sided:
        times = np.linspace(-T, T, 2 * n_nodes - 1)
    else:
        times = np.linspace(0.0, T, n_nodes)
    u = free_trajectory(f, box, times)
    report = PicardReport(iterates=0)
    report.znorms.append(_sup_gnorm(u.data, profile, box))
    bad = 0
    for m in range(m_max):
        v = duhamel_map(f, u)
        d = _sup_gnorm(v.data - u.data, profile, box)
        report.iterates = m + 1
        report.znorms.append(_sup_gnorm(v.data, profile, box))
        report.diff_norms.append(d)
        if m >= 1:
            prev = report.diff_norms[-2]
            ratio = d / prev if prev > 0 else 0.0
            report.ratios.append(ratio)
            bad = bad + 1 if ratio > 1.0 else 0
        u = v
        if d < tol:
            report.converged = True
            break
        if bad >= 3:
            report.diverged = True
            break
    return u, report


def existence_time(r: float, theta: float, c: float = 1.0) -> float:
    """Guaranteed local-existence horizon c * min(r^{-1/theta}, 1)."""
    if not 0 < theta < 0.125:
        raise ValueError("theta must lie in (0, 1/8)")
    if r <= 0 or c <= 0:
        raise ValueError("r and c must be positive")
    return c * min(r ** (-1.0 / theta), 1.0)


@dataclass
class ConservationReport:
    g00_drift: float
    real_symmetry_drift: float
    leakage_total: float


def conservation_report(traj: Trajectory) -> ConservationReport:
    """Relative drift of the unweighted l2 norm plus symmetry/leakage checks."""
    if traj.g00 is not None:
        g = traj.g00
    else:
        g = np.sqrt(np.sum(np.abs(traj.data) ** 2, axis=1))
    ref = g[0]
    drift = float(np.max(np.abs(g - ref)) / ref) if ref > 0 else float(np.max(g))
    sym = 0.0
    if traj.real_symmetric:
        neg = np.array(
            [traj.box.position(tuple(-kj for kj in k)) for k in traj.box.indices]
        )
        sym = float(np.max(np.abs(traj.data - np.conj(traj.data[:, neg]))))
    leak = float(np.sum(traj.leakage)) if traj.leakage is not None else 0.0
    return ConservationReport(drift, sym, leak)
