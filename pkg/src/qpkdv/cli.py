"""Batch command-line front-end.

Subcommands: validate, simulate, picard, probe, inflate, diophantine, norms.
Configuration is a flat key = value text file; every key can be overridden
by an environment variable QPKDV_<KEY> (upper-cased).  Outputs are CSV and
plain text with a full parameter echo in the header; a manifest records the
config, package versions and wall time.  Data files are byte-identical
across runs with identical configs and seeds (the manifest is not, since it
contains the wall time).

Exit codes: 0 success, 2 configuration error, 3 numerical abort (non-finite
state), 4 divergence reported by the Picard iteration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
from mpmath import mp

from . import __version__
from . import diophantine as dio
from .dynamics import (
    IntegratorConfig,
    NumericalAbortError,
    conservation_report,
    existence_time,
    integrate,
    picard_iterate,
)
from .lattice import (
    FrequencyVector,
    LatticeError,
    RationalDependenceError,
    TruncationBox,
    WeightProfile,
    check_assumption_A,
    lambda_s_vertices,
    min_frequency_gap,
)
from .qpfield import (
    CoefficientField,
    gnorm,
    load_snapshot,
    random_field,
    save_snapshot,
)
from .restriction_norms import EnsembleSpec, bilinear_probe, probe_T_sweep

ENV_PREFIX = "QPKDV_"
HEADER = f"# qpkdv v{__version__}"


class ConfigError(Exception):
    """Malformed or inconsistent configuration (exit code 2)."""


class Config:
    """Flat key = value file with line diagnostics and env overrides."""

    def __init__(self, entries: dict, lines: dict):
        self._entries = dict(entries)
        self._lines = dict(lines)
        for key in list(self._entries):
            env = os.environ.get(ENV_PREFIX + key.upper())
            if env is not None:
                self._entries[key] = env
                self._lines[key] = 0  # 0 marks an environment override
        # env vars may also introduce keys absent from the file
        for name, val in os.environ.items():
            if name.startswith(ENV_PREFIX):
                key = name[len(ENV_PREFIX) :].lower()
                if key not in self._entries and key not in ("out", "seed", "threads"):
                    self._entries[key] = val
                    self._lines[key] = 0

    @classmethod
    def from_file(cls, path: str) -> "Config":
        entries, lines = {}, {}
        try:
            with open(path) as fh:
                raw = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        for ln, line in enumerate(raw.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{ln}: expected 'key = value', got {body!r}")
            key, val = body.split("=", 1)
            key = key.strip().lower()
            if not key:
                raise ConfigError(f"{path}:{ln}: empty key")
            if key in entries:
                raise ConfigError(f"{path}:{ln}: duplicate key {key!r}")
            entries[key] = val.strip()
            lines[ln] = ln
            lines[key] = ln
        return cls(entries, lines)

    def _where(self, key):
        ln = self._lines.get(key, 0)
        return f"environment {ENV_PREFIX}{key.upper()}" if ln == 0 else f"line {ln}"

    def has(self, key):
        return key in self._entries

    def raw(self, key, default=None):
        if key not in self._entries:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        return self._entries[key]

    def get_int(self, key, default=None):
        v = self.raw(key, default)
        try:
            return int(str(v))
        except ValueError:
            raise ConfigError(f"{self._where(key)}: key {key!r} must be an integer, got {v!r}")

    def get_float(self, key, default=None):
        v = self.raw(key, default)
        try:
            return float(str(v))
        except ValueError:
            raise ConfigError(f"{self._where(key)}: key {key!r} must be a number, got {v!r}")

    def get_str(self, key, default=None):
        return str(self.raw(key, default))

    def get_list(self, key, default=None):
        v = self.raw(key, default)
        if isinstance(v, (tuple, list)):
            return list(v)
        return [tok.strip() for tok in str(v).split(",") if tok.strip()]

    def get_floats(self, key, default=None):
        out = []
        for tok in self.get_list(key, default):
            try:
                out.append(float(tok))
            except ValueError:
                raise ConfigError(
                    f"{self._where(key)}: key {key!r}: {tok!r} is not a number"
                )
        return out

    def echo(self) -> list:
        return [f"{k} = {self._entries[k]}" for k in sorted(self._entries)]


def _alpha_component(token: str, dps: int) -> str:
    """One frequency component: decimal string, sqrt(n), or golden."""
    token = token.strip()
    with mp.workdps(dps):
        if token.startswith("sqrt(") and token.endswith(")"):
            return mp.nstr(mp.sqrt(mp.mpf(token[5:-1])), dps)
        if token == "golden":
            return mp.nstr((1 + mp.sqrt(5)) / 2, dps)
    return token


def parse_alpha(cfg: Config, key: str = "alpha") -> FrequencyVector:
    dps = cfg.get_int("precision", 60)
    toks = cfg.get_list(key)
    try:
        return FrequencyVector([_alpha_component(t, dps) for t in toks], dps)
    except (LatticeError, ValueError) as e:
        raise ConfigError(f"bad {key}: {e}")


def parse_profile(cfg: Config, require_A: bool = False) -> WeightProfile:
    sigma = tuple(cfg.get_floats("sigma"))
    a = cfg.get_float("a", "0")
    ok, report = check_assumption_A(sigma)
    if require_A and not ok:
        raise ConfigError(f"weight exponents fail the simplex condition: {report}")
    return WeightProfile(sigma, a)


class Run:
    """Output collector: parameter-echo headers, abort cleanup, manifest."""

    def __init__(self, command: str, cfg: Config, outdir: str):
        self.command = command
        self.cfg = cfg
        self.outdir = outdir
        self.t0 = time.monotonic()
        self.written = []
        os.makedirs(outdir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.outdir, name)

    def header_lines(self) -> list:
        lines = [HEADER, f"# command: {self.command}"]
        lines += [f"# {e}" for e in self.cfg.echo()]
        return lines

    def write_text(self, name: str, body: str):
        p = self.path(name)
        with open(p, "w") as fh:
            fh.write("\n".join(self.header_lines()) + "\n" + body)
        self.written.append(p)
        return p

    def write_csv(self, name: str, columns, rows):
        body = ",".join(columns) + "\n"
        for row in rows:
            body += ",".join(_fmt(x) for x in row) + "\n"
        return self.write_text(name, body)

    def discard_outputs(self):
        for p in self.written:
            try:
                os.remove(p)
            except OSError:
                pass

    def manifest(self, extra: dict | None = None):
        info = {
            "command": self.command,
            "version": __version__,
            "numpy": np.__version__,
            "wall_time_s": round(time.monotonic() - self.t0, 3),
            "config": dict(e.split(" = ", 1) for e in self.cfg.echo()),
        }
        if extra:
            info.update(extra)
        p = self.path("manifest.json")
        with open(p, "w") as fh:
            json.dump(info, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _load_or_random_field(cfg: Config, box: TruncationBox) -> CoefficientField:
    if cfg.has("snapshot"):
        return load_snapshot(cfg.get_str("snapshot"))
    seed = cfg.get_int("seed", "0")
    gamma = cfg.get_float("decay_gamma", "2")
    real = bool(cfg.get_int("real", "1"))
    kk = box.kvecs.astype(float)
    mags = (1.0 + np.sum(kk**2, axis=1)) ** (-gamma / 2.0)
    f = random_field(box, seed, mags, real_symmetric=real)
    target = cfg.get_float("amplitude", "0.1")
    base = gnorm(f, WeightProfile((0.0,) * box.N, 0.0))
    if base == 0:
        return f
    return f.scaled(target / base)


# -- subcommands -----------------------------------------------------------


def cmd_validate(cfg: Config, run: Run) -> int:
    alpha = parse_alpha(cfg)
    profile = parse_profile(cfg)
    M = cfg.get_int("m", "8")
    depth = cfg.get_int("depth", "30")
    lines = []
    ok_all = True

    ok, report = check_assumption_A(profile.sigma)
    ok_all &= ok
    lines.append(f"assumption (A): {'pass' if ok else 'FAIL'} ({report})")
    if alpha.N >= 2:
        for j, v in enumerate(lambda_s_vertices(profile.s, alpha.N)):
            lines.append(f"simplex vertex d_{j + 1}: {tuple(round(x, 6) for x in v)}")

    try:
        box = TruncationBox(alpha, M)
        gap, kmin = min_frequency_gap(alpha, box)
        lines.append(f"min |alpha.k| on box M={M}: {gap!r} at k = {kmin}")
    except RationalDependenceError as e:
        ok_all = False
        lines.append(f"rational dependence: FAIL ({e})")

    for i in range(alpha.N):
        for j in range(i + 1, alpha.N):
            with mp.workdps(alpha.precision):
                mu = alpha.values[i] / alpha.values[j]
            cf = dio.continued_fraction(mu, depth, max(alpha.precision, 80))
            if cf.rational:
                ok_all = False
                lines.append(f"alpha_{i + 1}/alpha_{j + 1}: rational to working precision: FAIL")
                continue
            try:
                est = dio.rho_estimate(cf)
                lines.append(
                    f"alpha_{i + 1}/alpha_{j + 1}: rho_hat = {est.rho_hat:.4f}, "
                    f"K_hat = {est.K_hat:.4g} ({len(est.rho_n)} samples)"
                )
            except ValueError as e:
                lines.append(f"alpha_{i + 1}/alpha_{j + 1}: rho estimate unavailable ({e})")

    lines.append(f"verdict: {'pass' if ok_all else 'FAIL'}")
    body = "\n".join(lines) + "\n"
    run.write_text("validate.txt", body)
    sys.stdout.write(body)
    run.manifest({"verdict": "pass" if ok_all else "fail"})
    return 0 if ok_all else 1


def cmd_simulate(cfg: Config, run: Run) -> int:
    alpha = parse_alpha(cfg)
    M = cfg.get_int("m")
    box = TruncationBox(alpha, M)
    f = _load_or_random_field(cfg, box)
    icfg = IntegratorConfig(
        dt=cfg.get_float("dt"),
        T=cfg.get_float("t"),
        box=box,
        scheme=cfg.get_str("scheme", "exponential-RK4"),
        store_every=cfg.get_int("store_every", "1"),
    )
    traj = integrate(f, icfg)
    cols = ["t"] + [f"k_{j + 1}" for j in range(box.N)] + ["re", "im"]
    rows = []
    for i, t in enumerate(traj.times):
        for pos, k in enumerate(box.indices):
            c = traj.data[i, pos]
            if c != 0:
                rows.append([float(t), *k, float(c.real), float(c.imag)])
    run.write_csv("trajectory.csv", cols, rows)
    run.write_csv(
        "diagnostics.csv",
        ["t", "g00_norm", "leakage"],
        [
            [float(t), float(g), float(lk)]
            for t, g, lk in zip(traj.diag_times, traj.g00, traj.leakage)
        ],
    )
    save_snapshot(traj.terminal_field(), run.path("terminal.snapshot"), box_M=M)
    rep = conservation_report(traj)
    run.manifest(
        {"g00_drift": rep.g00_drift, "leakage_total": rep.leakage_total}
    )
    return 0


def cmd_picard(cfg: Config, run: Run) -> int:
    alpha = parse_alpha(cfg)
    profile = parse_profile(cfg)
    M = cfg.get_int("m")
    theta = cfg.get_float("theta", "0.1")
    if not 0 < theta < 0.125:
        raise ConfigError(f"theta must lie in (0, 1/8), got {theta}")
    box = TruncationBox(alpha, M)
    f = _load_or_random_field(cfg, box)
    r = gnorm(f, profile)
    T = cfg.get_float("t", repr(existence_time(max(r, 1e-12), theta)))
    u, report = picard_iterate(
        f,
        T,
        cfg.get_int("m_max", "12"),
        cfg.get_float("tol", "1e-10"),
        profile,
        box,
        n_nodes=cfg.get_int("n_nodes", "257"),
    )
    body = (
        f"r = {r!r}\ntheta = {theta!r}\nT = {T!r}\n"
        f"existence_time(r, theta) = {existence_time(max(r, 1e-12), theta)!r}\n"
        + report.summary()
        + "\n"
    )
    run.write_text("picard_report.txt", body)
    sys.stdout.write(body)
    save_snapshot(u.terminal_field(), run.path("picard_terminal.snapshot"), box_M=M)
    run.manifest({"converged": report.converged, "diverged": report.diverged})
    return 4 if report.diverged else 0


def cmd_probe(cfg: Config, run: Run) -> int:
    alpha = parse_alpha(cfg)
    profile = parse_profile(cfg)
    M = cfg.get_int("m", "8")
    box = TruncationBox(alpha, M)
    b = cfg.get_float("b", "0.5")
    ensemble = EnsembleSpec(
        seed=cfg.get_int("seed", "0"),
        size=cfg.get_int("pairs", "100"),
        gamma=cfg.get_float("decay_gamma", "2"),
        n_time=cfg.get_int("n_time", "64"),
    )
    Ts = cfg.get_floats("t_values", "0.5")
    summaries = {}
    for which in cfg.get_list("which", "BE1"):
        which = which.upper()
        if len(Ts) > 1:
            sweep = probe_T_sweep(profile, b, Ts, ensemble, which, box)
            rows = [r for s in sweep.per_T for r in s.records]
            summaries[which] = {
                "slope": sweep.slope,
                "slope_stderr": sweep.slope_stderr,
                "max_per_T": dict(zip(map(str, Ts), sweep.max_ratios.tolist())),
            }
        else:
            stat = bilinear_probe(profile, b, Ts[0], ensemble, which, box)
            rows = stat.records
            summaries[which] = stat.summary()
        run.write_csv(
            f"probe_{which}.csv", ["pair_id", "T", "lhs", "rhs", "ratio"], rows
        )
    run.write_text("probe_summary.json", json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    run.manifest()
    return 0


def cmd_inflate(cfg: Config, run: Run) -> int:
    profile = parse_profile(cfg)
    t = cfg.get_float("t", "0.5")
    if not 0 < t <= 1:
        raise ConfigError(f"inflate needs 0 < t <= 1, got {t}")
    mu_spec = None
    depth = cfg.get_int("depth", "8")
    if cfg.get_str("mu", "") == "liouville":
        mu_spec = dio.liouville_flavored(depth)
    elif cfg.has("mu_quotients"):
        mu_spec = dio.from_quotients([int(x) for x in cfg.get_list("mu_quotients")])
    elif cfg.has("mu"):
        mu_spec = dio.continued_fraction(cfg.get_str("mu"), depth)
    if cfg.has("alpha"):
        alpha = parse_alpha(cfg)
    elif mu_spec is not None:
        alpha = FrequencyVector([mu_spec.mu, "1"], mu_spec.precision)
    else:
        raise ConfigError("inflate needs alpha and/or mu")
    n_range = range(cfg.get_int("n_min", "0"), cfg.get_int("n_max", "6"))
    report = dio.inflation_report(mu_spec, alpha, profile, t, n_range)
    rows = [
        [r.n, r.p, r.q, r.delta, r.f_norm, r.I1, r.I2, r.I3, r.ratio]
        for r in report.rows
    ]
    run.write_csv(
        "inflate.csv",
        ["n", "p_n", "q_n", "delta_n", "f_norm", "I1", "I2", "I3", "ratio"],
        rows,
    )
    body = report.threshold_line() + f"\nmonotone growth: {report.monotone_growing}\n"
    run.write_text("inflate_summary.txt", body)
    sys.stdout.write(body)
    run.manifest({"threshold": report.threshold, "rho_hat": report.rho_hat})
    return 0


def cmd_diophantine(cfg: Config, run: Run) -> int:
    depth = cfg.get_int("depth", "30")
    if cfg.get_str("mu", "") == "liouville":
        cf = dio.liouville_flavored(depth)
    elif cfg.has("mu_quotients"):
        cf = dio.from_quotients([int(x) for x in cfg.get_list("mu_quotients")])
    else:
        dps = cfg.get_int("precision", str(dio.DIOPHANTINE_DPS))
        cf = dio.continued_fraction(_alpha_component(cfg.get_str("mu"), dps), depth, dps)
    conv = dio.convergents(cf)
    est = dio.rho_estimate(cf)
    rows = []
    j = 0
    for n, c in enumerate(conv[:-1]):
        rho_n = K_n = ""
        if c.q >= 2:
            rho_n, K_n = est.rho_n[j], est.K_n[j]
            j += 1
        rows.append([n, c.p, c.q, rho_n, K_n])
    run.write_csv("convergents.csv", ["n", "p_n", "q_n", "rho_n", "K_n"], rows)
    body = (
        f"depth = {cf.depth}\nrational = {cf.rational}\n"
        f"precision_exhausted = {cf.precision_exhausted}\n"
        f"rho_hat = {est.rho_hat!r}\nK_hat = {est.K_hat!r}\n"
    )
    run.write_text("diophantine_summary.txt", body)
    sys.stdout.write(body)
    run.manifest({"rho_hat": est.rho_hat})
    return 0


def cmd_norms(cfg: Config, run: Run) -> int:
    path = cfg.get_str("snapshot")
    if not os.path.exists(path):
        raise ConfigError(f"snapshot file not found: {path}")
    f = load_snapshot(path)
    sigmas = cfg.get_list("sigma_table", "") or [",".join(map(str, cfg.get_floats("sigma")))]
    a_values = cfg.get_floats("a_values", cfg.raw("a", "0"))
    rows = []
    for stoks in sigmas:
        sigma = tuple(float(x) for x in str(stoks).replace(";", ",").split(","))
        for a in a_values:
            rows.append([" ".join(map(str, sigma)), a, gnorm(f, WeightProfile(sigma, a))])
    run.write_csv("norms.csv", ["sigma", "a", "gnorm"], rows)
    run.manifest()
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "probe": cmd_probe,
    "inflate": cmd_inflate,
    "diophantine": cmd_diophantine,
    "norms": cmd_norms,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qpkdv",
        description="Spectral simulation and verification toolkit for "
        "quasi-periodic KdV dynamics.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads (advisory)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config.from_file(args.config)
        if args.seed is not None:
            cfg._entries["seed"] = str(args.seed)
        outdir = args.out or os.environ.get(ENV_PREFIX + "OUT") or "."
        run = Run(args.command, cfg, outdir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg, run)
    except ConfigError as e:
        run.discard_outputs()
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalAbortError as e:
        run.discard_outputs()
        print(f"numerical abort: {e}", file=sys.stderr)
        return 3
    except (LatticeError, ValueError) as e:
        run.discard_outputs()
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
