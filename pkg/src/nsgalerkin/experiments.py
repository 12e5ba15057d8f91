"""Seeded field generators and the four studies built on the toolkit.

Every study writes into an output directory:

``report.json``
    configuration, seed, constants table, study data and the verdict;
``checks.csv``
    one row per check with ``check, subject, computed, claimed, passed``;
    the verdict is recomputable as "every row has computed <= claimed";
``trajectory.csv``
    norm reports of the simulation, when there is one.
"""
from dataclasses import asdict, dataclass, field, fields
import csv
import json
import math
import os

import numpy as np

from .bound_verifier import (
    T2Params,
    build_schedule,
    d_sequence,
    duhamel_envelope,
    split_majorant,
)
from .errors import ConfigurationError, DomainError, IntegrationError
from .lattice import ge_radius
from .lattice_sums import empirical_constants, power_sum, tail_scaled
from .norms import argmax_phi, phi_norm, sobolev_norm, tail_phi_sup
from .spectral_core import SpectralField, _project_dense, symmetrize_real
from .time_integrator import GalerkinConfig, energy_report, simulate

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "Check",
    "StudyReport",
    "random_divfree_field",
    "profile_field",
    "h_half_K0",
    "run_simulation",
    "run_smallness_experiment",
    "run_bootstrap_study",
    "run_h_half_study",
    "run_constants",
    "recompute_verdict",
]

KINDS = ("simulate", "smallness", "bootstrap", "h-half", "constants", "verify-bounds")


@dataclass
class ExperimentConfig:
    """Every tunable of the studies; unset schedule values get study defaults.

    ``D`` and ``k_minus1`` parameterise the bootstrap ladder, ``L0`` and ``c``
    the H^{1/2} study (``c = None`` uses the empirical coefficient-sum constant).
    """

    kind: str = "smallness"
    seed: int = 0
    out: str = "out"
    cutoff: float = 16.0
    epsilon: float = 1e-3
    alpha: float = 2.0
    real: bool = True
    rho: float = 0.5
    t_end: float = None
    dt: float = 1e-3
    scheme: str = "exponential-euler"
    nonlinear: bool = True
    record_every: int = 10
    n_max: int = 2
    k_minus1: float = 1.0
    D: float = None
    L0: float = 5e-3
    c: float = None
    r_max: float = 32.0
    split_scheme: str = "T2"
    n: int = 1
    field: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown kind {self.kind!r}; choose from {KINDS}")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be nonnegative")
        if not self.cutoff > 0:
            raise ConfigurationError("cutoff must be positive")

    def time_horizon(self):
        if self.t_end is not None:
            return self.t_end
        return 1.0 if self.kind in ("smallness", "simulate") else self.rho

    def galerkin(self, **extra):
        return GalerkinConfig(
            cutoff=self.cutoff, dt=self.dt, t_end=self.time_horizon(),
            nonlinear_enabled=self.nonlinear, scheme=self.scheme,
            record_every=self.record_every, **extra)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string values, converting by field type."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            name = key.strip().replace("-", "_")
            if name not in types:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[name] = _convert(name, types[name], raw)
        return cls(**kwargs)


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _convert(name, typ, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() in ("none", ""):
        return None
    try:
        if typ in (bool, "bool"):
            return _BOOL[text.lower()]
        if typ in (int, "int"):
            return int(text)
        if typ in (float, "float"):
            return float(text)
    except (KeyError, ValueError):
        raise ConfigurationError(f"bad value {raw!r} for {name}") from None
    return text


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


# field generators -----------------------------------------------------------------

def random_divfree_field(seed, epsilon, alpha, cutoff, real=True):
    """Seeded divergence-free field with ``phi_norm(u, alpha) == epsilon``.

    Coefficients start as ``epsilon * xi_k / |k|^alpha`` with each component
    of ``xi_k`` uniform on the complex unit disk, are projected, optionally
    symmetrised, and finally rescaled.  ``epsilon = 0`` gives the zero field.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    u0 = SpectralField.zeros(cutoff)
    if epsilon == 0:
        return SpectralField.zeros(cutoff, real_symmetric=real)
    rng = np.random.default_rng(seed)
    shape = u0.coeffs.shape
    radius = np.sqrt(rng.uniform(size=shape))
    angle = rng.uniform(0, 2 * np.pi, size=shape)
    xi = radius * np.exp(1j * angle)
    k2 = u0.k2grid.astype(float)
    mask = u0.mask
    scale = np.zeros_like(k2)
    scale[mask] = k2[mask] ** (-0.5 * alpha)
    data = _project_dense(u0.kgrid, u0.k2grid, xi * scale[..., None])
    data[~mask] = 0
    u = SpectralField(cutoff, data, check=False)
    if real:
        u = symmetrize_real(u)
    norm = phi_norm(u, alpha)
    return u.replace(u.coeffs * (epsilon / norm))


def profile_field(cutoff, epsilon, alpha=2.0):
    """Real divergence-free field with ``|u_k| = epsilon / |k|^alpha`` exactly.

    The direction of ``u_k`` is ``i (k x e) / |k x e|`` with ``e`` a fixed
    axis not parallel to ``k``, which is odd in ``k`` and so gives
    ``u_{-k} = conj(u_k)``.
    """
    u0 = SpectralField.zeros(cutoff, real_symmetric=True)
    kv = u0.kgrid.astype(float)
    e1 = np.cross(kv, np.array([0.0, 0.0, 1.0]))
    e2 = np.cross(kv, np.array([1.0, 0.0, 0.0]))
    n1 = np.linalg.norm(e1, axis=-1)
    use1 = n1 > 0
    d = np.where(use1[..., None], e1, e2)
    dn = np.linalg.norm(d, axis=-1)
    mask = u0.mask
    data = np.zeros(u0.coeffs.shape, dtype=complex)
    k2 = u0.k2grid[mask].astype(float)
    amp = epsilon / k2 ** (0.5 * alpha)
    data[mask] = 1j * d[mask] / dn[mask][:, None] * amp[:, None]
    return u0.replace(data, real_symmetric=True)


# reports --------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    check: str
    subject: str
    computed: float
    claimed: float

    @property
    def passed(self):
        return bool(self.computed <= self.claimed)


@dataclass
class StudyReport:
    kind: str
    config: dict
    constants: dict
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    infeasible: list = field(default_factory=list)
    refused: bool = False

    @property
    def passed(self):
        return (not self.refused) and all(c.passed for c in self.checks)

    def add(self, check, subject, computed, claimed):
        c = Check(check, str(subject), float(computed), float(claimed))
        self.checks.append(c)
        return c

    def to_dict(self):
        return {
            "kind": self.kind,
            "passed": self.passed,
            "refused": self.refused,
            "config": self.config,
            "constants": self.constants,
            "checks": [dict(asdict(c), passed=c.passed) for c in self.checks],
            "infeasible": self.infeasible,
            "notes": self.notes,
            "data": self.data,
        }

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "checks.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "subject", "computed", "claimed", "passed"])
            for c in self.checks:
                w.writerow([c.check, c.subject, repr(c.computed), repr(c.claimed), int(c.passed)])
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def recompute_verdict(out_dir):
    """Verdict of a finished study from its ``checks.csv`` alone.

    Returns ``(passed, rows)``; a refused study (recorded in report.json)
    never passes.
    """
    rows = []
    with open(os.path.join(out_dir, "checks.csv")) as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    ok = all(float(r["computed"]) <= float(r["claimed"]) for r in rows)
    refused = False
    rp = os.path.join(out_dir, "report.json")
    if os.path.exists(rp):
        with open(rp) as fh:
            refused = bool(json.load(fh).get("refused", False))
    return ok and not refused, rows


def _constants_dict(r_max=32):
    ec = empirical_constants(r_max)
    return {
        "C": ec.C,
        "c_coeff_sum": ec.c_coeff_sum,
        "table": [dict(zip(("p", "range", "lattice_sum", "integral", "ratio"), row))
                  for row in ec.rows()],
    }


def _new_report(cfg):
    return StudyReport(kind=cfg.kind, config=asdict(cfg), constants=_constants_dict(cfg.r_max))


def _initial_field(cfg):
    if cfg.field:
        from .spectral_core import read_field
        return read_field(cfg.field)
    return random_divfree_field(cfg.seed, cfg.epsilon, cfg.alpha, cfg.cutoff, cfg.real)


def _run(report, psi, gcfg, on_record=None):
    """Simulate, converting an integration failure into a failed check."""
    try:
        return simulate(psi, gcfg, on_record=on_record)
    except IntegrationError as err:
        report.add("integration", f"step {err.step_index}", 1.0, 0.0)
        report.notes.append(str(err))
        return err.trajectory


# studies --------------------------------------------------------------------------

def run_simulation(cfg, out_dir=None):
    """Plain run: trajectory CSV plus the energy-inequality check."""
    report = _new_report(cfg)
    psi = _initial_field(cfg)
    tr = _run(report, psi, cfg.galerkin())
    if tr is not None and tr.times:
        _energy_checks(report, tr)
        report.data["final_time"] = tr.times[-1]
        report.data["max_phi2"] = tr.max_phi2()
    if out_dir:
        report.write(out_dir)
        if tr is not None:
            tr.write_csv(os.path.join(out_dir, "trajectory.csv"))
            if tr.final is not None:
                from .spectral_core import write_field
                write_field(os.path.join(out_dir, "final_field.txt"), tr.final)
    return report, tr


def _energy_checks(report, tr):
    er = energy_report(tr)
    i = int(np.argmax(np.asarray(er.residuals) - np.asarray(er.tolerance)))
    report.add("energy_inequality", f"t={tr.times[i]:.6g}", er.residuals[i], er.tolerance[i])
    report.data["energy_max_identity_residual"] = er.max_identity_residual
    if er.note:
        report.notes.append(er.note)
    return er


def run_smallness_experiment(cfg, out_dir=None):
    """Small data in the ``Phi(2)`` norm must stay small.

    Checks ``max_t phi_norm(u, 2) <= epsilon (1 + 1e-6)``, the energy
    inequality and, at every recorded step, the three-region splitting at the
    mode attaining the ``Phi(2)`` norm with the current norm as hypothesis.
    """
    report = _new_report(cfg)
    psi = _initial_field(cfg)
    eps0 = phi_norm(psi, 2.0)
    C = report.constants["C"]
    splits = []

    def split_at(u, t):
        eps = phi_norm(u, 2.0)
        k = argmax_phi(u, 2.0)
        if k is None or eps == 0:
            return
        b = split_majorant(u, k, "T2", T2Params(eps, C))
        splits.append({"time": t, "k": list(k), "epsilon": eps, "total": b.total,
                       "claimed": b.claimed_total,
                       "regions": {r.name: r.computed for r in b.regions}})

    tr = _run(report, psi, cfg.galerkin(), on_record=split_at)
    if tr is None:
        return report, tr
    observed = tr.max_phi2()
    report.add("phi2_preserved", "max_t", observed, eps0 * (1 + 1e-6))
    _energy_checks(report, tr)
    for row in splits:
        report.add("split_T2_total", f"t={row['time']:.6g} k={tuple(row['k'])}",
                   row["total"], row["claimed"])
    report.data.update({"epsilon": eps0, "max_phi2": observed, "split_checks": splits})
    if out_dir:
        report.write(out_dir)
        tr.write_csv(os.path.join(out_dir, "trajectory.csv"))
    return report, tr


def _shell_max(u, k_lo):
    """Per-shell maxima ``(|k|, max |u_k|)`` over stored shells with ``|k| >= k_lo``."""
    k2 = u.k2grid[u.mask]
    mag = u.magnitudes
    sel = ge_radius(k2, k_lo) & (mag > 0)
    if not np.any(sel):
        return np.array([]), np.array([])
    shells, inv = np.unique(k2[sel], return_inverse=True)
    mx = np.zeros(shells.size)
    np.maximum.at(mx, inv, mag[sel])
    return np.sqrt(shells.astype(float)), mx


def fitted_decay_exponent(u, k_lo):
    """Least-squares slope of ``-log max|u_k|`` against ``log |k|`` over shells ``>= k_lo``."""
    r, mx = _shell_max(u, k_lo)
    if r.size < 2:
        return math.nan
    slope = np.polyfit(np.log(r), np.log(mx), 1)[0]
    return float(-slope)


def run_bootstrap_study(cfg, out_dir=None):
    """Decay improvement along the bootstrap ladder at desk scale.

    At ``t_n`` the tail ``sup_{|k| >= k_n} |k|^2 |u_k|`` must not exceed
    ``eps^{mu_n}``; between consecutive rungs the coefficients beyond
    ``k_{n+1}`` must sit under the Duhamel envelope; at the final time
    ``|k|^{2.25} |u_k| <= k0^{1/4}`` beyond ``k_1``.  Rungs whose radius
    exceeds the cutoff are listed as infeasible.
    """
    report = _new_report(cfg)
    eps = cfg.epsilon
    D = cfg.D if cfg.D is not None else eps / 10
    sched = build_schedule(cfg.rho, eps, cfg.k_minus1, D, cfg.n_max)
    report.data["schedule"] = {
        "k0": sched.k0, "t": sched.t, "k": sched.k, "mu": sched.mu,
        "choice_ok": sched.choice_ok, "mu_ratio_ok": sched.mu_ratio_ok,
        "exp_estimate_first_failure": sched.exp_estimate_first_failure,
        "truncated": sched.truncated, "D": D,
    }
    if sched.exp_estimate_first_failure is not None:
        report.notes.append(
            f"exponential smallness fails at n = {sched.exp_estimate_first_failure}")
    psi = random_divfree_field(cfg.seed, eps, 2.0, cfg.cutoff, cfg.real) \
        if not cfg.field else _initial_field(cfg)
    t_end = max(cfg.time_horizon(), cfg.rho)
    ladder_times = [float(t) for t in sched.t if t <= t_end]
    gcfg = GalerkinConfig(cutoff=cfg.cutoff, dt=cfg.dt, t_end=t_end,
                          nonlinear_enabled=cfg.nonlinear, scheme=cfg.scheme,
                          record_every=cfg.record_every,
                          snapshot_times=tuple(ladder_times) + (t_end,))
    tr = _run(report, psi, gcfg)
    if tr is None or tr.final is None:
        return report, tr
    report.add("hypothesis_maintained", "max_t phi2", tr.max_phi2(), eps * (1 + 1e-6))

    first_bad = sched.first_rung_beyond(cfg.cutoff)
    rungs = []
    for n in range(1, sched.n_max + 2):
        if first_bad is not None and n >= first_bad:
            report.infeasible.append(n)
            continue
        t_n = float(sched.t[n])
        _, u_n = tr.snapshot_near(t_n)
        sup = tail_phi_sup(u_n, 2.0, float(sched.k[n]))
        bound = eps ** sched.mu[n]
        report.add("tail_improvement", f"n={n} t={t_n:.6g}", sup, bound)
        rungs.append({"n": n, "t": t_n, "k_n": float(sched.k[n]), "tail": sup, "bound": bound})
    report.data["rungs"] = rungs
    if report.infeasible:
        report.notes.append(f"first infeasible rung n = {report.infeasible[0]} "
                            f"(k_n = {float(sched.k[report.infeasible[0]]):.6g} > cutoff)")

    # envelope between consecutive rungs
    for n in range(0, sched.n_max + 1):
        if n + 1 in report.infeasible:
            break
        k_next = float(sched.k[n + 1])
        t0, t1 = float(sched.t[n]), float(sched.t[n + 1])
        _, u1 = tr.snapshot_near(t1)
        worst = -math.inf
        worst_k = None
        for k, v in u1.items():
            nk2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
            if nk2 < k_next ** 2 * (1 - 1e-12):
                continue
            env = duhamel_envelope(eps ** sched.mu[n] / nk2, 0.5 * eps ** sched.mu[n + 1],
                                   k, t1 - t0)
            excess = float(np.linalg.norm(v)) / env
            if excess > worst:
                worst, worst_k = excess, k
        if worst_k is not None:
            report.add("duhamel_envelope", f"n={n} k={worst_k}", worst, 1.0)

    # fitted exponents
    k1 = float(sched.k[1]) if sched.n_max + 1 >= 1 else 1.0
    series = []
    for t in sorted(tr.snapshots):
        series.append({"time": t, "exponent": fitted_decay_exponent(tr.snapshots[t], k1)})
    report.data["fitted_exponents"] = series
    for row in series:
        if row["time"] >= sched.t[1] - 1e-12 and not math.isnan(row["exponent"]):
            report.add("fitted_exponent_at_least_2", f"t={row['time']:.6g}", 2.0, row["exponent"])

    # final decay with exponent 2.25
    final = tr.final
    if k1 <= cfg.cutoff:
        val = tail_phi_sup(final, 2.25, k1)
        report.add("final_decay_2.25", f"t={tr.times[-1]:.6g}", val, sched.k0 ** 0.25)
    if out_dir:
        report.write(out_dir)
        tr.write_csv(os.path.join(out_dir, "trajectory.csv"))
    return report, tr


def h_half_K0(L0, rho, n_max, K_upper=1000.0, step=0.01):
    """Smallest grid radius beyond which the H^{1/2} ladder conditions hold.

    Two conditions are scanned on ``[1, K_upper]``: the exponential
    smallness ``exp(-(K 2^l)^2 rho / 2^n) < sqrt(L0) / (K 2^l)^2`` for
    ``0 <= n <= n_max < l <= n_max + 1``, and the first-rung absorption
    ``sqrt(L0) e^{-rho K^2/2} + sqrt(2) L0 (K^{-3/2} + K^{-2}) <= 2 L0 K^{-3/2}``.
    The returned value is the first grid point after the last failure.
    """
    K = np.arange(1.0, K_upper + step, step)
    ok = np.ones(K.size, dtype=bool)
    logs = 0.5 * math.log(L0)
    for n in range(0, n_max + 1):
        for l in range(n + 1, n_max + 2):
            R = K * 2.0 ** l
            ok &= -(R ** 2) * rho / 2.0 ** n < logs - 2 * np.log(R)
    base = (math.sqrt(L0) * np.exp(-rho * K ** 2 / 2)
            + math.sqrt(2) * L0 * (K ** -1.5 + K ** -2.0))
    ok &= base <= 2 * L0 * K ** -1.5
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(K[0])
    if bad[-1] + 1 >= K.size:
        raise ConfigurationError("no admissible K0 below the scan limit")
    return float(K[bad[-1] + 1])


def run_h_half_study(cfg, out_dir=None):
    """Coefficient decay under a small ``H^{1/2}`` bound.

    Data are scaled so that ``||psi||_{H^{1/2}}^2 = L0``; the observed
    ``L0 = sup_t ||u||^2_{H^{1/2}}`` is then used for every bound.  Rung
    ``n >= 1`` checks ``|k|^{2 - gamma_n} |u_k(t_n)| <= D_{n-1}`` for
    ``|k| >= K0 2^n``; the final check is ``|k|^2 |u_k| <= 2 (4 + sqrt 2) L0 /
    (1 - q)`` at ``t >= rho`` and ``|k| >= 2 K0``.  The study refuses when
    ``q = 2 c sqrt(L0) >= 1``.
    """
    report = _new_report(cfg)
    c = cfg.c if cfg.c is not None else report.constants["c_coeff_sum"]
    threshold = 1.0 / (4 * c * c)
    report.data.update({"c": c, "L0_threshold": threshold})
    if cfg.L0 < 0:
        raise ConfigurationError("L0 must be nonnegative")
    q_req = 2 * c * math.sqrt(cfg.L0)
    if q_req >= 1:
        report.refused = True
        report.notes.append(f"2 c sqrt(L0) = {q_req:.6g} >= 1; L0 must stay below {threshold:.6g}")
        if out_dir:
            report.write(out_dir)
        return report, None
    if cfg.field:
        psi = _initial_field(cfg)
    elif cfg.L0 == 0:
        psi = SpectralField.zeros(cfg.cutoff, real_symmetric=cfg.real)
    else:
        psi = random_divfree_field(cfg.seed, 1.0, cfg.alpha, cfg.cutoff, cfg.real)
        psi = psi * math.sqrt(cfg.L0) * (1.0 / sobolev_norm(psi, 0.5))
    t_end = max(cfg.time_horizon(), cfg.rho)
    times = [cfg.rho - cfg.rho / 2 ** n for n in range(1, cfg.n_max + 1)]
    gcfg = GalerkinConfig(cutoff=cfg.cutoff, dt=cfg.dt, t_end=t_end,
                          nonlinear_enabled=cfg.nonlinear, scheme=cfg.scheme,
                          record_every=cfg.record_every,
                          snapshot_times=tuple(times) + (t_end,))
    tr = _run(report, psi, gcfg)
    if tr is None or tr.final is None:
        return report, tr
    L0 = max(r.h_half ** 2 for r in tr.reports)
    report.data["L0_observed"] = L0
    if L0 == 0:
        report.notes.append("zero field: every check holds vacuously")
        if out_dir:
            report.write(out_dir)
            tr.write_csv(os.path.join(out_dir, "trajectory.csv"))
        return report, tr
    q = 2 * c * math.sqrt(L0)
    if q >= 1:
        report.refused = True
        report.notes.append(f"observed 2 c sqrt(L0) = {q:.6g} >= 1")
        if out_dir:
            report.write(out_dir)
        return report, tr
    K0 = h_half_K0(L0, cfg.rho, cfg.n_max)
    ds = d_sequence(cfg.n_max, L0, c)
    report.data.update({"K0": K0, "q": q, "D": ds.values, "D_limit": ds.limit})
    for n in range(1, cfg.n_max + 1):
        thr = K0 * 2 ** n
        if thr > cfg.cutoff:
            report.infeasible.append(n)
            continue
        t_n = cfg.rho - cfg.rho / 2 ** n
        _, u_n = tr.snapshot_near(t_n)
        val = tail_phi_sup(u_n, 2.0 - 2.0 ** -n, thr)
        report.add("h_half_rung", f"n={n} t={t_n:.6g}", val, ds.values[n - 1])
    if report.infeasible:
        report.notes.append(f"first infeasible rung n = {report.infeasible[0]} "
                            f"(K0 2^n = {K0 * 2 ** report.infeasible[0]:.6g} > cutoff)")
    final_bound = 2 * (4 + math.sqrt(2)) * L0 / (1 - q)
    if 2 * K0 <= cfg.cutoff:
        report.add("h_half_final", f"t={tr.times[-1]:.6g}",
                   tail_phi_sup(tr.final, 2.0, 2 * K0), final_bound)
    else:
        report.infeasible.append("final")
    if out_dir:
        report.write(out_dir)
        tr.write_csv(os.path.join(out_dir, "trajectory.csv"))
    return report, tr


CONSTANT_SWEEP = (2, 4, 8, 16, 32)


def constants_rows(r_max=32):
    """Rows ``(p, range, lattice_sum, integral, ratio)``: sweep points then sups."""
    from .lattice_sums import _integral
    rows = []
    for p in (2, 4, 1):
        for r in CONSTANT_SWEEP:
            if r > r_max:
                continue
            if p == 4:
                s = power_sum(4, r, math.inf)
                rng = f"|a|>={r}"
            else:
                s = power_sum(p, 1, r)
                rng = f"1<=|a|<={r}"
            integral = _integral(p, r)
            rows.append((p, rng, s, integral, s / integral))
    ec = empirical_constants(r_max)
    for cc in (ec.annulus_p2, ec.tail_p4, ec.annulus_p1):
        rows.append((cc.p, "sup " + cc.range, cc.lattice_sum, cc.integral_value, cc.ratio))
    return rows


def run_constants(cfg, out_dir=None):
    """Lattice constants table with positivity and tail-scaling checks."""
    report = _new_report(cfg)
    rows = constants_rows(cfg.r_max)
    for p, rng, s, integral, ratio in rows:
        report.add("ratio_positive_finite", f"p={p} {rng}",
                   0.0 if (ratio > 0 and math.isfinite(ratio)) else 1.0, 0.0)
    tail_cap = 4 * math.pi * report.constants["table"][1]["ratio"]
    scaled = {}
    for K in (2, 4, 8, 16):
        val = tail_scaled(K)
        scaled[K] = val
        report.add("tail_scaled", f"K={K}", val, tail_cap)
    report.data.update({"tail_scaled": scaled, "rows": rows})
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_constants_csv(os.path.join(out_dir, "constants.csv"), rows)
        report.write(out_dir)
    return report, None


def write_constants_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "range", "lattice_sum", "integral", "ratio"])
        for p, rng, s, integral, ratio in rows:
            w.writerow([p, rng, repr(float(s)), repr(float(integral)), repr(float(ratio))])
