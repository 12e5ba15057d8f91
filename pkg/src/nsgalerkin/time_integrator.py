"""Galerkin time stepping with the dissipative factor treated exactly.

Each mode obeys ``du_k/dt = -|k|^2 u_k + N(u)_k`` (unit viscosity).  Two
schemes are available:

exponential-euler
    ``u_k <- E u_k + (1 - E)/|k|^2 N(u)_k`` with ``E = exp(-|k|^2 dt)``;
if-rk4
    classical RK4 on ``exp(|k|^2 t) u_k`` (integrating factor).

With the nonlinear term disabled both reduce to exact heat decay.
"""
from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np

from .errors import ConfigurationError, IntegrationError
from .norms import norm_report, phi_norm, sobolev_norm
from .spectral_core import SpectralField, nonlinear_term_direct, nonlinear_term_fast

__all__ = [
    "SCHEMES",
    "GalerkinConfig",
    "TrajectoryRecord",
    "EnergyReport",
    "step",
    "simulate",
    "energy_report",
]

SCHEMES = ("exponential-euler", "if-rk4")


@dataclass(frozen=True)
class GalerkinConfig:
    """Settings of one Galerkin run.

    ``dissipation`` exists for conservation tests only; the physical model
    always has it on.  ``snapshot_times`` lists times at which full fields are
    kept (matched to the nearest step).
    """

    cutoff: float
    dt: float
    t_end: float
    nonlinear_enabled: bool = True
    scheme: str = "exponential-euler"
    record_every: int = 1
    dissipation: bool = True
    snapshot_times: tuple = ()
    nonlinear_method: str = "fast"
    tail_K_min: float = None
    tail_k0: float = None
    cfl_limit: float = 0.5

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.dt > 1:
            raise ConfigurationError("dt must not exceed 1 for the exponential schemes")
        if self.t_end < 0:
            raise ConfigurationError("t_end must be nonnegative")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be a positive integer")
        if self.nonlinear_method not in ("fast", "direct"):
            raise ConfigurationError("nonlinear_method must be 'fast' or 'direct'")
        if not self.cutoff > 0:
            raise ConfigurationError("cutoff must be positive")

    @property
    def n_steps(self):
        return int(math.ceil(self.t_end / self.dt - 1e-9))

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class TrajectoryRecord:
    """Recorded times, norm reports, snapshots and the energy ledger.

    ``energy[i]`` is ``||u(t_i)||^2``; ``dissipated[i]`` is the trapezoidal
    value of ``2 int_0^{t_i} ||grad u||^2`` built from ``rates[i] = 2 ||grad u||^2``;
    ``curvature[i]`` is
    ``8 sum |k|^6 |u_k|^2``, the second time derivative of the dissipation
    rate under pure viscous decay, used for the quadrature error bound.
    """

    config: GalerkinConfig
    real_symmetric: bool
    times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    dissipated: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    curvature: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    final: SpectralField = None
    steps_taken: int = 0

    @property
    def initial_energy(self):
        return self.energy[0] if self.energy else 0.0

    def max_phi2(self):
        return max(r.phi2 for r in self.reports) if self.reports else 0.0

    def snapshot_near(self, t):
        if not self.snapshots:
            raise KeyError("no snapshots recorded")
        key = min(self.snapshots, key=lambda s: abs(s - t))
        return key, self.snapshots[key]

    def write_csv(self, path):
        from .norms import NORM_CSV_COLUMNS
        cols = NORM_CSV_COLUMNS + ("energy", "dissipated")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for rep, e, d in zip(self.reports, self.energy, self.dissipated):
                fh.write(rep.to_csv_row() + f",{float(e)!r},{float(d)!r}\n")


class _Stepper:
    """Cached per-run linear factors and the nonlinear operator."""

    def __init__(self, cutoff, config):
        self.config = config
        probe = SpectralField.zeros(cutoff)
        self.mask = probe.mask
        lam = probe.k2grid.astype(float)
        if not config.dissipation:
            lam = np.zeros_like(lam)
        self.lam = lam
        self._factors = {}

    def factors(self, dt):
        f = self._factors.get(dt)
        if f is None:
            lam = self.lam
            e = np.exp(-lam * dt)
            e2 = np.exp(-lam * dt / 2)
            # (1 - e^{-lam dt}) / lam, with the lam -> 0 limit dt
            with np.errstate(divide="ignore", invalid="ignore"):
                phi = np.where(lam > 0, -np.expm1(-lam * dt) / np.where(lam > 0, lam, 1), dt)
            f = (e[..., None], e2[..., None], phi[..., None])
            self._factors[dt] = f
        return f

    def nonlinear(self, u):
        if not self.config.nonlinear_enabled:
            return np.zeros_like(u.coeffs)
        if self.config.nonlinear_method == "direct":
            return nonlinear_term_direct(u, u.cutoff).coeffs
        return nonlinear_term_fast(u, u.cutoff).coeffs

    def advance(self, u, dt):
        if dt == 0:
            return u
        e, e2, phi = self.factors(dt)
        c = u.coeffs
        if self.config.scheme == "exponential-euler":
            new = e * c + phi * self.nonlinear(u)
        else:
            k1 = self.nonlinear(u)
            k2 = self.nonlinear(u.replace(e2 * (c + 0.5 * dt * k1)))
            k3 = self.nonlinear(u.replace(e2 * c + 0.5 * dt * k2))
            k4 = self.nonlinear(u.replace(e * c + dt * e2 * k3))
            new = e * c + (dt / 6.0) * (e * k1 + 2.0 * e2 * (k2 + k3) + k4)
        return u.replace(new)


def step(u, dt, config):
    """Advance ``u`` by one step of length ``dt`` with ``config.scheme``."""
    if dt < 0:
        raise ConfigurationError("dt must be nonnegative")
    new = _Stepper(u.cutoff, config).advance(u, dt)
    if not np.all(np.isfinite(new.coeffs)):
        raise IntegrationError("non-finite coefficients after step", step_index=0)
    return new


def _energy_terms(u):
    l2, h1, h3 = (sobolev_norm(u, s) for s in (0.0, 1.0, 3.0))
    # products rather than ** so that overflow saturates to inf
    return l2 * l2, 2.0 * h1 * h1, 8.0 * h3 * h3


def simulate(initial, config, on_record=None):
    """Integrate from ``t = 0`` to ``config.t_end``.

    Norm reports and the energy ledger are recorded at ``t = 0``, every
    ``record_every`` steps and at the final time; ``on_record(u, t)`` is
    called at each of those points.  On non-finite coefficients an
    :class:`IntegrationError` is raised carrying the partial trajectory.
    """
    if initial.cutoff > config.cutoff * (1 + 1e-12):
        raise ConfigurationError(
            f"initial field cutoff {initial.cutoff} exceeds configured cutoff {config.cutoff}")
    if initial.cutoff != config.cutoff:
        initial = _regrid(initial, config.cutoff)
    stepper = _Stepper(config.cutoff, config)
    tr = TrajectoryRecord(config=config, real_symmetric=initial.real_symmetric)
    K_min = config.tail_K_min if config.tail_K_min is not None else config.cutoff / 2
    k0 = config.tail_k0 if config.tail_k0 is not None else config.cutoff / 2
    n_steps = config.n_steps
    snap_steps = {}
    for ts in config.snapshot_times:
        snap_steps.setdefault(min(n_steps, max(0, int(round(ts / config.dt)))), ts)

    def record(u, t, i):
        e, d, curv = _energy_terms(u)
        if tr.times:
            h = t - tr.times[-1]
            tr.dissipated.append(tr.dissipated[-1] + 0.5 * h * (tr.rates[-1] + d))
        else:
            tr.dissipated.append(0.0)
        tr.rates.append(d)
        tr.times.append(t)
        tr.energy.append(e)
        tr.curvature.append(curv)
        tr.reports.append(norm_report(u, t, K_min=K_min, k0=k0))
        if on_record is not None:
            on_record(u, t)

    u = initial
    record(u, 0.0, 0)
    if 0 in snap_steps:
        tr.snapshots[0.0] = u
    warned = False
    for i in range(1, n_steps + 1):
        t_prev = (i - 1) * config.dt
        t = min(i * config.dt, config.t_end)
        h = t - t_prev
        if config.nonlinear_enabled and not warned:
            cfl = h * phi_norm(u, 1.0)
            if cfl > config.cfl_limit:
                warnings.warn(f"dt * ||u||_Phi(1) = {cfl:.3g} exceeds {config.cfl_limit}",
                              RuntimeWarning, stacklevel=2)
                warned = True
        try:
            with np.errstate(over="raise", invalid="raise"):
                new = stepper.advance(u, h)
        except FloatingPointError:
            new = None
        if new is None or not np.all(np.isfinite(new.coeffs)):
            tr.final = u
            tr.steps_taken = i - 1
            raise IntegrationError(f"non-finite coefficients at step {i}", step_index=i,
                                   trajectory=tr)
        u = new
        if i % config.record_every == 0 or i == n_steps:
            record(u, t, i)
        if i in snap_steps:
            tr.snapshots[t] = u
    tr.final = u
    tr.steps_taken = n_steps
    return tr


def _regrid(u, cutoff):
    """Embed ``u`` into the box of a larger cutoff."""
    from .lattice import ball
    n_new = ball(float(cutoff))[0]
    pad = n_new - u.n
    data = np.pad(u.coeffs, ((pad, pad),) * 3 + ((0, 0),))
    data[~ball(float(cutoff))[3]] = 0
    return SpectralField(cutoff, data, u.real_symmetric, check=False)


@dataclass(frozen=True)
class EnergyReport:
    """Energy-identity residuals ``||u||^2 + 2 int ||grad u||^2 - ||psi||^2``.

    ``tolerance`` is the per-time quadrature error estimate; the inequality
    is deemed satisfied when every residual stays below it.
    """

    residuals: tuple
    tolerance: tuple
    max_identity_residual: float
    inequality_satisfied: bool
    real_data: bool
    note: str = ""


def energy_report(tr, safety=1.0):
    """Check the energy identity of a recorded trajectory.

    The trapezoidal error on ``[t_i, t_{i+1}]`` is bounded by
    ``h^3 / 12 * max(f''(t_i), f''(t_{i+1}))`` with ``f''`` taken from the
    recorded curvature of the dissipation rate; ``safety`` scales the
    accumulated bound.
    """
    e = np.asarray(tr.energy)
    d = np.asarray(tr.dissipated)
    if e.size == 0:
        return EnergyReport((), (), 0.0, True, tr.real_symmetric)
    res = e + d - e[0]
    times = np.asarray(tr.times)
    curv = np.asarray(tr.curvature)
    err = np.zeros_like(res)
    if e.size >= 2:
        h = np.diff(times)
        local = h ** 3 / 12.0 * np.maximum(curv[:-1], curv[1:])
        err[1:] = np.cumsum(local)
    tol = safety * err + 1e-13 * max(e[0], 1e-300)
    ok = bool(np.all(res <= tol))
    note = "" if tr.real_symmetric else "energy inequality presumes real-valued data"
    return EnergyReport(
        residuals=tuple(res.tolist()),
        tolerance=tuple(tol.tolist()),
        max_identity_residual=float(np.max(np.abs(res))),
        inequality_satisfied=ok,
        real_data=tr.real_symmetric,
        note=note,
    )
