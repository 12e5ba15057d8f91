"""Norms and tail functionals on Fourier coefficients.

All quantities are computed over the stored modes of a field; the
truncation error of the cutoff is not accounted for here.
"""
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import DomainError
from .lattice import ge_radius

__all__ = [
    "phi_norm",
    "sobolev_norm",
    "tail_phi_sup",
    "tail_enstrophy_half",
    "argmax_phi",
    "NormReport",
    "norm_report",
    "NORM_CSV_COLUMNS",
]


def _mode_data(u):
    k2 = u.k2grid[u.mask].astype(float)
    return k2, u.magnitudes


def phi_norm(u, alpha):
    """``sup_k |k|^alpha |u_k|``; zero for a field with no stored modes."""
    return tail_phi_sup(u, alpha, 0.0)


def argmax_phi(u, alpha, K_min=0.0):
    """Wave vector attaining :func:`tail_phi_sup` (first in mode order).

    None when the tail carries no nonzero coefficient.
    """
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    k2, mag = _mode_data(u)
    sel = ge_radius(u.k2grid[u.mask], K_min)
    if not np.any(sel):
        return None
    weighted = np.where(sel, k2 ** (0.5 * alpha) * mag, -1.0)
    i = int(np.argmax(weighted))
    if weighted[i] <= 0:
        return None
    return tuple(int(x) for x in u.wavevectors[i])


def sobolev_norm(u, s):
    """``(sum_k |k|^{2s} |u_k|^2)^{1/2}``.

    ``s = 0`` is the L2 norm, ``s = 1/2`` the H^{1/2} norm whose square is the
    quantity ``M`` of the coefficient-sum estimate, ``s = 1`` the enstrophy.
    """
    if s < 0:
        raise DomainError("s must be nonnegative")
    k2, mag = _mode_data(u)
    return _scaled_l2(k2 ** (0.5 * s) * mag)


def _scaled_l2(w):
    # scale by the largest entry so that huge finite coefficients do not overflow
    m = float(np.max(w)) if w.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return m
    return m * float(np.sqrt(np.sum((w / m) ** 2)))


def tail_phi_sup(u, alpha, K_min):
    """``sup_{|k| >= K_min} |k|^alpha |u_k|`` (0 if no stored mode qualifies)."""
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    if K_min < 0:
        raise DomainError("K_min must be nonnegative")
    k2, mag = _mode_data(u)
    sel = ge_radius(u.k2grid[u.mask], K_min)
    if not np.any(sel):
        return 0.0
    return float(np.max(k2[sel] ** (0.5 * alpha) * mag[sel]))


def tail_enstrophy_half(u, k0):
    """``sum_{|a| >= k0} |a| |u_a|^2``, the small-gap functional."""
    if k0 < 0:
        raise DomainError("k0 must be nonnegative")
    k2, mag = _mode_data(u)
    sel = ge_radius(u.k2grid[u.mask], k0)
    r = _scaled_l2(k2[sel] ** 0.25 * mag[sel])
    return r * r  # saturates to inf instead of raising


@dataclass(frozen=True)
class NormReport:
    """Snapshot of every monitored norm at one time."""

    time: float
    phi2: float
    l2: float
    h_half: float
    h1: float
    tail_phi: float
    tail_K_min: float
    tail_enstrophy: float
    tail_k0: float

    def as_row(self):
        return astuple(self)

    def to_csv_row(self):
        return ",".join(repr(float(x)) for x in astuple(self))

    @classmethod
    def from_csv_row(cls, row):
        vals = [float(x) for x in (row.split(",") if isinstance(row, str) else row)]
        return cls(*vals)


NORM_CSV_COLUMNS = tuple(f.name for f in fields(NormReport))


def norm_report(u, time=0.0, K_min=None, k0=None):
    """Evaluate all monitored norms; tails default to half the cutoff."""
    K_min = u.cutoff / 2 if K_min is None else K_min
    k0 = u.cutoff / 2 if k0 is None else k0
    return NormReport(
        time=float(time),
        phi2=phi_norm(u, 2.0),
        l2=sobolev_norm(u, 0.0),
        h_half=sobolev_norm(u, 0.5),
        h1=sobolev_norm(u, 1.0),
        tail_phi=tail_phi_sup(u, 2.0, K_min),
        tail_K_min=float(K_min),
        tail_enstrophy=tail_enstrophy_half(u, k0),
        tail_k0=float(k0),
    )
