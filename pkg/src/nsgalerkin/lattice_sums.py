"""Lattice-shell sums and empirical comparison constants.

Sums of ``|a|^{-p}`` over integer points of annuli and tails are taken
shell by shell from exact representation counts ``r3(n)`` (number of
``a in Z^3`` with ``|a|^2 = n``).  Infinite tails are enumerated up to a
budget radius and closed with the analytic remainder
``int_{|x| > R} |x|^{-p} dx = 4 pi R^{3-p} / (p - 3)``.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .errors import DomainError, ResourceError
from .lattice import le_radius, max_sq, min_sq
from .norms import sobolev_norm

__all__ = [
    "MAX_ENUM_RADIUS",
    "BUDGET_RADIUS",
    "shell_counts",
    "power_sum",
    "ComparisonConstant",
    "comparison_constant",
    "coeff_sum_constant",
    "EmpiricalConstants",
    "empirical_constants",
    "CoeffSumCheck",
    "coeff_sum_bound_check",
    "tail_scaled",
]

MAX_ENUM_RADIUS = 512
BUDGET_RADIUS = 64
SUPPORTED_EXPONENTS = (1, 2, 4)


@lru_cache(maxsize=8)
def _counts(n_max):
    r = math.isqrt(n_max)
    x = np.arange(-r, r + 1)
    c2 = np.bincount((x[:, None] ** 2 + x[None, :] ** 2).ravel(), minlength=n_max + 1)[: n_max + 1]
    c3 = np.zeros(n_max + 1, dtype=np.int64)
    for z in x:
        z2 = int(z * z)
        c3[z2:] += c2[: n_max + 1 - z2]
    c3.setflags(write=False)
    return c3


def shell_counts(n_max):
    """Array ``c`` with ``c[n] = #{a in Z^3 : |a|^2 = n}`` for ``0 <= n <= n_max``."""
    n_max = int(n_max)
    if n_max < 0:
        raise DomainError("n_max must be nonnegative")
    if n_max > MAX_ENUM_RADIUS ** 2:
        raise ResourceError(f"shell enumeration beyond radius {MAX_ENUM_RADIUS} requested")
    # share one cached table for small requests
    return _counts(max(n_max, 64 * 64))[: n_max + 1]


def _shell_terms(p, n_lo, n_hi):
    c = shell_counts(n_hi)
    n = np.arange(n_lo, n_hi + 1)
    cnt = c[n_lo:]
    nz = cnt > 0
    return np.sum(cnt[nz] / n[nz].astype(float) ** (0.5 * p))


def power_sum(p, r_min, r_max, lower_inclusive=True, budget_radius=BUDGET_RADIUS):
    """Sum of ``|a|^{-p}`` over lattice points with ``r_min <= |a| <= r_max``.

    ``r_max = inf`` (allowed for ``p > 3``) enumerates up to ``budget_radius``
    and adds the analytic remainder.  With ``lower_inclusive=False`` the shell
    at ``|a| = r_min`` is excluded.
    """
    if not 1 <= r_min <= r_max:
        raise DomainError(f"need 1 <= r_min <= r_max, got {r_min}, {r_max}")
    n_lo = min_sq(r_min) if lower_inclusive else max_sq(r_min) + 1
    if math.isinf(r_max):
        if p <= 3:
            raise DomainError(f"tail sum of |a|^-{p} diverges")
        if budget_radius > MAX_ENUM_RADIUS:
            raise ResourceError(f"budget radius {budget_radius} exceeds {MAX_ENUM_RADIUS}")
        n_hi = max_sq(budget_radius)
        remainder = 4 * math.pi * budget_radius ** (3 - p) / (p - 3)
        if n_lo > n_hi:
            # lower bound already beyond the budget: purely analytic
            return 4 * math.pi * r_min ** (3 - p) / (p - 3)
        return float(_shell_terms(p, n_lo, n_hi) + remainder)
    if r_max > MAX_ENUM_RADIUS:
        raise ResourceError(f"r_max = {r_max} exceeds the enumeration budget {MAX_ENUM_RADIUS}")
    n_hi = max_sq(r_max)
    if n_lo > n_hi:
        return 0.0
    return float(_shell_terms(p, n_lo, n_hi))


def _integral(p, r):
    if p == 2:
        return 4 * math.pi * (r - 1)
    if p == 1:
        return 2 * math.pi * (r * r - 1)
    if p == 4:
        return 4 * math.pi / r
    raise DomainError(f"unsupported exponent p = {p}; supported {SUPPORTED_EXPONENTS}")


@dataclass(frozen=True)
class ComparisonConstant:
    """Lattice sum against its continuum integral at the worst swept radius.

    ``kind`` is ``"annulus"`` (``1 <= |a| <= radius``) or ``"tail"``
    (``|a| >= radius``).  ``lattice_sum``, ``integral_value`` and ``ratio`` refer
    to ``radius``, the argmax of the ratio over shell radii in
    ``[2, r_max]``.
    """

    p: int
    kind: str
    radius: float
    r_max: float
    lattice_sum: float
    integral_value: float
    ratio: float

    @property
    def range(self):
        if self.kind == "tail":
            return f"|a|>={self.radius:.6g}"
        return f"1<=|a|<={self.radius:.6g}"


def tail_scaled(K, budget_radius=BUDGET_RADIUS):
    """``K * sum_{|a| >= K} |a|^{-4}``, the constant of the ``c/|k|`` tail bound."""
    return K * power_sum(4, K, math.inf, budget_radius=budget_radius)


@lru_cache(maxsize=32)
def comparison_constant(p, r_max, budget_radius=BUDGET_RADIUS):
    """Empirical constant for ``sum |a|^{-p} <= C * integral``.

    The ratio lattice/integral is piecewise monotone between shells, so its
    supremum over ``r in [2, r_max]`` is attained on a shell radius
    ``sqrt(n)``; all nonempty shells in range are swept.
    """
    if p not in SUPPORTED_EXPONENTS:
        raise DomainError(f"unsupported exponent p = {p}; supported {SUPPORTED_EXPONENTS}")
    if r_max < 2:
        raise DomainError("r_max must be at least 2")
    n_hi = max_sq(r_max)
    if p == 4:
        if r_max > budget_radius:
            raise DomainError("tail sweep must stay within the budget radius")
        n_b = max_sq(budget_radius)
        c = shell_counts(n_b)
        n = np.arange(n_b + 1, dtype=float)
        terms = np.zeros(n_b + 1)
        terms[1:] = c[1:] / n[1:] ** 2
        remainder = 4 * math.pi / budget_radius
        # tail[n] = sum over shells m >= n, plus the analytic remainder
        tail = np.cumsum(terms[::-1])[::-1] + remainder
        shells = np.arange(4, n_hi + 1)
        shells = shells[c[shells] > 0]
        radii = np.sqrt(shells.astype(float))
        lattice = tail[shells]
    else:
        c = shell_counts(n_hi)
        n = np.arange(n_hi + 1, dtype=float)
        terms = np.zeros(n_hi + 1)
        terms[1:] = c[1:] / n[1:] ** (0.5 * p)
        partial = np.cumsum(terms)
        shells = np.arange(4, n_hi + 1)
        shells = shells[c[shells] > 0]
        radii = np.sqrt(shells.astype(float))
        lattice = partial[shells]
    integrals = np.array([_integral(p, r) for r in radii])
    ratios = lattice / integrals
    i = int(np.argmax(ratios))
    return ComparisonConstant(
        p=p,
        kind="tail" if p == 4 else "annulus",
        radius=float(radii[i]),
        r_max=float(r_max),
        lattice_sum=float(lattice[i]),
        integral_value=float(integrals[i]),
        ratio=float(ratios[i]),
    )


@lru_cache(maxsize=8)
def coeff_sum_constant(r_max=32):
    """Universal ``c`` with ``sum_{0<|a|<=r} |u_a| <= c ||u||_{H^1/2} r``.

    By Cauchy-Schwarz the left side is at most
    ``||u||_{H^1/2} (sum_{0<|a|<=r} 1/|a|)^{1/2}``, so ``c`` must dominate
    ``sqrt(S1(r)) / r``.  For ``r >= 2`` this follows from the p=1 comparison
    ratio, ``S1(r) <= ratio * 2 pi (r^2 - 1)``; shells in ``[1, 2)`` are
    checked directly.
    """
    cc = comparison_constant(1, r_max)
    c = shell_counts(3)
    s1 = 0.0
    direct = 0.0
    for n in range(1, 4):
        s1 += c[n] / math.sqrt(n)
        if c[n]:
            direct = max(direct, math.sqrt(s1) / math.sqrt(n))
    return max(math.sqrt(2 * math.pi * cc.ratio), direct)


@dataclass(frozen=True)
class EmpiricalConstants:
    """Constants table shared by every bound check in a run."""

    r_max: float
    annulus_p2: ComparisonConstant
    tail_p4: ComparisonConstant
    annulus_p1: ComparisonConstant
    c_coeff_sum: float

    @property
    def C(self):
        """Maximum of the p=2 annulus and p=4 tail ratios."""
        return max(self.annulus_p2.ratio, self.tail_p4.ratio)

    def rows(self):
        out = []
        for cc in (self.annulus_p2, self.tail_p4, self.annulus_p1):
            out.append((cc.p, cc.range, cc.lattice_sum, cc.integral_value, cc.ratio))
        return out


@lru_cache(maxsize=8)
def empirical_constants(r_max=32):
    return EmpiricalConstants(
        r_max=float(r_max),
        annulus_p2=comparison_constant(2, r_max),
        tail_p4=comparison_constant(4, r_max),
        annulus_p1=comparison_constant(1, r_max),
        c_coeff_sum=coeff_sum_constant(r_max),
    )


@dataclass(frozen=True)
class CoeffSumCheck:
    lhs: float
    rhs: float
    c_required: float
    M: float


def coeff_sum_bound_check(u, r):
    """Evaluate both sides of ``sum_{0<|a|<=r} |u_a| <= c M^{1/2} r``.

    ``M`` is the squared H^{1/2} norm of the whole field; ``c_required`` is the
    smallest ``c`` for which the inequality holds on this field.
    """
    if r < 1:
        raise DomainError("r must be at least 1")
    sel = le_radius(u.k2grid[u.mask], r)
    lhs = float(np.sum(u.magnitudes[sel]))
    M = sobolev_norm(u, 0.5) ** 2
    rhs = math.sqrt(M) * r
    if rhs == 0:
        c_req = 0.0 if lhs == 0 else math.inf
    else:
        c_req = lhs / rhs
    return CoeffSumCheck(lhs=lhs, rhs=rhs, c_required=c_req, M=M)

