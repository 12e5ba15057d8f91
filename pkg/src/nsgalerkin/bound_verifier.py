"""Convolution-splitting majorants, bootstrap ladders and Duhamel envelopes.

The decay arguments bound the scalar surrogate

    S(k) = sum_alpha w(alpha, k) |u_alpha| |u_{k - alpha}|

region by region, with weight ``|alpha|`` except in the far tail
``|alpha| > 2|k|`` where the first two schemes use ``|k|``.  This module
evaluates every region exactly over the support of a field and puts each
value next to the bound claimed for it.

Three schemes are implemented:

``T2``
    small-data splitting (three regions, each claimed ``<= 4 C eps^2``);
``T1``
    bootstrap splitting at rung ``n`` (seven regions summing to
    ``27 C eps^{2 mu_n}``);
``T4``
    H^{1/2} splitting at rung ``n`` (three regions with claims
    ``4 L0 |k|^{gamma_{n+1}}``, ``c sqrt(L0) D_n`` and ``sqrt(2) L0``).

Region boundaries are closed as written; a boundary shell shared by two
regions is assigned to the one listed first.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, PreconditionError
from .lattice import ge_radius, gt_radius, le_radius, points_in_ball
from .norms import tail_phi_sup

__all__ = [
    "ModeSet",
    "DecayHypothesis",
    "DecayWitness",
    "check_decay_hypothesis",
    "T2Params",
    "T1Params",
    "T4Params",
    "RegionValue",
    "SplitBreakdown",
    "split_majorant",
    "mu_sequence",
    "BootstrapSchedule",
    "build_schedule",
    "DSequence",
    "d_sequence",
    "duhamel_envelope",
    "profile_modes",
    "inductive_hypothesis_modes",
]

_OFFSET = 1 << 20
_SHIFT = 21


def _encode(vecs):
    v = np.asarray(vecs, dtype=np.int64) + _OFFSET
    return (v[:, 0] << (2 * _SHIFT)) | (v[:, 1] << _SHIFT) | v[:, 2]


class ModeSet:
    """Sparse support with coefficient magnitudes, for majorant sums.

    Wave vectors must be nonzero with components below ``2**20`` in absolute
    value; duplicates are rejected.
    """

    def __init__(self, vectors, magnitudes):
        vectors = np.asarray(vectors, dtype=np.int64).reshape(-1, 3)
        magnitudes = np.asarray(magnitudes, dtype=float).reshape(-1)
        if vectors.shape[0] != magnitudes.shape[0]:
            raise DomainError("vectors and magnitudes differ in length")
        if np.any(np.abs(vectors) >= _OFFSET):
            raise DomainError(f"wave-vector components must be below {_OFFSET} in magnitude")
        if np.any(np.all(vectors == 0, axis=1)):
            raise DomainError("the zero mode is not allowed")
        if np.any(magnitudes < 0) or not np.all(np.isfinite(magnitudes)):
            raise DomainError("magnitudes must be finite and nonnegative")
        keys = _encode(vectors)
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if np.any(keys[1:] == keys[:-1]):
            raise DomainError("duplicate wave vectors")
        self.vectors = vectors[order]
        self.magnitudes = magnitudes[order]
        self.norm2 = np.einsum("pi,pi->p", self.vectors, self.vectors)
        self._keys = keys

    @classmethod
    def from_field(cls, u):
        """Nonzero modes of a :class:`SpectralField` with their ``|u_k|``."""
        mag = u.magnitudes
        nz = mag > 0
        return cls(u.wavevectors[nz], mag[nz])

    def __len__(self):
        return self.vectors.shape[0]

    def lookup(self, vectors):
        """Magnitudes at ``vectors`` (0 where absent) and a presence mask."""
        vectors = np.asarray(vectors, dtype=np.int64).reshape(-1, 3)
        ok = np.all(np.abs(vectors) < _OFFSET, axis=1)
        out = np.zeros(vectors.shape[0])
        found = np.zeros(vectors.shape[0], dtype=bool)
        if not len(self) or not np.any(ok):
            return out, found
        q = _encode(np.where(ok[:, None], vectors, 0))
        idx = np.searchsorted(self._keys, q)
        idx = np.minimum(idx, len(self._keys) - 1)
        found = ok & (self._keys[idx] == q)
        out[found] = self.magnitudes[idx[found]]
        return out, found

    def pairs(self, k):
        """All support points ``alpha`` whose partner ``k - alpha`` is stored.

        Returns ``(alpha, |alpha|^2, |k-alpha|^2, |u_alpha|, |u_{k-alpha}|)``
        in key order of ``alpha``.
        """
        k = np.asarray(k, dtype=np.int64)
        partner = k[None, :] - self.vectors
        mb, found = self.lookup(partner)
        nb2 = np.einsum("pi,pi->p", partner, partner)
        return (self.vectors[found], self.norm2[found], nb2[found],
                self.magnitudes[found], mb[found])


def _as_modes(u):
    if isinstance(u, ModeSet):
        return u
    return ModeSet.from_field(u)


# decay hypothesis --------------------------------------------------------------

@dataclass(frozen=True)
class DecayHypothesis:
    """Claimed bound ``|u_k| <= epsilon / |k|^alpha`` for ``|k| >= K_min``."""

    epsilon: float
    alpha: float = 2.0
    K_min: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")

    def satisfied_by(self, u):
        return tail_phi_sup(u, self.alpha, self.K_min) <= self.epsilon


@dataclass(frozen=True)
class DecayWitness:
    passed: bool
    wavevector: tuple = None
    value: float = 0.0
    excess: float = 0.0


def check_decay_hypothesis(u, h):
    """Pass/fail of ``h`` on ``u``; on failure the first violating mode in
    lexicographic order together with ``|k|^alpha |u_k| - epsilon``."""
    k2 = u.k2grid[u.mask]
    sel = ge_radius(k2, h.K_min)
    weighted = k2.astype(float) ** (0.5 * h.alpha) * u.magnitudes
    bad = np.flatnonzero(sel & (weighted > h.epsilon))
    if bad.size == 0:
        return DecayWitness(True)
    i = int(bad[0])
    k = tuple(int(x) for x in u.wavevectors[i])
    return DecayWitness(False, k, float(weighted[i]), float(weighted[i] - h.epsilon))


# sequences and schedules ---------------------------------------------------------

def mu_sequence(n):
    """Exponent ladder ``mu_0 = 1, mu_1 = 2, mu_{m+1} = 2 mu_m - 1``."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 1
    mu = 2
    for _ in range(1, n):
        mu = 2 * mu - 1
    return mu


@dataclass
class BootstrapSchedule:
    """Bootstrap ladders ``t_n``, ``k_n``, ``mu_n``, ``gamma_n`` for ``n = 0..n_max+1``.

    ``k[n]`` is ``k0 / epsilon^(2^n)``; ``log_k`` holds natural logs so that
    ladders beyond double range stay inspectable.
    """

    rho: float
    epsilon: float
    k_minus1: float
    D: float
    k0: float
    n_max: int
    n_max_requested: int
    truncated: bool
    t: np.ndarray
    k: np.ndarray
    log_k: np.ndarray
    mu: list
    gamma: np.ndarray
    choice_ok: bool
    mu_ratio_ok: bool
    exp_estimate_first_failure: int = None
    margin: float = 1e-6

    @property
    def exp_estimate_ok(self):
        return self.exp_estimate_first_failure is None

    def first_rung_beyond(self, cutoff):
        """First ``n`` whose ``k_n`` exceeds ``cutoff`` (``None`` if all fit)."""
        beyond = np.flatnonzero(self.log_k > math.log(cutoff))
        return int(beyond[0]) if beyond.size else None


def _exp_estimate_holds(rho, epsilon, k_minus1, n):
    # exp(-rho r^2 / 2^{n+1}) < eps^{2^n} at r = k_{-1} / eps^{2^n}, in logs
    log_eps = math.log(epsilon)
    log_r = math.log(k_minus1) - (2.0 ** n) * log_eps
    lhs = math.log(rho) + 2 * log_r - (n + 1) * math.log(2)
    rhs = n * math.log(2) + math.log(-log_eps)
    return lhs > rhs


def build_schedule(rho, epsilon, k_minus1, D, n_max, margin=1e-6):
    """Materialise the bootstrap ladders and check their standing conditions.

    ``k0 = k_minus1 * D / epsilon * (1 + margin)`` is the smallest admissible
    choice for ``(k_minus1 / k0) D < epsilon``.  Reports whether the exponent
    ratio bound ``1/2 < mu_n / 2^n < 1`` holds for ``2 <= n <= n_max`` and the first
    ``n`` at which the exponential-smallness condition fails, if any.  Ladders
    that would overflow double precision truncate ``n_max``.
    """
    if not 0 < epsilon < 1 / 3:
        raise DomainError(f"epsilon must lie in (0, 1/3), got {epsilon}")
    if not rho > 0:
        raise DomainError("rho must be positive")
    if not k_minus1 > 0 or not D > 0:
        raise DomainError("k_minus1 and D must be positive")
    if n_max < 0:
        raise DomainError("n_max must be nonnegative")
    k0 = k_minus1 * D / epsilon * (1 + margin)
    log_eps = math.log(epsilon)
    limit = math.log(np.finfo(float).max) - 1
    n_eff = n_max
    while n_eff >= 0 and math.log(k0) - (2.0 ** (n_eff + 1)) * log_eps > limit:
        n_eff -= 1
    truncated = n_eff < n_max
    n_eff = max(n_eff, 0)
    idx = np.arange(n_eff + 2)
    log_k = math.log(k0) - (2.0 ** idx) * log_eps
    k = np.exp(np.minimum(log_k, limit))
    mu = [mu_sequence(int(i)) for i in idx]
    mu_ok = all(0.5 < mu[i] / 2 ** i < 1 for i in range(2, n_eff + 1))
    choice_ok = (k_minus1 / k0) * D < epsilon < 0.5
    first_fail = None
    for i in range(n_eff + 1):
        if not _exp_estimate_holds(rho, epsilon, k_minus1, i):
            first_fail = i
            break
    return BootstrapSchedule(
        rho=rho, epsilon=epsilon, k_minus1=k_minus1, D=D, k0=k0,
        n_max=n_eff, n_max_requested=n_max, truncated=truncated,
        t=rho - rho / 2.0 ** idx, k=k, log_k=log_k, mu=mu,
        gamma=1.0 / 2.0 ** idx, choice_ok=choice_ok, mu_ratio_ok=mu_ok,
        exp_estimate_first_failure=first_fail, margin=margin,
    )


@dataclass
class DSequence:
    """Iterates of ``D_{n+1} = q D_n + (4 + sqrt 2) L0`` from ``D_0 = 2 L0``."""

    L0: float
    c: float
    q: float
    values: np.ndarray
    limit: float = None
    diverges: bool = False

    def closed_form(self, n):
        """Geometric closed form; only defined when ``q != 1``."""
        b = (4 + math.sqrt(2)) * self.L0
        fixed = b / (1 - self.q)
        return fixed + self.q ** n * (2 * self.L0 - fixed)


def d_sequence(n_max, L0, c):
    if not L0 > 0:
        raise DomainError("L0 must be positive")
    if c < 1:
        raise DomainError("c must be at least 1")
    q = 2 * c * math.sqrt(L0)
    b = (4 + math.sqrt(2)) * L0
    vals = np.empty(n_max + 1)
    vals[0] = 2 * L0
    for i in range(n_max):
        vals[i + 1] = q * vals[i] + b
    if q < 1:
        return DSequence(L0, c, q, vals, limit=b / (1 - q), diverges=False)
    return DSequence(L0, c, q, vals, limit=None, diverges=True)


def duhamel_envelope(A, B, k, dt):
    """``A exp(-|k|^2 dt) + (B / |k|^2)(1 - exp(-|k|^2 dt))``."""
    if A < 0 or B < 0 or dt < 0:
        raise DomainError("A, B and dt must be nonnegative")
    lam = float(np.dot(k, k))
    if lam == 0:
        raise DomainError("k must be nonzero")
    decay = math.exp(-lam * dt)
    return A * decay + (B / lam) * (-math.expm1(-lam * dt))


# splitting schemes ----------------------------------------------------------------

@dataclass(frozen=True)
class T2Params:
    epsilon: float
    C: float


@dataclass(frozen=True)
class T1Params:
    schedule: BootstrapSchedule
    n: int
    C: float


@dataclass(frozen=True)
class T4Params:
    L0: float
    c: float
    D_n: float
    n: int
    K0: float


@dataclass(frozen=True)
class RegionValue:
    name: str
    computed: float
    claimed: float
    count: int

    @property
    def margin(self):
        return self.claimed - self.computed

    @property
    def ok(self):
        return self.computed <= self.claimed


@dataclass
class SplitBreakdown:
    """Per-region majorant values for one target mode.

    ``claimed_total`` is the bound asserted for the whole sum: ``12 C eps^2``
    for T2, ``eps^{mu_{n+1}} / 2`` for T1 and the sum of region claims for T4.
    """

    scheme: str
    k: tuple
    regions: tuple
    total: float
    claimed_total: float
    params: dict
    members: dict = field(default=None, repr=False)

    @property
    def sum_of_claims(self):
        return float(sum(r.claimed for r in self.regions))

    @property
    def ok(self):
        return self.total <= self.claimed_total

    def region(self, name):
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(name)


def _assign(conditions, n_pairs):
    """Priority assignment: each pair goes to the first region whose condition holds."""
    taken = np.zeros(n_pairs, dtype=bool)
    masks = []
    for cond in conditions:
        m = cond & ~taken
        taken |= m
        masks.append(m)
    if not np.all(taken):
        raise AssertionError("regions do not cover the support")
    return masks


def split_majorant(u, k, scheme, params, return_members=False):
    """Evaluate the region-wise majorant of the convolution at target ``k``.

    Parameters
    ----------
    u : SpectralField or ModeSet
        Field whose coefficient magnitudes enter the sums.
    k : sequence of int
        Target wave vector.
    scheme : {"T2", "T1", "T4"}
    params : T2Params, T1Params or T4Params
        Hypothesis parameters matching ``scheme``.
    return_members : bool
        Attach the ``alpha`` vectors of each region.
    """
    modes = _as_modes(u)
    k = tuple(int(x) for x in k)
    nk2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    if nk2 == 0:
        raise DomainError("target wave vector must be nonzero")
    nk = math.sqrt(nk2)
    alpha, na2, nb2, ma, mb = modes.pairs(k)
    na = np.sqrt(na2.astype(float))
    prod = ma * mb
    near = na2 <= 4 * nk2  # |alpha| <= 2|k|
    far = ~near

    if scheme == "T2":
        if not isinstance(params, T2Params):
            raise DomainError("T2 requires T2Params")
        names = ("I", "II", "III")
        conds = [near & (4 * nb2 <= nk2), near & (4 * nb2 > nk2), far]
        weights = [na, na, np.full_like(na, nk)]
        bound = 4 * params.C * params.epsilon ** 2
        claims = [bound, bound, bound]
        claimed_total = 12 * params.C * params.epsilon ** 2
        info = {"epsilon": params.epsilon, "C": params.C}
    elif scheme == "T1":
        if not isinstance(params, T1Params):
            raise DomainError("T1 requires T1Params")
        s, n = params.schedule, params.n
        if not 0 <= n <= s.n_max:
            raise DomainError(f"rung n = {n} outside schedule range 0..{s.n_max}")
        k_next = s.k[n + 1]
        if nk < k_next * (1 - 1e-12):
            raise PreconditionError(f"|k| = {nk:.6g} below k_{n + 1} = {k_next:.6g}")
        km1, kn = s.k_minus1, s.k[n]
        half = 4 * nb2 >= nk2  # |k - alpha| >= |k|/2
        names = ("I_1", "I_2", "II", "III", "IV_1", "IV_2", "V")
        conds = [
            le_radius(na2, km1) & half,
            ge_radius(na2, km1) & le_radius(na2, kn) & half,
            ge_radius(na2, kn) & near & half,
            near & ge_radius(nb2, kn) & (4 * nb2 <= nk2),
            near & le_radius(nb2, km1),
            near & ge_radius(nb2, km1) & le_radius(nb2, kn),
            far,
        ]
        weights = [na, na, na, na, na, na, np.full_like(na, nk)]
        unit = params.C * s.epsilon ** (2 * s.mu[n])
        claims = [2 * unit, 2 * unit, 16 * unit, 2 * unit, unit, 2 * unit, 2 * unit]
        claimed_total = 0.5 * s.epsilon ** s.mu[n + 1]
        info = {"epsilon": s.epsilon, "C": params.C, "n": n, "k_minus1": km1,
                "k_n": kn, "k_n+1": k_next, "mu_n": s.mu[n]}
    elif scheme == "T4":
        if not isinstance(params, T4Params):
            raise DomainError("T4 requires T4Params")
        n = params.n
        if n < 1:
            raise DomainError("T4 rungs start at n = 1")
        threshold = params.K0 * 2 ** (n + 1)
        if nk < threshold * (1 - 1e-12):
            raise PreconditionError(f"|k| = {nk:.6g} below K0 * 2^(n+1) = {threshold:.6g}")
        g_n = 2.0 ** -n
        h = 0.5 * nk ** (1 - g_n)
        names = ("I", "II", "III")
        conds = [near & ge_radius(nb2, h), le_radius(nb2, h), na2 >= 4 * nk2]
        weights = [na, na, na]
        claims = [4 * params.L0 * nk ** (g_n / 2),
                  params.c * math.sqrt(params.L0) * params.D_n,
                  math.sqrt(2) * params.L0]
        claimed_total = float(sum(claims))
        info = {"L0": params.L0, "c": params.c, "D_n": params.D_n, "n": n, "K0": params.K0}
    else:
        raise DomainError(f"unknown scheme {scheme!r}")

    masks = _assign(conds, na.shape[0])
    regions = []
    members = {} if return_members else None
    total = 0.0
    for name, m, w, claim in zip(names, masks, weights, claims):
        val = float(np.sum(w[m] * prod[m]))
        total += val
        regions.append(RegionValue(name, val, float(claim), int(np.count_nonzero(m))))
        if return_members:
            members[name] = alpha[m]
    return SplitBreakdown(scheme=scheme, k=k, regions=tuple(regions), total=total,
                          claimed_total=float(claimed_total), params=info, members=members)


# synthetic supports ---------------------------------------------------------------

def profile_modes(cutoff, epsilon, alpha=2.0):
    """Every mode ``0 < |k| <= cutoff`` at magnitude ``epsilon / |k|^alpha``."""
    vecs = points_in_ball(cutoff)
    n2 = np.einsum("pi,pi->p", vecs, vecs).astype(float)
    return ModeSet(vecs, epsilon / n2 ** (0.5 * alpha))


def hypothesis_bound(schedule, n, n2):
    """Magnitude cap of the rung-``n`` inductive hypothesis at ``|k|^2 = n2``.

    ``D/|k|^2`` below ``k_{-1}``, ``eps^{mu_n}/|k|^2`` from ``k_n`` up, and
    ``eps/|k|^2`` in between; where regimes overlap the smaller cap applies.
    """
    n2 = np.asarray(n2)
    s = schedule
    low = gt_radius(n2, 0) & ~ge_radius(n2, s.k_minus1)
    high = ge_radius(n2, s.k[n])
    coef = np.where(high, s.epsilon ** s.mu[n], s.epsilon)
    coef = np.where(low, np.minimum(coef, s.D), coef)
    return coef / n2.astype(float)


def inductive_hypothesis_modes(schedule, n, targets, dense_radius=8,
                               pairs_per_target=64, seed=0, saturation=1.0):
    """Sparse support obeying the rung-``n`` hypothesis around given targets.

    The support holds a dense ball of radius ``dense_radius``, the translate
    ``k - ball`` for each target ``k`` (so low/high interactions are present
    in full), and ``pairs_per_target`` random pairs ``(alpha, k - alpha)``
    with ``|k|/2 <= |alpha| <= 4|k|`` covering the high/high regions.
    Magnitudes are ``saturation`` times the hypothesis cap.
    """
    rng = np.random.default_rng(seed)
    ball = points_in_ball(dense_radius)
    parts = [ball]
    for k in targets:
        k = np.asarray(k, dtype=np.int64)
        parts.append(k[None, :] - ball)
        nk = float(np.linalg.norm(k))
        if pairs_per_target:
            r = rng.uniform(0.5 * nk, 4 * nk, size=pairs_per_target)
            d = rng.normal(size=(pairs_per_target, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            a = np.rint(d * r[:, None]).astype(np.int64)
            parts.append(a)
            parts.append(k[None, :] - a)
    vecs = np.unique(np.concatenate(parts), axis=0)
    vecs = vecs[np.any(vecs != 0, axis=1)]
    n2 = np.einsum("pi,pi->p", vecs, vecs)
    return ModeSet(vecs, saturation * hypothesis_bound(schedule, n, n2))
