"""Truncated Fourier velocity fields on the 3-torus and the projected
Navier-Stokes convection term.

Conventions follow the phase-space form of the equations with the ``2*pi``
factors dropped: the dissipation of mode ``k`` is ``-|k|^2`` and the
nonlinear term is

    N(u)_k = -i P_k sum_alpha (k . u_alpha) u_{k - alpha},

where ``P_k = I - k k^T / |k|^2`` is the Leray projector.
"""
import math

import numpy as np
import scipy.fft
from numba import njit, prange

from .errors import ConfigurationError, DomainError
from .lattice import ball, max_sq

__all__ = [
    "SpectralField",
    "leray_project",
    "nonlinear_term_direct",
    "nonlinear_term_fast",
    "fft_grid_size",
    "max_divergence",
    "symmetrize_real",
    "project_field",
    "write_field",
    "read_field",
]

DIV_TOL = 1e-12
_SYM_TOL = 1e-10


class SpectralField:
    """Immutable finite map from nonzero wave vectors to complex 3-vectors.

    Coefficients are held in a dense array over the box ``[-n, n]^3`` with
    ``n = floor(cutoff)``; every lattice point of the ball
    ``0 < |k| <= cutoff`` is a stored mode (possibly zero).  Iteration over
    modes is lexicographic in ``(k1, k2, k3)``.

    Parameters
    ----------
    cutoff : float
        Radius ``K`` of the support ball.
    coeffs : ndarray, optional
        Complex array of shape ``(2n+1, 2n+1, 2n+1, 3)``; zeros if omitted.
    real_symmetric : bool
        Declares ``u_{-k} = conj(u_k)``, i.e. the field is real valued in
        physical space.  Checked on construction.
    """

    def __init__(self, cutoff, coeffs=None, real_symmetric=False, *, check=True):
        cutoff = float(cutoff)
        if not cutoff > 0 or not math.isfinite(cutoff):
            raise DomainError(f"cutoff must be a positive finite radius, got {cutoff}")
        n, _, _, mask = ball(cutoff)
        shape = mask.shape + (3,)
        if coeffs is None:
            data = np.zeros(shape, dtype=complex)
        else:
            data = np.array(coeffs, dtype=complex, copy=True)
            if data.shape != shape:
                raise DomainError(f"coefficient array has shape {data.shape}, expected {shape}")
        if check:
            if not np.all(np.isfinite(data)):
                raise DomainError("coefficients must be finite")
            if np.any(data[~mask] != 0):
                raise DomainError("coefficients outside 0 < |k| <= cutoff (or at k = 0) must vanish")
        data.setflags(write=False)
        self._cutoff = cutoff
        self._n = n
        self._data = data
        self._real = bool(real_symmetric)
        self._mag = None
        if check and self._real and not _is_hermitian(data):
            raise DomainError("real_symmetric field must satisfy u_{-k} = conj(u_k)")

    # construction helpers -------------------------------------------------
    @classmethod
    def zeros(cls, cutoff, real_symmetric=False):
        return cls(cutoff, real_symmetric=real_symmetric)

    @classmethod
    def from_modes(cls, cutoff, modes, real_symmetric=False):
        """Build a field from a mapping or iterable of ``(k, vector)`` pairs."""
        n, _, _, mask = ball(float(cutoff))
        data = np.zeros(mask.shape + (3,), dtype=complex)
        items = modes.items() if hasattr(modes, "items") else modes
        for k, v in items:
            k = tuple(int(x) for x in k)
            if k == (0, 0, 0):
                raise DomainError("the zero mode carries no coefficient (zero mean)")
            idx = tuple(x + n for x in k)
            if any(not 0 <= i <= 2 * n for i in idx) or not mask[idx]:
                raise DomainError(f"wave vector {k} lies outside cutoff {cutoff}")
            data[idx] = np.asarray(v, dtype=complex)
        return cls(cutoff, data, real_symmetric)

    def replace(self, coeffs, real_symmetric=None, check=False):
        """New field on the same support with different coefficients."""
        real = self._real if real_symmetric is None else real_symmetric
        return SpectralField(self._cutoff, coeffs, real, check=check)

    # basic properties -------------------------------------------------------
    @property
    def cutoff(self):
        return self._cutoff

    @property
    def n(self):
        return self._n

    @property
    def coeffs(self):
        """Read-only dense coefficient array of shape ``(S, S, S, 3)``."""
        return self._data

    @property
    def real_symmetric(self):
        return self._real

    @property
    def mask(self):
        return ball(self._cutoff)[3]

    @property
    def kgrid(self):
        """Integer wave vectors of the dense box, shape ``(S, S, S, 3)``."""
        return ball(self._cutoff)[1]

    @property
    def k2grid(self):
        return ball(self._cutoff)[2]

    @property
    def wavevectors(self):
        """Stored wave vectors, shape ``(M, 3)``, in the fixed total order."""
        _, kvec, _, mask = ball(self._cutoff)
        return kvec[mask]

    @property
    def values(self):
        """Coefficients of the stored modes, shape ``(M, 3)``, same order."""
        return self._data[self.mask]

    @property
    def magnitudes(self):
        """Euclidean norms ``|u_k|`` of the stored modes (cached, read-only)."""
        if self._mag is None:
            a = np.abs(self.values)
            # hypot avoids overflow of the squares for huge finite coefficients
            mag = np.hypot(np.hypot(a[:, 0], a[:, 1]), a[:, 2])
            mag.setflags(write=False)
            self._mag = mag
        return self._mag

    @property
    def wavenumbers(self):
        """``|k|`` of the stored modes."""
        return np.sqrt(self.k2grid[self.mask].astype(float))

    def __len__(self):
        return int(self.mask.sum())

    def __getitem__(self, k):
        k = tuple(int(x) for x in k)
        idx = tuple(x + self._n for x in k)
        if any(not 0 <= i <= 2 * self._n for i in idx) or not self.mask[idx]:
            return np.zeros(3, dtype=complex)
        return self._data[idx].copy()

    def items(self):
        for k, v in zip(self.wavevectors, self.values):
            yield tuple(int(x) for x in k), v

    def nonzero_items(self):
        for k, v in self.items():
            if np.any(v != 0):
                yield k, v

    def __repr__(self):
        return (f"SpectralField(cutoff={self._cutoff:g}, modes={len(self)}, "
                f"real_symmetric={self._real})")

    # arithmetic -------------------------------------------------------------
    def _combine(self, other, data):
        real = self._real and (other is None or other.real_symmetric)
        return SpectralField(self._cutoff, data, real, check=False)

    def _check_compatible(self, other):
        if not isinstance(other, SpectralField) or other.n != self._n or other.cutoff != self._cutoff:
            raise DomainError("fields must share the same cutoff")

    def __add__(self, other):
        self._check_compatible(other)
        return self._combine(other, self._data + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self._combine(other, self._data - other.coeffs)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        real = self._real and scalar.imag == 0
        return SpectralField(self._cutoff, self._data * scalar, real, check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def allclose(self, other, rtol=1e-12, atol=0.0):
        self._check_compatible(other)
        return np.allclose(self._data, other.coeffs, rtol=rtol, atol=atol)


def _is_hermitian(data, tol=_SYM_TOL):
    flipped = np.conj(data[::-1, ::-1, ::-1])
    scale = np.max(np.abs(data)) if data.size else 0.0
    if scale == 0:
        return True
    return np.max(np.abs(data - flipped)) <= tol * scale


def _project_dense(kvec, k2, v):
    """Apply ``P_k`` to an array of vectors; modes with ``k = 0`` are zeroed."""
    kdotv = np.einsum("...i,...i->...", kvec, v)
    safe = np.where(k2 > 0, k2, 1)
    w = v - kvec * (kdotv / safe)[..., None]
    w[k2 == 0] = 0
    return w


def leray_project(k, v):
    """Project ``v`` onto the plane orthogonal to the wave vector ``k``.

    Returns ``v - k (k . v) / |k|^2``.  Raises ``DomainError`` for ``k = 0``.
    """
    k = np.asarray(k, dtype=float)
    if k.shape != (3,):
        raise DomainError("wave vector must have three components")
    k2 = float(k @ k)
    if k2 == 0:
        raise DomainError("the Leray projector is undefined at k = 0")
    v = np.asarray(v, dtype=complex)
    return v - k * ((k @ v) / k2)


def _check_out_cutoff(u, out_cutoff):
    if out_cutoff is None:
        return u.cutoff
    out_cutoff = float(out_cutoff)
    if not out_cutoff > 0:
        raise DomainError("out_cutoff must be positive")
    if out_cutoff > 2 * u.cutoff * (1 + 1e-12):
        raise DomainError(f"out_cutoff {out_cutoff} exceeds twice the input cutoff {u.cutoff}")
    return out_cutoff


@njit(parallel=True, cache=True)
def _convolve_gather(coeffs, n, support, targets):
    # For each target k, sum (k . u_a) u_{k-a} over the support in a fixed
    # order; one target per worker keeps each reduction sequential.
    out = np.zeros((targets.shape[0], 3), dtype=np.complex128)
    m = support.shape[0]
    for p in prange(targets.shape[0]):
        k0 = targets[p, 0]
        k1 = targets[p, 1]
        k2 = targets[p, 2]
        s0 = 0j
        s1 = 0j
        s2 = 0j
        for q in range(m):
            a0 = support[q, 0]
            a1 = support[q, 1]
            a2 = support[q, 2]
            b0 = k0 - a0
            b1 = k1 - a1
            b2 = k2 - a2
            if b0 < -n or b0 > n or b1 < -n or b1 > n or b2 < -n or b2 > n:
                continue
            ua = coeffs[a0 + n, a1 + n, a2 + n]
            ub = coeffs[b0 + n, b1 + n, b2 + n]
            w = k0 * ua[0] + k1 * ua[1] + k2 * ua[2]
            s0 += w * ub[0]
            s1 += w * ub[1]
            s2 += w * ub[2]
        out[p, 0] = s0
        out[p, 1] = s1
        out[p, 2] = s2
    return out


def nonlinear_term_direct(u, out_cutoff=None):
    """Exact double-loop evaluation of the projected convection term.

    Every pair ``(alpha, k - alpha)`` with both indices in the support of
    ``u`` is visited; the result is truncated to ``0 < |k| <= out_cutoff``
    (default: ``u.cutoff``).
    """
    out_cutoff = _check_out_cutoff(u, out_cutoff)
    out = SpectralField.zeros(out_cutoff)
    _, okvec, ok2, omask = ball(out_cutoff)
    targets = np.ascontiguousarray(okvec[omask], dtype=np.int64)
    nz = np.any(u.values != 0, axis=1)
    support = np.ascontiguousarray(u.wavevectors[nz], dtype=np.int64)
    data = np.zeros(omask.shape + (3,), dtype=complex)
    if support.shape[0]:
        acc = _convolve_gather(np.ascontiguousarray(u.coeffs), u.n, support, targets)
        data[omask] = -1j * _project_dense(targets, ok2[omask], acc)
    return out.replace(data, real_symmetric=u.real_symmetric)


def fft_grid_size(cutoff, real=False):
    """Transform-friendly linear grid size for alias-free quadratic products."""
    n = int(math.floor(cutoff + 1e-9))
    return scipy.fft.next_fast_len(2 * (2 * n + 1), real=real)


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def nonlinear_term_fast(u, out_cutoff=None, grid_size=None):
    """Pseudo-spectral evaluation of the same term as :func:`nonlinear_term_direct`.

    Velocity components are synthesised on a zero-padded grid, the six
    independent products ``u^j u^m`` are formed pointwise and transformed
    back.  With at least ``2 (2n + 1)`` points per dimension the products of
    modes with ``|k_i| <= n`` are free of aliasing.  Real-symmetric fields use
    real transforms.
    """
    out_cutoff = _check_out_cutoff(u, out_cutoff)
    n = u.n
    needed = 2 * (2 * n + 1)
    m = fft_grid_size(u.cutoff, real=u.real_symmetric) if grid_size is None else int(grid_size)
    if m < needed:
        raise ConfigurationError(f"grid size {m} < {needed} required for cutoff {u.cutoff}")

    _, okvec, ok2, omask = ball(out_cutoff)
    targets = okvec[omask]
    data = np.zeros(omask.shape + (3,), dtype=complex)
    if not np.any(u.coeffs):
        return SpectralField(out_cutoff, data, u.real_symmetric, check=False)

    grid = np.zeros((3, m, m, m), dtype=complex)
    idx = np.arange(-n, n + 1) % m
    grid[:, idx[:, None, None], idx[None, :, None], idx[None, None, :]] = np.moveaxis(u.coeffs, -1, 0)

    ti = tuple((targets % m).T)
    prod_hat = np.empty((6, targets.shape[0]), dtype=complex)
    if u.real_symmetric:
        half = m // 2 + 1
        phys = scipy.fft.irfftn(grid[..., :half], s=(m, m, m), axes=(1, 2, 3), norm="forward")
        prods = np.stack([phys[a] * phys[b] for a, b in _PAIRS])
        spec = scipy.fft.rfftn(prods, axes=(1, 2, 3), norm="forward")
        neg = targets[:, 2] < 0
        ri = tuple(np.where(neg[:, None], (-targets) % m, targets % m).T)
        vals = spec[:, ri[0], ri[1], ri[2]]
        prod_hat[:] = np.where(neg[None, :], np.conj(vals), vals)
    else:
        phys = scipy.fft.ifftn(grid, axes=(1, 2, 3), norm="forward")
        prods = np.stack([phys[a] * phys[b] for a, b in _PAIRS])
        spec = scipy.fft.fftn(prods, axes=(1, 2, 3), norm="forward")
        prod_hat[:] = spec[:, ti[0], ti[1], ti[2]]

    # tensor T^{jm} = (u^j u^m)^ at each target, symmetric in (j, m)
    tensor = np.empty((targets.shape[0], 3, 3), dtype=complex)
    for p, (a, b) in enumerate(_PAIRS):
        tensor[:, a, b] = prod_hat[p]
        tensor[:, b, a] = prod_hat[p]
    acc = np.einsum("pj,pjm->pm", targets.astype(float), tensor)
    data[omask] = -1j * _project_dense(targets, ok2[omask], acc)
    return SpectralField(out_cutoff, data, u.real_symmetric, check=False)


def max_divergence(u):
    """``max_k |k . u_k| / max(1, |u_k|)`` over stored modes (0 if empty)."""
    if len(u) == 0:
        return 0.0
    k = u.wavevectors.astype(float)
    v = u.values
    div = np.abs(np.einsum("pi,pi->p", k, v))
    return float(np.max(div / np.maximum(1.0, np.linalg.norm(v, axis=1))))


def symmetrize_real(u):
    """Hermitian part ``(u_k + conj(u_{-k})) / 2`` of a field."""
    c = u.coeffs
    data = 0.5 * (c + np.conj(c[::-1, ::-1, ::-1]))
    return SpectralField(u.cutoff, data, real_symmetric=True, check=False)


def project_field(u):
    """Apply the Leray projector mode by mode."""
    _, kvec, k2, _ = ball(u.cutoff)
    return u.replace(_project_dense(kvec, k2, u.coeffs))


# text format -----------------------------------------------------------------

def write_field(path, u, include_zeros=False):
    """Write ``u`` as ``k1 k2 k3 re1 im1 re2 im2 re3 im3`` lines.

    The header is ``# cutoff=<K> real=<0|1>``; modes follow in the fixed
    lexicographic order.  Zero coefficients are skipped unless requested.
    """
    lines = [f"# cutoff={float(u.cutoff)!r} real={int(u.real_symmetric)}"]
    for k, v in u.items():
        if not include_zeros and not np.any(v != 0):
            continue
        nums = " ".join(f"{float(x.real)!r} {float(x.imag)!r}" for x in v)
        lines.append(f"{k[0]} {k[1]} {k[2]} {nums}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path):
    """Read a field written by :func:`write_field`; mode order is free."""
    cutoff = None
    real = False
    modes = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "cutoff":
                        cutoff = float(val)
                    elif key == "real":
                        real = bool(int(val))
                continue
            parts = line.split()
            if len(parts) != 9:
                raise ValueError(f"{path}:{lineno}: expected 9 columns, got {len(parts)}")
            k = tuple(int(x) for x in parts[:3])
            f = [float(x) for x in parts[3:]]
            modes[k] = [complex(f[0], f[1]), complex(f[2], f[3]), complex(f[4], f[5])]
    if cutoff is None:
        raise ValueError(f"{path}: missing '# cutoff=' header")
    for k in modes:
        if max_sq(cutoff) < sum(x * x for x in k):
            raise DomainError(f"{path}: mode {k} lies outside cutoff {cutoff}")
    return SpectralField.from_modes(cutoff, modes, real_symmetric=real)
