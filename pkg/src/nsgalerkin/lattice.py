"""Integer-lattice geometry shared by the field, norm and bound modules.

Shell membership is decided on exact integer squared lengths.  A real
radius ``r`` is turned into the largest admissible integer ``|k|^2`` with a
small relative guard so that e.g. ``r = sqrt(6)`` still admits the shell
``|k|^2 = 6`` despite rounding in ``r * r``.
"""
from functools import lru_cache
import math

import numpy as np

_GUARD = 1e-9


def max_sq(r):
    """Largest integer ``n`` with ``sqrt(n) <= r`` (``-1`` if ``r < 0``)."""
    if r < 0:
        return -1
    if math.isinf(r):
        return math.inf
    r2 = r * r
    return math.floor(r2 + _GUARD * max(1.0, r2))


def min_sq(r):
    """Smallest integer ``n`` with ``sqrt(n) >= r``."""
    if r <= 0:
        return 0
    r2 = r * r
    return math.ceil(r2 - _GUARD * max(1.0, r2))


def le_radius(n2, r):
    """Elementwise ``sqrt(n2) <= r`` for integer squared lengths."""
    return np.asarray(n2) <= max_sq(r)


def ge_radius(n2, r):
    """Elementwise ``sqrt(n2) >= r`` for integer squared lengths."""
    return np.asarray(n2) >= min_sq(r)


def lt_radius(n2, r):
    return ~ge_radius(n2, r)


def gt_radius(n2, r):
    return ~le_radius(n2, r)


@lru_cache(maxsize=32)
def ball(cutoff):
    """Dense lattice box ``[-n, n]^3`` for a cutoff radius.

    Returns ``(n, kvec, k2, mask)``: ``kvec`` has shape ``(S, S, S, 3)`` with
    ``S = 2n + 1``, ``k2`` the integer squared lengths and ``mask`` the
    boolean support ``0 < |k| <= cutoff``.  Arrays are read-only.
    """
    n = int(math.floor(cutoff + _GUARD))
    r = np.arange(-n, n + 1)
    kvec = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
    k2 = np.einsum("...i,...i->...", kvec, kvec)
    mask = (k2 > 0) & le_radius(k2, cutoff)
    for a in (kvec, k2, mask):
        a.setflags(write=False)
    return n, kvec, k2, mask


def points_in_ball(radius):
    """All nonzero lattice points with ``|k| <= radius`` in lexicographic order."""
    _, kvec, _, mask = ball(float(radius))
    return kvec[mask]
