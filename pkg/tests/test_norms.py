import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsgalerkin import DomainError, SpectralField
from nsgalerkin.experiments import profile_field
from nsgalerkin.norms import (
    NORM_CSV_COLUMNS,
    NormReport,
    argmax_phi,
    norm_report,
    phi_norm,
    sobolev_norm,
    tail_enstrophy_half,
    tail_phi_sup,
)

from conftest import random_field


def single(k, mag, cutoff=6):
    return SpectralField.from_modes(cutoff, {k: (mag, 0, 0)})


def test_phi_norm_of_unit_profile():
    u = profile_field(5, 1.0, alpha=2.0)
    assert phi_norm(u, 2) == pytest.approx(1.0, rel=1e-14)


def test_phi_norm_single_mode():
    assert phi_norm(single((1, 1, 0), 3.0), 2) == pytest.approx(6.0)


def test_phi_norm_order_zero_is_max_magnitude():
    u = random_field(1, cutoff=5)
    assert phi_norm(u, 0) == np.max(u.magnitudes)


def test_phi_norm_empty_and_negative_order():
    assert phi_norm(SpectralField.zeros(3), 2) == 0.0
    with pytest.raises(DomainError):
        phi_norm(single((1, 0, 0), 1.0), -1)


@pytest.mark.parametrize(
    "k, mag, s, expected",
    [((1, 0, 0), 2.0, 0.5, 2.0), ((0, 3, 4), 1.0, 1.0, 5.0)],
)
def test_sobolev_examples(k, mag, s, expected):
    assert sobolev_norm(single(k, mag), s) == pytest.approx(expected)


def test_sobolev_zero_field():
    for s in (0, 0.5, 1, 3):
        assert sobolev_norm(SpectralField.zeros(2), s) == 0.0


def test_tail_phi_examples():
    u = random_field(2, cutoff=6)
    assert tail_phi_sup(u, 2, 0) == phi_norm(u, 2)
    low = single((1, 0, 0), 5.0)
    assert tail_phi_sup(low, 2, 2.5) == 0.0
    cube = profile_field(8, 1.0, alpha=3.0)
    assert tail_phi_sup(cube, 2, 4) == pytest.approx(0.25, rel=1e-14)


def test_tail_enstrophy_examples():
    u = random_field(3, cutoff=5)
    assert tail_enstrophy_half(u, 0) == pytest.approx(sobolev_norm(u, 0.5) ** 2, rel=1e-14)
    assert tail_enstrophy_half(single((2, 2, 1), 1.0), 2) == pytest.approx(3.0)
    assert tail_enstrophy_half(single((1, 0, 0), 1.0), 2) == 0.0


def test_tail_functionals_reject_negative_radius():
    u = single((1, 0, 0), 1.0)
    with pytest.raises(DomainError):
        tail_phi_sup(u, 2, -1)
    with pytest.raises(DomainError):
        tail_enstrophy_half(u, -0.5)


def test_argmax_first_in_order():
    u = SpectralField.from_modes(3, {(1, 0, 0): (1, 0, 0), (0, 1, 0): (1, 0, 0)})
    assert argmax_phi(u, 2) == (0, 1, 0)
    assert argmax_phi(u, 2, K_min=2) is None


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-50, 50).filter(lambda c: c == 0 or abs(c) > 1e-100), st.floats(0, 4))
def test_phi_norm_homogeneous(seed, c, alpha):
    u = random_field(seed, cutoff=4, real=False)
    assert phi_norm(u * c, alpha) == pytest.approx(abs(c) * phi_norm(u, alpha), rel=1e-13, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.floats(0, 7), min_size=2, max_size=5))
def test_tails_monotone(seed, radii):
    u = random_field(seed, cutoff=6)
    radii = sorted(radii)
    sups = [tail_phi_sup(u, 2, r) for r in radii]
    ens = [tail_enstrophy_half(u, r) for r in radii]
    assert all(a >= b for a, b in zip(sups, sups[1:]))
    assert all(a >= b for a, b in zip(ens, ens[1:]))


@pytest.mark.parametrize("alpha", [1.6, 2.0, 3.0])
def test_embedding_into_l2(alpha):
    u = profile_field(10, 1.0, alpha=alpha)
    lattice = sum(n / k2 ** alpha for k2, n in _shell_table(10).items())
    assert math.isfinite(sobolev_norm(u, 0))
    assert sobolev_norm(u, 0) <= phi_norm(u, alpha) * math.sqrt(lattice) * (1 + 1e-12)


def _shell_table(r):
    out = {}
    for k in SpectralField.zeros(r).wavevectors:
        k2 = int(k @ k)
        out[k2] = out.get(k2, 0) + 1
    return out


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_report_ordering(seed):
    u = random_field(seed, cutoff=5)
    rep = norm_report(u, 0.25)
    assert 0 <= rep.l2 <= rep.h_half * (1 + 1e-14) <= rep.h1 * (1 + 1e-13)
    assert all(v >= 0 for v in rep.as_row())


def test_report_csv_roundtrip():
    rep = norm_report(random_field(4, cutoff=6), 1.5, K_min=2, k0=3)
    assert NORM_CSV_COLUMNS == ("time", "phi2", "l2", "h_half", "h1", "tail_phi",
                                "tail_K_min", "tail_enstrophy", "tail_k0")
    assert NormReport.from_csv_row(rep.to_csv_row()) == rep
    assert rep.tail_K_min == 2 and rep.tail_k0 == 3 and rep.time == 1.5
