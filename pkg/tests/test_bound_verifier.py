import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsgalerkin import DomainError, PreconditionError, SpectralField
from nsgalerkin.bound_verifier import (
    DecayHypothesis,
    ModeSet,
    T1Params,
    T2Params,
    T4Params,
    build_schedule,
    check_decay_hypothesis,
    d_sequence,
    duhamel_envelope,
    hypothesis_bound,
    inductive_hypothesis_modes,
    mu_sequence,
    profile_modes,
    split_majorant,
)
from nsgalerkin.lattice_sums import empirical_constants

from conftest import dict_of, random_field

C = empirical_constants().C


def oracle_regions(u, k, scheme, params):
    """Scalar loop over stored pairs, assigning each to the first matching region."""
    modes = {a: float(np.linalg.norm(v)) for a, v in dict_of(u).items()}
    k = np.array(k)
    nk = math.sqrt(k @ k)
    out = {}
    for a, ma in modes.items():
        b = tuple(int(x) for x in k - np.array(a))
        if b not in modes:
            continue
        na, nb = math.sqrt(sum(x * x for x in a)), math.sqrt(sum(x * x for x in b))
        near = na <= 2 * nk
        w = na
        if scheme == "T2":
            name = "III" if not near else ("I" if nb <= nk / 2 else "II")
            if not near:
                w = nk
        elif scheme == "T1":
            s, n = params.schedule, params.n
            km1, kn = s.k_minus1, s.k[n]
            half = nb >= nk / 2
            for name, cond in [
                ("I_1", na <= km1 and half),
                ("I_2", km1 <= na <= kn and half),
                ("II", na >= kn and near and half),
                ("III", near and nb >= kn and nb <= nk / 2),
                ("IV_1", near and nb <= km1),
                ("IV_2", near and km1 <= nb <= kn),
                ("V", not near),
            ]:
                if cond:
                    break
            if not near:
                w = nk
        else:
            h = 0.5 * nk ** (1 - 2.0 ** -params.n)
            if near and nb >= h:
                name = "I"
            elif nb <= h:
                name = "II"
            else:
                name = "III"
        out[name] = out.get(name, 0.0) + w * ma * modes[b]
    return out


def _t1_params(n=0):
    s = build_schedule(1.0, 0.3, 1.0, 0.03, 2)
    return T1Params(s, n, C)


SCHEMES = {
    "T2": (lambda: T2Params(0.1, C), 1.0),
    "T1": (_t1_params, None),
    "T4": (lambda: T4Params(1e-3, 2.0, 1e-3, 1, 1.0), 4.0),
}


@pytest.mark.parametrize("scheme", sorted(SCHEMES))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_partition_matches_loop_oracle(scheme, seed):
    make, lo = SCHEMES[scheme]
    params = make()
    if lo is None:
        lo = params.schedule.k[params.n + 1]
    u = random_field(seed, cutoff=3, real=seed % 2 == 0)
    rng = np.random.default_rng(seed)
    targets = [t for t in rng.integers(-5, 6, size=(40, 3)) if np.linalg.norm(t) >= lo][:8]
    for k in targets:
        b = split_majorant(u, k, scheme, params)
        ref = oracle_regions(u, k, scheme, params)
        for r in b.regions:
            assert r.computed == pytest.approx(ref.get(r.name, 0.0), rel=1e-13, abs=1e-300)
        assert b.total == pytest.approx(sum(ref.values()), rel=1e-13, abs=1e-300)


def test_t2_claims():
    u = random_field(0, cutoff=3)
    b = split_majorant(u, (1, 0, 0), "T2", T2Params(0.5, 2.0))
    assert [r.claimed for r in b.regions] == [2.0, 2.0, 2.0]
    assert b.claimed_total == pytest.approx(6.0) == b.sum_of_claims
    assert b.region("II").name == "II"
    with pytest.raises(KeyError):
        b.region("IV")


def test_zero_field_gives_zero_regions():
    for scheme in SCHEMES:
        make, _ = SCHEMES[scheme]
        b = split_majorant(SpectralField.zeros(3), (5, 0, 0), scheme, make())
        assert b.total == 0 and all(r.computed == 0 and r.count == 0 for r in b.regions)
        assert b.ok


def test_t4_region_two_members_are_far_from_origin():
    u = random_field(5, cutoff=6)
    for k in [(4, 0, 0), (3, 3, 2), (0, 5, 5)]:
        b = split_majorant(u, k, "T4", T4Params(1e-3, 2.0, 1e-3, 1, 1.0), return_members=True)
        a = b.members["II"]
        assert len(a) == b.region("II").count
        assert np.all(np.linalg.norm(a, axis=1) >= np.linalg.norm(k) / 2)


def test_preconditions_and_param_types():
    u = random_field(0, cutoff=3)
    with pytest.raises(PreconditionError):
        split_majorant(u, (1, 0, 0), "T4", T4Params(1e-3, 2.0, 1e-3, 1, 1.0))
    s = build_schedule(1.0, 0.1, 1.0, 0.01, 2)
    with pytest.raises(PreconditionError):
        split_majorant(u, (2, 0, 0), "T1", T1Params(s, 1, C))
    with pytest.raises(DomainError):
        split_majorant(u, (1, 0, 0), "T1", T2Params(0.1, C))
    with pytest.raises(DomainError):
        split_majorant(u, (0, 0, 0), "T2", T2Params(0.1, C))
    with pytest.raises(DomainError):
        split_majorant(u, (1, 0, 0), "T3", T2Params(0.1, C))


def test_modeset_validation():
    with pytest.raises(DomainError):
        ModeSet([[0, 0, 0]], [1.0])
    with pytest.raises(DomainError):
        ModeSet([[1, 0, 0], [1, 0, 0]], [1.0, 2.0])
    with pytest.raises(DomainError):
        ModeSet([[1 << 20, 0, 0]], [1.0])
    m = ModeSet([[1, 2, 3], [-1, 0, 0]], [2.0, 3.0])
    vals, found = m.lookup([[1, 2, 3], [5, 5, 5], [-(1 << 21), 0, 0]])
    assert vals.tolist() == [2.0, 0.0, 0.0] and found.tolist() == [True, False, False]


@pytest.mark.parametrize("n, mu", [(0, 1), (1, 2), (2, 3), (3, 5), (4, 9)])
def test_mu_examples(n, mu):
    assert mu_sequence(n) == mu


def test_mu_closed_form_and_ratio():
    for n in range(1, 41):
        assert mu_sequence(n) == 2 ** (n - 1) + 1
    assert all(0.5 < mu_sequence(n) / 2 ** n < 1 for n in range(2, 41))
    with pytest.raises(DomainError):
        mu_sequence(-1)


def test_schedule_examples():
    s = build_schedule(1.0, 0.1, 1.0, 1.0, 3, margin=0.0)
    assert s.t[:3].tolist() == [0.0, 0.5, 0.75]
    assert s.k0 == pytest.approx(10.0)
    assert s.k[1] == pytest.approx(1000.0)
    assert s.gamma[2] == 0.25 and s.mu[:3] == [1, 2, 3]
    assert s.mu_ratio_ok and not s.truncated
    assert s.first_rung_beyond(500) == 1 and s.first_rung_beyond(1e300) is None
    with pytest.raises(DomainError):
        build_schedule(1.0, 0.4, 1.0, 1.0, 2)
    with pytest.raises(DomainError):
        build_schedule(0.0, 0.1, 1.0, 1.0, 2)


def test_schedule_truncates_overflowing_ladder():
    s = build_schedule(1.0, 0.01, 1.0, 1e-3, 12)
    assert s.truncated and s.n_max < 12 and np.all(np.isfinite(s.k))


def test_schedule_choice_condition():
    s = build_schedule(0.5, 0.1, 2.0, 0.05, 2)
    assert s.choice_ok
    assert (s.k_minus1 / s.k0) * s.D < s.epsilon


def test_exp_estimate_reports_first_failure():
    assert build_schedule(10.0, 0.1, 10.0, 0.01, 3).exp_estimate_ok
    s = build_schedule(1e-4, 0.3, 0.1, 0.01, 3)
    assert s.exp_estimate_first_failure == 0


@pytest.mark.parametrize("q", [0.25, 0.5, 0.9])
def test_d_sequence_closed_form(q):
    c = 1.0
    L0 = (q / (2 * c)) ** 2
    ds = d_sequence(30, L0, c)
    assert ds.q == pytest.approx(q, rel=1e-15) and not ds.diverges
    for n in range(31):
        assert ds.values[n] == pytest.approx(ds.closed_form(n), rel=1e-13)
    assert ds.limit == pytest.approx((4 + math.sqrt(2)) * L0 / (1 - q), rel=1e-13)


def test_d_sequence_examples_and_errors():
    ds = d_sequence(2, 0.01, 1.0)
    assert ds.values[0] == pytest.approx(0.02)
    assert ds.values[1] == pytest.approx(0.2 * 0.02 + (4 + math.sqrt(2)) * 0.01)
    assert d_sequence(3, 1.0, 1.0).diverges
    with pytest.raises(DomainError):
        d_sequence(3, 0.0, 1.0)
    with pytest.raises(DomainError):
        d_sequence(3, 0.1, 0.5)


def test_duhamel_examples():
    assert duhamel_envelope(1.0, 0.0, (1, 0, 0), 1.0) == pytest.approx(math.exp(-1))
    assert duhamel_envelope(0.0, 4.0, (2, 0, 0), 50.0) == pytest.approx(1.0)
    assert duhamel_envelope(3.0, 7.0, (1, 1, 1), 0.0) == 3.0
    with pytest.raises(DomainError):
        duhamel_envelope(-1.0, 0.0, (1, 0, 0), 1.0)
    with pytest.raises(DomainError):
        duhamel_envelope(1.0, 0.0, (0, 0, 0), 1.0)


@given(st.floats(0, 10), st.floats(0, 10), st.integers(1, 50), st.floats(0, 5))
def test_duhamel_between_endpoints(A, B, k2, dt):
    k = (k2, 0, 0)
    v = duhamel_envelope(A, B, k, dt)
    lo, hi = sorted((A, B / k2 ** 2))
    assert lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12)


def test_decay_witness():
    u = SpectralField.from_modes(4, {(1, 0, 0): (0, 1, 0), (0, 2, 0): (0.5, 0, 0)})
    ok = check_decay_hypothesis(u, DecayHypothesis(2.0))
    assert ok.passed and ok.wavevector is None
    bad = check_decay_hypothesis(u, DecayHypothesis(1.5))
    assert not bad.passed and bad.wavevector == (0, 2, 0)
    assert bad.value == pytest.approx(2.0) and bad.excess == pytest.approx(0.5)
    assert check_decay_hypothesis(u, DecayHypothesis(0.5, K_min=3)).passed
    assert DecayHypothesis(2.0).satisfied_by(u)
    with pytest.raises(DomainError):
        DecayHypothesis(0.0)


def test_hypothesis_bound_regimes():
    s = build_schedule(1.0, 0.01, 3.0, 5e-6, 2)
    assert s.k[1] == pytest.approx(15.0, rel=1e-5)
    caps = hypothesis_bound(s, 1, np.array([1, 16, 400]))
    assert caps[0] == pytest.approx(5e-6)
    assert caps[1] == pytest.approx(0.01 / 16)
    assert caps[2] == pytest.approx(1e-4 / 400)


def test_t1_total_on_dense_hypothesis_support():
    eps = 0.01
    s = build_schedule(1.0, eps, 1.0, 5e-10, 2)
    modes = profile_modes(10, 1.0)
    modes = ModeSet(modes.vectors, hypothesis_bound(s, 1, modes.norm2))
    params = T1Params(s, 1, C)
    worst = 0.0
    for k in [(6, 0, 0), (3, 4, 2), (4, 4, 4), (1, 2, 7)]:
        b = split_majorant(modes, k, "T1", params)
        worst = max(worst, b.total / b.claimed_total)
    assert 0 < worst <= 1


def test_t1_total_on_sparse_hypothesis_support():
    s = build_schedule(1.0, 0.01, 3.0, 5e-6, 2)
    k2 = s.k[2]
    targets = [(int(1.05 * k2) + 1, 0, 0), (int(0.8 * k2), int(0.7 * k2), 3)]
    modes = inductive_hypothesis_modes(s, 1, targets, dense_radius=4, pairs_per_target=64)
    for k in targets:
        b = split_majorant(modes, k, "T1", T1Params(s, 1, C))
        assert b.total > 0 and b.ok
