import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loewner import (
    Box,
    EnvelopePair,
    PolyMap,
    PreconditionError,
    SigmoidCombination,
    SpectrumRange,
    apply_polymap,
    apply_scalar_function,
    build_poly_bound_operator,
    fit_envelopes,
    kantorovich,
    loewner_leq,
    multivariate_operator_function,
    scalar_poly_range,
    weighted_range_sum,
)
from loewner._sampling import haar_unitary

from conftest import commuting_tuple, random_hermitian


def exact_pair(lower, upper, box):
    return EnvelopePair(lower, upper, 1.0, box, 2, 0.0, 0.0)


def linear_combination(c=1e-5):
    # x = (4/c) sigma(c x) - 2/c up to O(c^2 x^3)
    return SigmoidCombination.from_terms(1, [(4 / c, [c], 0.0), (-2 / c, [0.0], 50.0)])


def random_isometry(rng, d, k):
    return haar_unitary(d, rng)[:, :k]


def test_kantorovich_examples():
    assert kantorovich(1, 2, 2) == pytest.approx(1.125, abs=1e-12)
    assert kantorovich(5, 5, 3) == 1.0
    assert kantorovich(1, 3, -1) == pytest.approx(4 / 3, abs=1e-12)
    assert kantorovich(1, 7, 0) == kantorovich(1, 7, 1) == 1.0
    with pytest.raises(ValueError):
        kantorovich(0, 1, 2)
    with pytest.raises(ValueError):
        kantorovich(2, 1, 2)


def test_kantorovich_scale_invariance(rng):
    for _ in range(100):
        m = rng.uniform(0.1, 5)
        M = m * rng.uniform(1.01, 20)
        r = rng.uniform(-3, 5)
        c = rng.uniform(0.01, 100)
        assert kantorovich(c * m, c * M, r) == pytest.approx(kantorovich(m, M, r), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(1.0001, 100))
def test_kantorovich_square_closed_form(m, h):
    M = m * h
    assert kantorovich(m, M, 2) == pytest.approx((m + M) ** 2 / (4 * m * M), abs=1e-12)


def test_polymap_examples(rng):
    X = random_hermitian(rng, 4)
    assert np.allclose(apply_polymap(PolyMap.identity(4), X), X)
    V = random_isometry(rng, 4, 2)
    phi = PolyMap({1: 1.0}, V)
    assert np.allclose(apply_polymap(phi, np.eye(4)), np.eye(2), atol=1e-12)
    e1 = np.array([[1.0], [0.0]])
    assert apply_polymap(PolyMap({2: 1.0}, e1), np.diag([1.0, 2.0])) == pytest.approx(1.0)


def test_polymap_validation(rng):
    with pytest.raises(ValueError, match="isometry"):
        PolyMap({1: 1.0}, np.ones((2, 2)))
    with pytest.raises(ValueError):
        PolyMap({-1: 1.0}, np.eye(2))
    phi = PolyMap({-1: 0.5, 1: 0.5}, np.eye(2), allow_negative_exponents=True)
    assert phi.negative_set == () and phi.positive_set == (-1, 1)
    assert np.allclose(apply_polymap(phi, np.diag([1.0, 2.0])), np.diag([1.0, 1.25]))
    with pytest.raises(PreconditionError):
        apply_polymap(phi, np.diag([0.0, 2.0]))
    mixed = PolyMap({0: 0.5, 2: -0.25, 3: 0.75}, np.eye(2))
    assert mixed.positive_set == (0, 3) and mixed.negative_set == (2,)


def test_polymap_round_trip(rng):
    V = random_isometry(rng, 3, 2)
    phi = PolyMap({1: 0.7, 2: 0.3}, V)
    back = PolyMap.from_dict(phi.to_dict())
    assert back.coeffs == phi.coeffs
    assert np.allclose(back.isometry, V)


def test_normalization(rng):
    for _ in range(50):
        d = int(rng.integers(1, 7))
        k = int(rng.integers(1, d + 1))
        phi = PolyMap({1: 1.0}, random_isometry(rng, d, k))
        assert np.linalg.norm(apply_polymap(phi, np.eye(d)) - np.eye(k)) <= 1e-10


def test_positivity(rng):
    for _ in range(50):
        d = int(rng.integers(1, 7))
        phi = PolyMap({1: 1.0}, random_isometry(rng, d, max(1, d - 1)))
        B = random_hermitian(rng, d)
        G = random_hermitian(rng, d)
        A = B + G @ G.conj().T
        assert loewner_leq(apply_polymap(phi, B), apply_polymap(phi, A))[0]


def test_bound_operator_identity_map_returns_upper(rng):
    box = Box([(1.0, 2.0)])
    pair = fit_envelopes(lambda x: x**2, box, 0.05)
    T, _, _ = commuting_tuple(rng, 4, [(1.0, 2.0)])
    from loewner import eval_operator
    out = build_poly_bound_operator("upper", PolyMap.identity(4), pair, T)
    assert np.allclose(out, eval_operator(pair.upper, T), atol=1e-12)


def test_bound_operator_constant_envelope():
    c = 1.5
    psi = SigmoidCombination.constant(1, c)
    pair = exact_pair(psi, psi, Box([(0.0, 1.0)]))
    out = build_poly_bound_operator("upper", PolyMap({2: 1.0}, np.eye(3)), pair, np.diag([0.1, 0.5, 0.9]))
    assert np.allclose(out, c**2 * np.eye(3), atol=1e-12)


def test_bound_operator_contains_mapped_function(rng):
    box = Box([(0.5, 2.0), (0.5, 2.0)])
    f = lambda x, y: x * y + 0.5
    pair = fit_envelopes(f, box, 0.05)
    for _ in range(20):
        T, _, _ = commuting_tuple(rng, 5, box.intervals)
        V = random_isometry(rng, 5, 3)
        phi = PolyMap({1: 0.2, 2: 0.5, 3: 0.3}, V)
        fT = multivariate_operator_function(f, T)
        mapped = apply_polymap(phi, fT)
        upper = build_poly_bound_operator("upper", phi, pair, T)
        lower = build_poly_bound_operator("lower", phi, pair, T)
        assert loewner_leq(mapped, upper, 1e-8)[0]
        assert loewner_leq(lower, mapped, 1e-8)[0]


def test_lemma_sandwich(rng):
    box = Box([(0.5, 2.0), (0.5, 2.0)])
    f = lambda x, y: np.sqrt(x * y)
    pair = fit_envelopes(f, box, 0.05)
    worst = np.inf
    for _ in range(100):
        d = int(rng.integers(2, 9))
        sq = PolyMap({2: 1.0}, np.eye(d))
        T, _, _ = commuting_tuple(rng, d, box.intervals)
        f2 = apply_scalar_function(multivariate_operator_function(f, T), lambda t: t**2)
        lo = build_poly_bound_operator("lower", sq, pair, T)
        hi = build_poly_bound_operator("upper", sq, pair, T)
        for a, b in ((lo, f2), (f2, hi)):
            ok, w = loewner_leq(a, b, 1e-8)
            worst = min(worst, w)
            assert ok
    assert worst >= -1e-8


def test_bound_operator_requires_psd_lower():
    box = Box([(0.0, 1.0)])
    low = SigmoidCombination.constant(1, -1.0)
    up = SigmoidCombination.constant(1, 1.0)
    pair = exact_pair(low, up, box)
    with pytest.raises(PreconditionError):
        build_poly_bound_operator("upper", PolyMap({2: 1.0}, np.eye(2)), pair, np.eye(2) * 0.5)
    # linear maps need no Kantorovich factor, so any sign is fine
    out = build_poly_bound_operator("lower", PolyMap.identity(2), pair, np.eye(2) * 0.5)
    assert np.allclose(out, -np.eye(2))


def test_scalar_range_examples():
    box = Box([(1.0, 2.0)])
    psi = linear_combination()
    pair = exact_pair(psi, psi, box)
    r = scalar_poly_range("upper", PolyMap.identity(1), pair, box)
    assert (r.lo + r.padding, r.hi - r.padding) == pytest.approx((1.0, 2.0), abs=1e-8)
    sq = PolyMap({2: 1.0}, np.eye(1))
    r = scalar_poly_range("upper", sq, pair, box, conservative=False)
    assert (r.lo + r.padding, r.hi - r.padding) == pytest.approx((1.125, 4.5), abs=1e-8)
    r = scalar_poly_range("upper", sq, pair, box)
    assert (r.lo + r.padding, r.hi - r.padding) == pytest.approx((1.0, 4.5), abs=1e-8)
    assert 0 < r.padding < 1e-5
    assert r.grid_estimated
    with pytest.raises(ValueError):
        scalar_poly_range("upper", sq, pair, box, grid=1)


def test_scalar_range_covers_operator_spectra(rng):
    box = Box([(0.5, 2.0), (1.0, 3.0)])
    f = lambda x, y: x + 0.5 * y**2
    pair = fit_envelopes(f, box, 0.1)
    phi = PolyMap({1: 0.4, 2: 0.6}, np.eye(4))
    ranges = {s: scalar_poly_range(s, phi, pair, box) for s in ("upper", "lower")}
    for _ in range(30):
        T, _, _ = commuting_tuple(rng, 4, box.intervals)
        for side, r in ranges.items():
            ev = np.linalg.eigvalsh(build_poly_bound_operator(side, phi, pair, T))
            assert r.contains(ev), (side, ev, r)


def test_weighted_range_sum():
    r = weighted_range_sum([SpectrumRange(1, 2), SpectrumRange(3, 5, 0.1)], [0.25, 0.75])
    assert (r.lo, r.hi) == pytest.approx((2.5, 4.25))
    assert r.padding == pytest.approx(0.075)
    with pytest.raises(ValueError):
        SpectrumRange(2, 1)
