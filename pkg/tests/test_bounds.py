import numpy as np
import pytest

from loewner import (
    BoundContext,
    Box,
    DomainError,
    FOf,
    GFunction,
    LinearEnvelope,
    NonCommutingError,
    OperatorFamily,
    PolyMap,
    PreconditionError,
    SpectrumRange,
    WeightGrid,
    affine_bound,
    box_optimize,
    certify,
    difference_bound,
    fit_envelopes,
    fundamental_bound,
    linear_ratio_constant,
    ratio_bound,
    weighted_phi_sum,
)
from loewner._sampling import haar_unitary, hermitian_with_spectrum

from _scenarios import random_scenario


def family_in_basis(rng, d, intervals, counts):
    U = haar_unitary(d, rng)
    axes = tuple(
        tuple(hermitian_with_spectrum(U, rng.uniform(lo, hi, size=d)) for _ in range(k))
        for (lo, hi), k in zip(intervals, counts)
    )
    return OperatorFamily(axes, tuple(intervals), commuting=True)


def test_weight_grid_validation():
    with pytest.raises(ValueError):
        WeightGrid((np.array([0.5, 0.6]),))
    with pytest.raises(ValueError):
        WeightGrid((np.array([1.5, -0.5]),))
    w = WeightGrid((np.array([0.25, 0.75]), np.array([0.5, 0.5])))
    assert w.weight((1, 0)) == pytest.approx(0.375)


def test_family_spectrum_containment():
    with pytest.raises(PreconditionError):
        OperatorFamily(((np.diag([1.0, 3.0]),),), ((1.0, 2.0),))
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NonCommutingError):
        OperatorFamily(((X, np.diag([1.0, -1.0])),), ((-1.0, 1.0),), commuting=True)


def test_weighted_sum_linear_identity(rng):
    fam = family_in_basis(rng, 4, [(0, 1)], [2])
    out = weighted_phi_sum(FOf(lambda x: x), fam, PolyMap.identity(4), WeightGrid.uniform([2]))
    assert np.allclose(out, 0.5 * fam.axes[0][0] + 0.5 * fam.axes[0][1])


def test_weighted_sum_constant_is_identity(rng):
    fam = family_in_basis(rng, 3, [(0, 1), (1, 2)], [2, 3])
    w = WeightGrid((rng.dirichlet([1, 1]), rng.dirichlet([1, 1, 1])))
    phi = PolyMap({1: 0.5, 2: 0.5}, haar_unitary(3, rng)[:, :2])
    out = weighted_phi_sum(FOf(lambda x, y: 1.0), fam, phi, w)
    assert np.allclose(out, np.eye(2), atol=1e-12)


def test_weighted_sum_brute_force_diagonal():
    A = (np.diag([1.0, 2.0]), np.diag([3.0, 5.0]))
    B = (np.diag([0.5, 1.0]), np.diag([2.0, 1.5]))
    fam = OperatorFamily((A, B), ((1, 5), (0.5, 2)), commuting=True)
    w = WeightGrid((np.array([0.3, 0.7]), np.array([0.6, 0.4])))
    out = weighted_phi_sum(FOf(lambda x, y: x * y), fam, PolyMap.identity(2), w)
    brute = sum(w.weight((i, j)) * A[i] @ B[j] for i in range(2) for j in range(2))
    assert np.allclose(out, brute)


def test_multi_index_completeness():
    w = WeightGrid((np.full(3, 1 / 3), np.array([0.2, 0.8]), np.array([1.0])))
    idx = list(w.multi_indices())
    assert len(idx) == 3 * 2 * 1 == len(set(idx))
    assert sum(w.weight(j) for j in idx) == pytest.approx(1.0, abs=1e-12)


def test_box_optimize_reexport_examples():
    assert box_optimize(lambda x: x - x**2, [(0, 1)], "max").value == pytest.approx(0.25)
    assert box_optimize(lambda x: 1 / x, [(1, 2)], "min").value == pytest.approx(0.5)
    assert box_optimize(lambda x, y: x + y, [(0, 1), (0, 1)], "max").value == pytest.approx(2.0)


# constant f ---------------------------------------------------------------

def constant_setup(rng, c=1.5):
    f = lambda x, y: c + 0 * x
    box = Box.cube(1.0, 2.0, 2)
    pair = fit_envelopes(f, box, 0.1)
    fam = family_in_basis(rng, 4, [(1, 2), (1, 2)], [2, 2])
    return pair, fam, PolyMap.identity(4), WeightGrid.uniform([2, 2])


def test_fundamental_constant_f(rng):
    pair, fam, phi, w = constant_setup(rng)
    g = GFunction.power([0.5, 0.5], 1)
    for side in ("upper", "lower"):
        cert = fundamental_bound(side, lambda u, v: u, g, pair, fam, phi, w)
        assert cert.holds
        assert cert.constant == pytest.approx(1.5, abs=1e-9)
        assert np.allclose(cert.lhs, cert.rhs, atol=1e-9)
        assert abs(cert.witness) < 1e-8


def test_shrunken_constant_fails(rng):
    pair, fam, phi, w = constant_setup(rng)
    cert = fundamental_bound("upper", lambda u, v: u, GFunction.power([0.5, 0.5], 1), pair, fam, phi, w)
    bad = certify("fundamental/upper", cert.lhs, 0.5 * cert.constant * np.eye(4), 0.5 * cert.constant, {})
    assert not bad.holds and bad.witness < -0.5


def test_fundamental_random_commuting():
    g = GFunction.power([1.0], 1)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 3))
        g = GFunction.power([1.0 / n] * n, 1)
        f = (lambda x: np.sqrt(x) + 0.5) if n == 1 else (lambda x, y: x * y + 0.5)
        pair = _pairs(n)
        d = int(rng.integers(2, 9))
        fam = family_in_basis(rng, d, [tuple(np.sort(rng.uniform(0.5, 2, 2)))] * n,
                              [int(rng.integers(1, 3)) for _ in range(n)])
        w = WeightGrid.uniform(fam.counts)
        cert = fundamental_bound("upper", lambda u, v: u - v, g, pair, fam, PolyMap.identity(d), w)
        assert cert.holds and cert.witness >= -1e-8, (seed, cert.witness)


_PAIRS = {}


def _pairs(n):
    if n not in _PAIRS:
        f = (lambda x: np.sqrt(x) + 0.5) if n == 1 else (lambda x, y: x * y + 0.5)
        _PAIRS[n] = fit_envelopes(f, Box.cube(0.5, 2.0, n), 0.1)
    return _PAIRS[n]


def test_fundamental_rejects_non_monotone_F(rng):
    pair, fam, phi, w = constant_setup(rng)
    pair = fit_envelopes(lambda x, y: x + y, Box.cube(1.0, 2.0, 2), 0.1)
    with pytest.raises(ValueError, match="monotone"):
        fundamental_bound("upper", lambda u, v: -u, GFunction.power([0.5, 0.5], 1), pair, fam, phi, w)


# affine and difference ----------------------------------------------------

def test_affine_alpha_zero_is_range_bound(rng):
    box = Box.cube(0.5, 2.0, 1)
    pair = fit_envelopes(lambda x: x**2, box, 0.1)
    fam = family_in_basis(rng, 5, [(0.5, 2.0)], [3])
    ctx = BoundContext(pair, fam, PolyMap.identity(5), WeightGrid.uniform([3]))
    cert = affine_bound("upper", 0.0, GFunction.exp([1.0]), pair, fam, ctx.maps, ctx.w, context=ctx)
    assert cert.holds
    assert cert.constant == pytest.approx(ctx.f_range("upper").hi, abs=1e-9)
    assert np.allclose(cert.rhs, cert.constant * np.eye(5))


def test_affine_exp_random_instances():
    for seed in range(10):
        sc = random_scenario(seed)
        g = GFunction.exp([0.5 / sc["n"]] * sc["n"])
        for side in ("upper", "lower"):
            cert = affine_bound(side, 1.0, g, sc["pair"], sc["family"], sc["phi"], sc["w"], context=sc["ctx"])
            assert cert.holds and cert.witness >= -1e-8


def test_affine_log_domain_error(rng):
    box = Box.cube(0.0, 1.0, 1)
    pair = fit_envelopes(lambda x: x - 0.5, box, 0.1)
    fam = family_in_basis(rng, 3, [(0.0, 1.0)], [2])
    with pytest.raises(DomainError, match="sum"):
        affine_bound("upper", 1.0, GFunction.log([1.0]), pair, fam, PolyMap.identity(3), WeightGrid.uniform([2]))


def test_affine_alpha_one_matches_difference():
    for seed in range(10):
        sc = random_scenario(seed)
        for side in ("upper", "lower"):
            a = affine_bound(side, 1.0, sc["g"], sc["pair"], sc["family"], sc["phi"], sc["w"], context=sc["ctx"])
            d = difference_bound(side, sc["g"], sc["pair"], sc["family"], sc["phi"], sc["w"], context=sc["ctx"])
            assert a.constant == pytest.approx(d.constant, abs=1e-10)
            assert d.holds


# linear envelope path -----------------------------------------------------

identity_env = LinearEnvelope([1.0], 0.0, [1.0], 0.0)


def test_ratio_linear_example(rng):
    fam = family_in_basis(rng, 4, [(1.0, 2.0)], [2])
    cert = ratio_bound("upper", GFunction.power([1.0], 2), identity_env, fam, PolyMap.identity(4),
                       WeightGrid.uniform([2]), f=lambda x: x)
    assert cert.constant == pytest.approx(1.0, abs=1e-9)
    assert cert.holds


def test_ratio_identity_equality(rng):
    fam = family_in_basis(rng, 5, [(1.0, 3.0)], [3])
    for side in ("upper", "lower"):
        cert = ratio_bound(side, GFunction.power([1.0], 1), identity_env, fam, PolyMap.identity(5),
                           WeightGrid.uniform([3]), f=lambda x: x)
        assert cert.constant == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(cert.lhs, cert.rhs, atol=1e-9) and cert.holds


def test_ratio_log_negative_case(rng):
    fam = family_in_basis(rng, 4, [(0.2, 0.8)], [2])
    w = WeightGrid.uniform([2])
    g = GFunction.log([1.0])
    xs = np.linspace(0.2, 0.8, 2001)
    for side, expected in (("upper", np.min(xs / np.log(xs))), ("lower", np.max(xs / np.log(xs)))):
        cert = ratio_bound(side, g, identity_env, fam, PolyMap.identity(4), w, f=lambda x: x)
        assert cert.inequality_id == f"ratio/g_neg/{side}"
        assert cert.constant == pytest.approx(expected, rel=1e-6)
        assert cert.holds
    with pytest.raises(PreconditionError):
        ratio_bound("upper", g, identity_env, fam, PolyMap.identity(4), w, "g_pos", f=lambda x: x)


def test_ratio_sign_change_rejected(rng):
    fam = family_in_basis(rng, 3, [(0.5, 2.0)], [1])
    with pytest.raises(PreconditionError, match="changes sign"):
        ratio_bound("upper", GFunction.log([1.0]), identity_env, fam, PolyMap.identity(3),
                    WeightGrid.uniform([1]), f=lambda x: x)


def test_ratio_linear_path_needs_linear_maps(rng):
    fam = family_in_basis(rng, 3, [(1.0, 2.0)], [1])
    with pytest.raises(PreconditionError):
        ratio_bound("upper", GFunction.power([1.0], 1), identity_env, fam, PolyMap({2: 1.0}, np.eye(3)),
                    WeightGrid.uniform([1]), f=lambda x: x)


def test_ratio_scaling_divides_constant():
    g = GFunction.power([1.0], 2)
    a = linear_ratio_constant("upper", g, identity_env, [(1.0, 2.0)])
    for kappa in (0.5, 2.0, 7.0):
        b = linear_ratio_constant("upper", g.scaled(kappa), identity_env, [(1.0, 2.0)])
        assert b.result.value == pytest.approx(a.result.value / kappa, abs=1e-10)
        assert b.result.argpoint == a.result.argpoint


def test_difference_linear_example(rng):
    fam = family_in_basis(rng, 4, [(0.0, 1.0)], [2])
    g = GFunction.power([1.0], 2)
    cert = difference_bound("upper", g, identity_env, fam, PolyMap.identity(4), WeightGrid.uniform([2]),
                            f=lambda x: x)
    assert cert.constant == pytest.approx(0.25, abs=1e-6)
    assert cert.holds


def test_difference_identity_equality(rng):
    fam = family_in_basis(rng, 4, [(0.0, 1.0)], [2])
    cert = difference_bound("upper", GFunction.power([1.0], 1), identity_env, fam, PolyMap.identity(4),
                            WeightGrid.uniform([2]), f=lambda x: x)
    assert cert.constant == pytest.approx(0.0, abs=1e-12)
    assert abs(cert.witness) < 1e-9


def test_difference_exp_random_instances():
    for seed in range(10, 20):
        sc = random_scenario(seed)
        g = GFunction.exp([0.5 / sc["n"]] * sc["n"])
        cert = difference_bound("upper", g, sc["pair"], sc["family"], sc["phi"], sc["w"], context=sc["ctx"])
        assert cert.holds and cert.witness >= -1e-8


def test_extremal_constant_monotone_under_enlargement():
    g = GFunction.power([1.0], 2)
    h = lambda x, y: x / g(y)
    small = box_optimize(h, [SpectrumRange(1.0, 2.0), SpectrumRange(1.0, 2.0)], "max").value
    big = box_optimize(h, [SpectrumRange(1.0, 3.0), SpectrumRange(0.5, 2.0)], "max").value
    assert big >= small
    small_min = box_optimize(h, [SpectrumRange(1.0, 2.0), SpectrumRange(1.0, 2.0)], "min").value
    big_min = box_optimize(h, [SpectrumRange(1.0, 3.0), SpectrumRange(0.5, 2.0)], "min").value
    assert big_min <= small_min


def test_certificate_serialization(rng):
    pair, fam, phi, w = constant_setup(rng)
    cert = affine_bound("upper", 1.0, GFunction.power([0.5, 0.5], 1), pair, fam, phi, w)
    doc = cert.to_dict()
    assert doc["id"] == "affine/upper" and "witness" in doc and doc["provenance"]["rigorous"] is False
    assert len(doc["ranges"]) == 3


def test_g_function_domain():
    g = GFunction.power([1.0], 2)
    assert g(-2.0) == pytest.approx(4.0)
    assert np.isnan(GFunction.power([1.0], 0.5)(-1.0))
    assert np.isnan(GFunction.log([1.0])(0.0))
    with pytest.raises(DomainError):
        GFunction.log([1.0]).operator([np.diag([0.0, 1.0])])
    with pytest.raises(ValueError):
        GFunction.log([-1.0])
    assert GFunction.power([1.0, 2.0], 1)(1.0, 2.0) == pytest.approx(5.0)
