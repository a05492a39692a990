import random

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralkit.factorization_harness import distinct_points, random_function
from chiralkit.formal_geometry import (
    GeometryError,
    KElement,
    Poly,
    SigmaConfig,
    TruncatedSeries,
    coordinate_series,
    function_basis,
    local_expansion,
    local_product,
    parse_kelement,
    parse_poly,
    phi_basis,
    ran_merge,
    residue_sigma,
    schwarzian,
    series_compose,
    series_invert,
)
from chiralkit.scalar_ring import ONE, ZERO, Scalar, point_symbol

T = sympy.Symbol("t")
a1, a2 = point_symbol(1), point_symbol(2)


def to_sympy(x: KElement):
    """Rational function of t for an element over rational points."""
    expr = sum(sympy.Rational(c.to_fraction()) * T**i for i, c in enumerate(x.poly.c))
    for a, pp in zip(x.cfg.points, x.principal):
        av = sympy.Rational(a.to_fraction())
        for m, c in enumerate(pp, start=1):
            expr += sympy.Rational(c.to_fraction()) / (T - av) ** m
    return expr


def series(coeffs, order, var="z"):
    return TruncatedSeries([Scalar(c) for c in coeffs], order, var)


def test_phi_basis_single_point():
    o = SigmaConfig.origin()
    assert phi_basis(o, -1, 0) == KElement.local_power(o, 0, -1)


def test_phi_basis_two_points():
    cfg = SigmaConfig.symbolic(2)
    assert phi_basis(cfg, 1, 0) == KElement(cfg, Poly.linear_factor(a1) * Poly.linear_factor(a2))
    inv = phi_basis(cfg, -1, 0)
    d = (a1 - a2).inv()
    expected = KElement.pole(cfg, 0, 1, d) + KElement.pole(cfg, 1, 1, -d)
    assert inv == expected
    # clearing denominators gives back 1
    assert inv * phi_basis(cfg, 1, 0) == KElement.constant(cfg, ONE)


def test_residue_examples():
    o = SigmaConfig.origin()
    assert residue_sigma(o, parse_kelement("t^-1", o), parse_kelement("t", o)) == ONE
    cfg = SigmaConfig.symbolic(2)
    g = phi_basis(cfg, -1, 0)
    t = KElement(cfg, Poly.monomial(1))
    assert residue_sigma(cfg, g, t) == ZERO
    f = KElement.pole(cfg, 1, 3) + KElement(cfg, Poly.monomial(4))
    assert residue_sigma(cfg, KElement.constant(cfg, ONE), f) == ZERO


def test_local_expansion_examples():
    cfg = SigmaConfig.symbolic(2)
    g = KElement.pole(cfg, 0, 1)
    at1 = local_expansion(cfg, g, 0, 4)
    assert at1.principal == (ONE,) and at1.tail.valuation() is None
    at2 = local_expansion(cfg, g, 1, 2)
    d = (a2 - a1).inv()
    # geometric series: 1/(u + a2 - a1)
    assert [at2.tail[i] for i in range(3)] == [d, -(d * d), d * d * d]
    lin = local_expansion(cfg, KElement(cfg, Poly.monomial(1)), 1, 1)
    assert [lin.tail[0], lin.tail[1]] == [a2, ONE]


def test_ran_merge_examples():
    cfg = SigmaConfig.symbolic(2)
    merged, x = ran_merge(cfg, phi_basis(cfg, 1, 0), 1, 0)
    assert merged.points == (a1,)
    assert x == KElement(merged, Poly.linear_factor(a1) ** 2)
    _, y = ran_merge(cfg, KElement.pole(cfg, 0, 1) + KElement.pole(cfg, 1, 1), 1, 0)
    assert y == KElement.pole(merged, 0, 1, Scalar(2))


def test_ran_merge_restricts_regular_elements_and_rejects_diagonal_poles():
    cfg = SigmaConfig.symbolic(2)
    merged, x = ran_merge(cfg, phi_basis(cfg, -1, 0), 1, 0)
    # 1/phi is a function on the whole family; on the diagonal it is (t - a1)^-2
    assert x == KElement.pole(merged, 0, 2)
    with pytest.raises(GeometryError):
        ran_merge(cfg, KElement.pole(cfg, 0, 1, (a1 - a2).inv()), 1, 0)


def test_series_inverse_example():
    inv = series_invert(series([0, 1, 1], 3))
    assert [inv[i] for i in range(4)] == [ZERO, ONE, Scalar(-1), Scalar(2)]
    assert series_invert(series([0, 1], 5)).agrees_with(series([0, 1], 5))


def test_compose_rejects_constant_term():
    with pytest.raises(GeometryError):
        series_compose(series([0, 0, 1], 4), series([1, 1], 4))


def test_schwarzian_examples():
    assert schwarzian(series([0, 1], 6, "s")).valuation() is None
    sw = schwarzian(coordinate_series(parse_poly("s + s^2", "s"), 5, "s"))
    assert sw.text() == "-6 + 24s - 72s^2 + O(s^3)"
    # oracle: {t, s} = t'''/t' - 3/2 (t''/t')^2 with sympy
    s = sympy.Symbol("s")
    t = s + s**2
    ref = sympy.series(sympy.diff(t, s, 3) / sympy.diff(t, s) - sympy.Rational(3, 2) * (sympy.diff(t, s, 2) / sympy.diff(t, s)) ** 2, s, 0, 3).removeO()
    assert [sw[i].to_fraction() for i in range(3)] == [sympy.Rational(ref.coeff(s, i)) for i in range(3)]


def test_moebius_schwarzian_vanishes():
    mob = series([0] + [1] * 9, 9, "s")  # s / (1 - s)
    assert schwarzian(mob).order == 6
    assert schwarzian(mob).valuation() is None


def test_function_basis_duality():
    cfg = SigmaConfig.symbolic(2)
    basis = function_basis(cfg)
    for j in range(5):
        for l in range(5):
            value = basis.residue_dt(basis.coords_mul({l: ONE}, basis.dual(j)))
            assert value == (ONE if j == l else ZERO)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_residue_matches_sympy(seed, n):
    rng = random.Random(seed)
    cfg = distinct_points(rng, n)
    g, f = random_function(rng, cfg), random_function(rng, cfg)
    expr = to_sympy(g) * sympy.diff(to_sympy(f), T)
    expected = sum(sympy.residue(expr, T, sympy.Rational(a.to_fraction())) for a in cfg.points)
    assert residue_sigma(cfg, g, f).to_fraction() == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_residue_of_exact_form_vanishes(seed, n):
    rng = random.Random(seed)
    cfg = distinct_points(rng, n)
    f = random_function(rng, cfg)
    # f df = d(f^2 / 2)
    assert residue_sigma(cfg, f, f) == ZERO


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_local_expansion_is_multiplicative(seed, n):
    rng = random.Random(seed)
    cfg = distinct_points(rng, n)
    g, h = random_function(rng, cfg), random_function(rng, cfg)
    M = 6
    for i in range(n):
        lhs = local_expansion(cfg, g * h, i, M)
        rhs = local_product(local_expansion(cfg, g, i, M + 4), local_expansion(cfg, h, i, M + 4))
        for m in range(-6, M + 1):
            assert lhs.coefficient(m) == rhs.coefficient(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_phi_coordinates_roundtrip(seed, n):
    rng = random.Random(seed)
    cfg = distinct_points(rng, n)
    basis = function_basis(cfg)
    f = random_function(rng, cfg)
    assert basis.from_coords(basis.coords(f)) == f


coord = st.lists(st.integers(-3, 3), min_size=3, max_size=3).flatmap(
    lambda rest: st.sampled_from([1, 2, -1, 3]).map(lambda lead: [0, lead] + rest)
)


@settings(max_examples=30, deadline=None)
@given(coord, coord)
def test_schwarzian_cocycle(p, q):
    order = 12
    t_of_s = series(p, order, "s")
    s_of_u = series(q, order, "s")
    lhs = schwarzian(t_of_s.compose(s_of_u))
    rhs = schwarzian(t_of_s).compose(s_of_u) * s_of_u.deriv() ** 2 + schwarzian(s_of_u)
    assert lhs.agrees_with(rhs)


@settings(max_examples=30, deadline=None)
@given(coord)
def test_series_inverse_is_two_sided(p):
    x = series(p, 10)
    ident = series([0, 1], 10)
    assert series_compose(x, series_invert(x)).agrees_with(ident)
    assert series_compose(series_invert(x), x).agrees_with(ident)


def test_truncation_order_is_tracked():
    x = series([1, 2, 3], 5)
    y = series([1, 1], 3)
    assert (x + y).order == 3
    assert (x * y).order == 3


def test_parse_zero_polynomial():
    assert parse_poly("0") == Poly()
    assert parse_poly("t - t") == Poly()
