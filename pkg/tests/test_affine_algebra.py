import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralkit.affine_algebra import AffineAlgebra, PrecisionError, UEElement, apply_to_vacuum
from chiralkit.factorization_harness import distinct_points
from chiralkit.formal_geometry import SigmaConfig
from chiralkit.lie_core import build_sl2
from chiralkit.scalar_ring import ONE, Scalar, level_symbol
from chiralkit.vertex_algebra import VState

g = build_sl2()
k = level_symbol()
ORIGIN = AffineAlgebra(g, SigmaConfig.origin())


def mode(label, j, alg=ORIGIN, N=None):
    return alg.mode(label, j, N)


def test_bracket_with_central_term():
    x, y = ORIGIN.parse_mode("e[t]"), ORIGIN.parse_mode("f[t^-1]")
    assert x.commutator(y).text() == "h[1] + 4k·1"
    # oracle: h (x) t t^-1 plus k K(e, f) Res(t^-1 d t) with K(e, f) = 4
    expected = mode("h", 0) + ORIGIN.scalar(Scalar(4) * k)
    assert x.commutator(y) == expected


def test_trivial_brackets():
    h1 = ORIGIN.parse_mode("h[1]")
    assert h1.commutator(h1).is_zero()
    cfg = SigmaConfig.symbolic(1)
    alg = AffineAlgebra(g, cfg)
    x = alg.parse_mode("e[(t-a1)^-1]")
    y = alg.parse_mode("e[(t-a1)^2]")
    assert x.commutator(y).is_zero()


def test_normal_order_one_step():
    e, f = g.index("e"), g.index("f")
    word = ((-1, f), (1, e))
    lhs = ORIGIN.normal_order(word)
    expected = mode("e", 1) * mode("f", -1) - mode("h", 0) - ORIGIN.scalar(Scalar(4) * k)
    assert lhs == expected
    # the PBW word e[t] f[t^-1] read in sorted order
    assert ORIGIN.normal_order(()) == ORIGIN.unit()
    ee = ((1, e), (1, e))
    assert ORIGIN.normal_order(ee).terms == {ee: ONE}


def test_multiply_examples():
    x = mode("e", 1) + mode("h", -2)
    assert ORIGIN.unit() * x == x
    comm = mode("e", 1) * mode("f", -1) - mode("f", -1) * mode("e", 1)
    assert comm.text() == "h[1] + 4k·1"


def test_truncation_ideal():
    N = 3
    x = mode("f", -2, N=N) * mode("e", N, N=N + 2)
    assert x.truncate(N).is_zero()
    assert mode("e", N, N=N).is_zero()


def test_precision_is_tracked():
    x = mode("e", 0, N=2)
    y = mode("f", -3, N=10)
    with pytest.raises(PrecisionError):
        x * y


def test_apply_to_vacuum_examples():
    assert apply_to_vacuum(ORIGIN.unit()) == VState.vacuum(g)
    e_state = apply_to_vacuum(mode("e", -1))
    assert e_state.text() == "e(-1)|0>"
    v = apply_to_vacuum(mode("e", 1) * mode("f", -1))
    assert v == VState.vacuum(g).scale(Scalar(4) * k)


def test_vacuum_quotient_is_single_point():
    alg = AffineAlgebra(g, SigmaConfig.symbolic(2))
    with pytest.raises(Exception):
        apply_to_vacuum(alg.unit())


def random_modes(seed, n, count):
    rng = random.Random(seed)
    cfg = SigmaConfig.origin() if n == 1 else distinct_points(rng, n)
    alg = AffineAlgebra(g, cfg)
    return alg, [alg.mode(rng.randrange(3), rng.randint(-2 * n, 2 * n)) for _ in range(count)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_jacobi_and_antisymmetry(seed, n):
    _, (x, y, z) = random_modes(seed, n, 3)
    assert (x.commutator(y) + y.commutator(x)).is_zero()
    jac = x.commutator(y.commutator(z)) + y.commutator(z.commutator(x)) + z.commutator(x.commutator(y))
    assert jac.is_zero()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_associativity(seed, n):
    _, (x, y, z) = random_modes(seed, n, 3)
    assert (x * y) * z == x * (y * z)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2))
def test_normal_order_is_confluent(seed, n):
    alg, ms = random_modes(seed, n, 4)
    word = tuple(next(iter(m.terms))[0] for m in ms)
    direct = alg.normal_order(word)
    left = ((ms[0] * ms[1]) * ms[2]) * ms[3]
    right = ms[0] * (ms[1] * (ms[2] * ms[3]))
    assert direct == left == right


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_unit_is_central(seed, n):
    alg, (x,) = random_modes(seed, n, 1)
    assert alg.unit().commutator(x).is_zero()


def test_truncated_products_agree_with_exact_products():
    N = 4
    x = mode("e", -2) * mode("h", 1)
    y = mode("f", -1) * mode("e", 2)
    exact = (x * y).truncate(N)
    xt = UEElement(ORIGIN, x.terms, N + 3)
    yt = UEElement(ORIGIN, y.terms, N)
    assert (xt * yt).truncate(N) == exact
