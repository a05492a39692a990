import json
import random

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralkit.formal_geometry import GeometryError, KElement, SigmaConfig, TruncatedSeries, parse_kelement, parse_poly
from chiralkit.oper_calculus import (
    OperError,
    OperFrame,
    OpFunction,
    frame_change_cocycle,
    frame_change_series,
    gamma_pairing,
    is_permutation_matrix,
    op_function_eval,
    op_monomials,
    oper_transform,
    pairing_matrix,
)
from chiralkit.scalar_ring import ONE, ZERO, Scalar

ORIGIN = SigmaConfig.origin()
S = sympy.Symbol("s")


def ser(coeffs, order, var="t"):
    return TruncatedSeries([Scalar(c) for c in coeffs], order, var)


def frame(*comps, exps=None, order=8):
    exps = exps or tuple(range(1, len(comps) + 1))
    return OperFrame("t", tuple(exps), tuple(ser(c, order) for c in comps))


def sympy_transform(omega_coeffs, t_expr, d, order, first):
    """(t')^(d+1) w(t(s)) - [first] (1/2){t, s}, as a list of coefficients."""
    T = sympy.Symbol("T")
    w = sum(sympy.Rational(c) * T**i for i, c in enumerate(omega_coeffs))
    dt = sympy.diff(t_expr, S)
    out = dt ** (d + 1) * w.subs(T, t_expr)
    if first:
        sw = sympy.diff(t_expr, S, 3) / dt - sympy.Rational(3, 2) * (sympy.diff(t_expr, S, 2) / dt) ** 2
        out -= sw / 2
    poly = sympy.series(out, S, 0, order + 1).removeO()
    return [sympy.Rational(poly.coeff(S, i)) for i in range(order + 1)]


def test_identity_change():
    w = frame([5, 0, 1])
    ident = ser([0, 1], 8, "s")
    out = oper_transform(w, ident)
    assert [out.components[0][i] for i in range(3)] == [Scalar(5), ZERO, ONE]
    zero = oper_transform(frame([]), ident)
    assert zero.components[0].valuation() is None


def test_schwarzian_example():
    # t = s + s^2: w^s = 3 (1 + 2s)^-2 = 3 - 12s + 36s^2
    out = oper_transform(frame([], order=5), ser([0, 1, 1], 5, "s"))
    assert [out.components[0][i] for i in range(3)] == [Scalar(3), Scalar(-12), Scalar(36)]
    assert out.components[0].order == 2


def test_transform_rejects_bad_changes():
    with pytest.raises(GeometryError):
        oper_transform(frame([1]), ser([1, 1], 6, "s"))
    with pytest.raises(GeometryError):
        oper_transform(frame([1]), ser([0, 0, 1], 6, "s"))


def test_frame_change_examples():
    assert frame_change_series(parse_poly("t")).text() == "z + O(z^2)"
    rho = frame_change_series(parse_poly("t^2"))
    assert [rho[i] for i in range(3)] == [parse_poly("0"), parse_poly("2t"), parse_poly("1")]
    rho = frame_change_series(parse_poly("t + t^3"))
    assert [rho[i] for i in range(1, 4)] == [parse_poly("1 + 3t^2"), parse_poly("3t"), parse_poly("1")]


def test_frame_change_cocycle_example():
    ok, direct, composite = frame_change_cocycle(parse_poly("t + t^2"), parse_poly("s - 2s^3", "s"), 8)
    assert ok
    assert all(direct[i] == composite[i] for i in range(9))


def test_json_roundtrip():
    w = frame([1, 2], [0, 3], exps=(1, 2))
    back = OperFrame.from_json(json.dumps(w.to_json()))
    assert back == w
    from_poly = OperFrame.from_json({"coordinate": "t", "exponents": [1], "order": 4, "components": ["1 + t^2"]})
    assert from_poly.components[0].agrees_with(ser([1, 0, 1], 4))
    assert from_poly.text() == "w1 = 1 + t^2 + O(t^5)"
    with pytest.raises(OperError, match="position"):
        OperFrame.from_json("{bad")
    with pytest.raises(OperError):
        OperFrame("t", (1, 2), (ser([1], 3),))


def test_gamma_pairing_examples():
    assert gamma_pairing(0, parse_kelement("t^-1", ORIGIN), {0: parse_kelement("1", ORIGIN)}, ORIGIN) == ONE
    assert gamma_pairing(0, parse_kelement("1", ORIGIN), {0: parse_kelement("t + 3t^2", ORIGIN)}, ORIGIN) == ZERO
    assert gamma_pairing(0, parse_kelement("1", ORIGIN), {0: parse_kelement("t^-1", ORIGIN)}, ORIGIN) == ONE
    assert gamma_pairing(1, parse_kelement("t^-1", ORIGIN), {0: parse_kelement("1", ORIGIN)}, ORIGIN) == ZERO


def test_op_function_examples():
    assert op_function_eval(OpFunction.one(), {}) == ONE
    assert op_function_eval(OpFunction.generator(0, -1), {0: parse_kelement("1", ORIGIN)}) == ONE
    v = OpFunction.generator(0, 0)
    assert op_function_eval(v * v, {0: parse_kelement("t^-1", ORIGIN)}) == ONE
    F = v * v + OpFunction.generator(0, -1)
    assert F.text() == "v[1,-1] + v[1,0]*v[1,0]"
    assert op_function_eval(F, {0: parse_kelement("2t^-1 + 3", ORIGIN)}) == Scalar(4 + 3)


def test_op_degrees():
    v = OpFunction.generator(0, -2)
    assert v.degree((1,)) == 3
    assert (v * OpFunction.generator(0, -1)).degree((1,)) == 5
    assert (v + OpFunction.generator(0, -1)).degree((1,)) is None
    # counts agree with the partition table (1,0,1,1,2,2,4)
    assert [len(op_monomials((1,), d)) for d in range(1, 7)] == [0, 1, 1, 2, 2, 4]


@pytest.mark.parametrize("N", [1, 3, 5])
def test_pairing_window_is_a_permutation(N):
    assert is_permutation_matrix(pairing_matrix(N))


def test_permutation_detector():
    assert not is_permutation_matrix([[ONE, ONE], [ZERO, ONE]])
    assert not is_permutation_matrix([[Scalar(2)]])


coord = st.lists(st.integers(-3, 3), min_size=3, max_size=3).flatmap(
    lambda rest: st.sampled_from([1, 2, -1]).map(lambda lead: [0, lead] + rest)
)
comp = st.lists(st.integers(-4, 4), min_size=1, max_size=4)


@settings(max_examples=30, deadline=None)
@given(coord, comp, comp)
def test_transform_against_sympy(p, w1, w2):
    M = 5
    t_of_s = ser(p, M + 3, "s")
    out = oper_transform(frame(w1, w2, exps=(1, 2), order=M + 3), t_of_s)
    t_expr = sum(c * S**i for i, c in enumerate(p))
    for j, (d, w) in enumerate(((1, w1), (2, w2))):
        ref = sympy_transform(w, t_expr, d, out.components[j].order, first=(j == 0))
        assert [out.components[j][i].to_fraction() for i in range(len(ref))] == ref


@settings(max_examples=20, deadline=None)
@given(coord, coord, comp)
def test_transform_composes(p, q, w1):
    order = 12
    t_of_s = ser(p, order, "s")
    s_of_u = ser(q, order, "s")
    w = frame(w1, order=order)
    two_steps = oper_transform(oper_transform(w, t_of_s), s_of_u)
    one_step = oper_transform(w, t_of_s.compose(s_of_u))
    assert two_steps.agrees_with(one_step)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_frame_change_cocycle_random(seed):
    rng = random.Random(seed)

    def poly(var):
        cs = [0, rng.choice([1, 2, -1])] + [rng.randint(-2, 2) for _ in range(2)]
        return parse_poly(" + ".join(f"({c}){var}^{i}" for i, c in enumerate(cs)), var)

    assert frame_change_cocycle(poly("t"), poly("s"), 8)[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-3, 3), st.integers(-3, 3))
def test_gamma_pairing_is_bilinear(m, n, a, b):
    form = KElement.local_power(ORIGIN, 0, m)
    f, g = KElement.local_power(ORIGIN, 0, n), KElement.local_power(ORIGIN, 0, -1 - m)
    combo = f * KElement.constant(ORIGIN, Scalar(a)) + g * KElement.constant(ORIGIN, Scalar(b))
    lhs = gamma_pairing(0, form, {0: combo}, ORIGIN)
    rhs = gamma_pairing(0, form, {0: f}, ORIGIN) * Scalar(a) + gamma_pairing(0, form, {0: g}, ORIGIN) * Scalar(b)
    assert lhs == rhs
