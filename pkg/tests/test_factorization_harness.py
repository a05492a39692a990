import random

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralkit.center_lab import sugawara_vector, vacuum_module
from chiralkit.factorization_harness import (
    FactorizationError,
    check_bracket_fact,
    check_bracket_ran,
    check_center_fact,
    check_expand_merge,
    check_merge_paths,
    check_residue_additivity,
    check_y_fact,
    check_y_ran,
    distinct_points,
    fact_image,
    local_fields_sum,
    random_function,
    sample_reports,
)
from chiralkit.formal_geometry import KElement, SigmaConfig, phi_basis
from chiralkit.lie_core import build_sl2
from chiralkit.scalar_ring import ONE, Scalar, rational
from chiralkit.vertex_algebra import field_map

g = build_sl2()
V = vacuum_module(g)
T = sympy.Symbol("t")
CRIT = rational(-1, 2)


def two_points():
    return SigmaConfig((Scalar(0), Scalar(1)))


def test_current_field_splits_into_expansions():
    cfg = two_points()
    h = KElement.pole(cfg, 1, 1) + KElement.local_power(cfg, 0, 1)
    N = 4
    img = fact_image(field_map(g, cfg, N)(V.parse("e(-1)|0>"), h), N)
    # oracle: Laurent coefficients of 1/(t-1) + t at each point, modes below N
    e = g.index("e")
    expected = {}
    for i, a in enumerate((0, 1)):
        u = sympy.Symbol("u")
        ser = sympy.series(1 / (u + a - 1) + u + a, u, 0, N).removeO()
        for m in range(-1, N):
            c = sympy.Rational(ser.coeff(u, m))
            if c != 0:
                key = tuple(((m, e),) if l == i else () for l in range(2))
                expected[key] = c
    assert {k: v.to_fraction() for k, v in img.items()} == expected


def test_field_split_against_local_fields():
    cfg = two_points()
    h = KElement.pole(cfg, 0, 2) + KElement.pole(cfg, 1, 1)
    for text in ("e(-1)|0>", "h(-1)e(-1)|0>", "e(-2)|0>"):
        rep = check_y_fact(V.parse(text), cfg, h, N=4)
        assert rep.equal, rep.to_json()


def test_field_split_negative_control():
    cfg = two_points()
    v = V.parse("h(-1)e(-1)|0>")
    h = KElement.pole(cfg, 0, 1)
    other = KElement.pole(cfg, 1, 1)
    lhs = fact_image(field_map(g, cfg, 4)(v, h), 4)
    assert lhs == local_fields_sum(v, cfg, h, 4)
    assert lhs != local_fields_sum(v, cfg, other, 4)


@pytest.mark.parametrize("text", ["e(-1)|0>", "h(-1)f(-1)|0>"])
@pytest.mark.parametrize("l", [-1, 0, 1])
def test_field_restricts_to_the_diagonal(text, l):
    assert check_y_ran(V.parse(text), N=2, l=l).equal


def test_residue_additivity_example():
    cfg = two_points()
    g_ = KElement.pole(cfg, 0, 1)
    f = KElement.local_power(cfg, 1, 1)
    rep = check_residue_additivity(cfg, g_, f)
    assert rep.equal and rep.lhs == "1"


def test_bracket_fact_example():
    cfg = two_points()
    rep = check_bracket_fact(g, cfg, g.index("e"), KElement.pole(cfg, 0, 1), g.index("f"), KElement.local_power(cfg, 1, 1))
    assert rep.equal
    assert "central: " in rep.lhs


def test_bracket_ran_example():
    cfg = SigmaConfig.symbolic(2)
    e, f = g.index("e"), g.index("f")
    rep = check_bracket_ran(g, cfg, e, phi_basis(cfg, -1, 0), f, phi_basis(cfg, 1, 1))
    assert rep.equal, rep.to_json()


def test_center_splits_only_at_critical_level():
    cfg = two_points()
    S = sugawara_vector(g)
    f = KElement.pole(cfg, 0, 1)
    other = V.parse("e(-1)|0>")
    h = KElement.pole(cfg, 1, 1) + KElement.local_power(cfg, 0, 1)
    assert check_center_fact(g, cfg, CRIT, S, f, other, h, N=4).equal
    assert not check_center_fact(g, cfg, Scalar(0), S, f, other, h, N=4).equal


def test_merging_needs_three_points():
    with pytest.raises(FactorizationError):
        check_merge_paths(SigmaConfig.symbolic(2), phi_basis(SigmaConfig.symbolic(2), 1, 0))


def test_report_json_shape():
    rep = check_residue_additivity(two_points(), KElement.pole(two_points(), 0, 1), KElement.pole(two_points(), 0, 1))
    data = rep.to_json()
    assert set(data) >= {"configuration", "operation", "lhs", "rhs", "equal", "truncation"}


def test_sampled_reports_all_agree():
    reports = sample_reports(g, random.Random(11), residue_samples=30, bracket_samples=8)
    assert len(reports) == 30 + 2 * 8
    assert all(r.equal for r in reports)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_residue_additivity_random(seed):
    rng = random.Random(seed)
    cfg = distinct_points(rng, rng.choice([2, 3]))
    assert check_residue_additivity(cfg, random_function(rng, cfg), random_function(rng, cfg)).equal


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_bracket_fact_random(seed):
    rng = random.Random(seed)
    cfg = distinct_points(rng, rng.choice([2, 3]))
    a, b = rng.randrange(3), rng.randrange(3)
    assert check_bracket_fact(g, cfg, a, random_function(rng, cfg), b, random_function(rng, cfg)).equal


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_merging_is_coherent(seed):
    rng = random.Random(seed)
    cfg = SigmaConfig.symbolic(3)
    x = random_function(rng, cfg, terms=3, max_pole=0, max_degree=3)
    x = x + phi_basis(cfg, rng.randint(0, 3), 0) * KElement.constant(cfg, ONE)
    assert check_merge_paths(cfg, x).equal
    assert check_expand_merge(cfg, x).equal
