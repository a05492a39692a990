"""Acceptance criteria; each test prints one PASS/FAIL line with its runtime."""

import os
import random
import subprocess
import sys
import time

import pytest

from chiralkit.affine_algebra import apply_to_vacuum
from chiralkit.center_lab import (
    center_basis,
    graded_dimension_center,
    obstruction,
    op_graded_dimension,
    sugawara_vector,
    vacuum_module,
)
from chiralkit.coordinate_actions import (
    DerElement,
    PhiAction,
    PsiAction,
    action_commutator,
    commutator_formula,
    transport_state,
)
from chiralkit.factorization_harness import (
    check_center_fact,
    check_y_fact,
    check_y_ran,
    distinct_points,
    random_function,
    sample_reports,
)
from chiralkit.formal_geometry import T_POLY, KElement, Poly, SigmaConfig, TruncatedSeries, parse_poly, schwarzian
from chiralkit.lie_core import build_sl2
from chiralkit.oper_calculus import OperFrame, oper_transform
from chiralkit.scalar_ring import Scalar, point_symbol, rational
from chiralkit.vertex_algebra import ModeSpace, VState, VStateO, borcherds_sides, field_of

g = build_sl2()
CRIT = rational(-1, 2)
ORIGIN = SigmaConfig.origin()


class Verdict:
    def __init__(self):
        self.ok = False

    def __call__(self, number, title, limit):
        self.number, self.title, self.limit = number, title, limit
        self.start = time.perf_counter()

    def done(self):
        self.ok = True


@pytest.fixture
def criterion(capsys):
    """Records one criterion; the verdict line is printed even when output is captured."""
    verdict = Verdict()
    yield verdict
    elapsed = time.perf_counter() - verdict.start
    ok = verdict.ok and elapsed < verdict.limit
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {verdict.number}: {verdict.title} "
              f"({elapsed:.1f}s, limit {verdict.limit}s)")
    assert elapsed < verdict.limit, f"criterion {verdict.number} took {elapsed:.1f}s"


def test_criterion_01_sugawara_centrality(criterion):
    criterion(1, "Sugawara centrality at the critical level", 5)
    ob = obstruction(g, 2)
    assert ob.roots == (CRIT,)
    assert ob.generic_dim == 0 and ob.dims_at_roots == (1,)
    assert center_basis(g, CRIT, 2).dim == 1
    for level in (Scalar(0), Scalar(1), rational(-1, 3)):
        assert center_basis(g, level, 2).dim == 0
    V = vacuum_module(g, CRIT)
    S = sugawara_vector(g.with_level(CRIT))
    for x in "ehf":
        for m in range(4):
            assert V.act(g.index(x), m, S).is_zero()
    criterion.done()


def test_criterion_02_center_matches_opers(criterion):
    criterion(2, "graded dimensions of the center and of functions on opers", 60)
    expected = [1, 0, 1, 1, 2, 2, 4]
    assert op_graded_dimension(g, 6) == expected
    assert graded_dimension_center(g, CRIT, 6) == expected
    criterion.done()


def test_criterion_03_action_equality(criterion):
    criterion(3, "the two vector field actions agree", 60)
    V = vacuum_module(g)
    for text in ("t^2", "t^3", "t^2 + 2t^3", "3t^4"):
        f = DerElement(parse_poly(text))
        P, Q = PhiAction(V, f), PsiAction(V, f)
        for d in range(4):
            for w in V.basis(d):
                v = VState.monomial(g, w)
                assert P(v) == Q(v)
        for A in (P, Q):
            for a in range(g.dim):
                for m in range(-2, 3):
                    for w in V.basis_up_to(2):
                        v = VState.monomial(g, w)
                        assert action_commutator(V, A, a, m, v) == commutator_formula(V, f, a, m, v)
    criterion.done()


def test_criterion_04_vacuum_and_translations(criterion):
    criterion(4, "vacuum invariance and trivial translations", 10)
    V = vacuum_module(g)
    vac = VState.vacuum(g)
    for text in ("t^2", "t^3", "t^2 + 2t^3", "3t^4"):
        f = DerElement(parse_poly(text))
        assert PhiAction(V, f)(vac).is_zero()
        assert PsiAction(V, f)(vac).is_zero()
    for shift in (Poly.constant(point_symbol(1)), Poly.constant(Scalar(3))):
        for w in V.basis_up_to(2):
            v = VState.monomial(g, w)
            assert transport_state(V, T_POLY + shift, v) == VStateO.from_state(v)
    criterion.done()


def test_criterion_05_evaluation_axiom(criterion):
    criterion(5, "fields at t^-1 recover their states", 30)
    V = vacuum_module(g)
    inv_t = KElement.local_power(ORIGIN, 0, -1)
    for w in V.basis_up_to(4):
        v = VState.monomial(g, w)
        assert apply_to_vacuum(field_of(v, ORIGIN, 0)(inv_t)) == v
    criterion.done()


def test_criterion_06_locality_and_borcherds(criterion):
    criterion(6, "locality orders and the Borcherds identity", 60)
    V = vacuum_module(g)
    e, f = V.parse("e(-1)|0>"), V.parse("f(-1)|0>")
    assert V.locality_order(e, f) == 2
    assert V.locality_order(e, e) == 0
    for w in V.basis_up_to(3):
        assert V.locality_order(VState.vacuum(g), VState.monomial(g, w)) == 0
    rng = random.Random(6)
    low = [VState.monomial(g, w) for w in V.basis_up_to(2)]
    upto3 = [VState.monomial(g, w) for w in V.basis_up_to(3)]
    triples = [(A, B, rng.choice(upto3)) for A in low for B in low]
    triples += [(rng.choice(upto3), rng.choice(upto3), rng.choice(upto3)) for _ in range(40)]
    for A, B, C in triples:
        for m in range(-2, 3):
            for n in range(-2, 3):
                lhs, rhs = borcherds_sides(V, A, B, C, m, n)
                assert lhs == rhs
    criterion.done()


def _coordinate(rng, var):
    coeffs = [Scalar(0), Scalar(rng.choice([1, 2, -1, 3]))] + [Scalar(rng.randint(-3, 3)) for _ in range(3)]
    return TruncatedSeries(coeffs, 12, var)


def test_criterion_07_schwarzian_and_oper_cocycles(criterion):
    criterion(7, "Schwarzian chain rule and oper transform composition", 30)
    rng = random.Random(7)
    for _ in range(20):
        t_of_s, s_of_u = _coordinate(rng, "s"), _coordinate(rng, "s")
        lhs = schwarzian(t_of_s.compose(s_of_u))
        rhs = schwarzian(t_of_s).compose(s_of_u) * s_of_u.deriv() ** 2 + schwarzian(s_of_u)
        assert lhs.agrees_with(rhs)
        omega = OperFrame("t", (1,), (TruncatedSeries([Scalar(rng.randint(-3, 3)) for _ in range(5)], 12, "t"),))
        assert oper_transform(oper_transform(omega, t_of_s), s_of_u).agrees_with(oper_transform(omega, t_of_s.compose(s_of_u)))
    for c in range(1, 4):
        # s / (1 - c s) has vanishing Schwarzian
        mob = TruncatedSeries([Scalar(0)] + [Scalar(c**i) for i in range(9)], 9, "s")
        sw = schwarzian(mob)
        assert sw.order >= 6 and sw.valuation() is None
    criterion.done()


def test_criterion_08_factorization(criterion):
    criterion(8, "factorization compatibility of residues, brackets, fields and the center", 120)
    rng = random.Random(8)
    reports = sample_reports(g, rng, residue_samples=200, bracket_samples=50)
    assert len(reports) == 300 and all(r.equal for r in reports)
    V = vacuum_module(g)
    states = [VState.monomial(g, w) for w in V.basis_up_to(2)]
    for v in states:
        cfg = distinct_points(rng, 2)
        assert check_y_fact(v, cfg, random_function(rng, cfg, terms=2), N=6).equal
        assert check_y_ran(v, N=2, l=rng.randint(-1, 1)).equal
    cfg = distinct_points(rng, 2)
    S = sugawara_vector(g)
    f, h = random_function(rng, cfg), random_function(rng, cfg)
    other = V.parse("h(-1)|0>")
    assert check_center_fact(g, cfg, CRIT, S, f, other, h, N=6).equal
    assert not check_center_fact(g, cfg, Scalar(0), S, f, other, h, N=6).equal
    criterion.done()


def test_criterion_09_beta_is_a_lie_morphism(criterion):
    criterion(9, "the mode map respects brackets", 60)
    V = vacuum_module(g)
    M = ModeSpace(V, ORIGIN)
    rng = random.Random(9)
    states = V.basis_up_to(2)[1:]

    def sample():
        out = None
        for _ in range(2):
            x = M.symbol(VState.monomial(g, rng.choice(states)), {rng.randint(-2, 2): Scalar(rng.randint(-3, 3) or 1)})
            out = x if out is None else out + x
        return out

    for _ in range(50):
        x, y = sample(), sample()
        assert M.beta(M.bracket(x, y), 6) == M.beta_commutator(x, y, 6)
    criterion.done()


def test_criterion_10_determinism(criterion):
    criterion(10, "same seed gives byte-identical reports", 240)
    outputs = []
    for hashseed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        proc = subprocess.run(
            [sys.executable, "-m", "chiralkit", "verify", "--suite", "all", "--seed", "7", "--format", "json"],
            capture_output=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        outputs.append(proc.stdout)
    assert outputs[0] == outputs[1]
    criterion.done()
