import pytest
import sympy

from chiralkit.center_lab import center_basis
from chiralkit.lie_core import LieError, build_algebra, build_sl2, build_sl3, critical_level
from chiralkit.scalar_ring import Scalar, rational


def sl2_matrices():
    return {
        "e": sympy.Matrix([[0, 1], [0, 0]]),
        "h": sympy.Matrix([[1, 0], [0, -1]]),
        "f": sympy.Matrix([[0, 0], [1, 0]]),
    }


def sl3_matrices():
    out = {}
    for i in range(3):
        for j in range(3):
            if i != j:
                m = sympy.zeros(3)
                m[i, j] = 1
                out[f"E{i + 1}{j + 1}"] = m
    out["H1"] = sympy.diag(1, -1, 0)
    out["H2"] = sympy.diag(0, 1, -1)
    return out


def matrix_of(g, mats, vec):
    return sum((mats[g.labels[i]] * sympy.Rational(c.to_fraction()) for i, c in vec.items()), sympy.zeros(*next(iter(mats.values())).shape))


@pytest.mark.parametrize("g, mats, dual_coxeter", [(build_sl2(), sl2_matrices(), 2), (build_sl3(), sl3_matrices(), 3)])
def test_structure_constants_against_matrices(g, mats, dual_coxeter):
    for i, x in enumerate(g.labels):
        for j, y in enumerate(g.labels):
            comm = mats[x] * mats[y] - mats[y] * mats[x]
            assert matrix_of(g, mats, g.bracket({i: Scalar(1)}, {j: Scalar(1)})) == comm
            # Killing form of sl_n is 2n tr(xy)
            assert g.killing[i][j].to_fraction() == 2 * dual_coxeter * (mats[x] * mats[y]).trace()


def test_sl2_killing_values():
    g = build_sl2()
    e, h, f = (g.index(x) for x in "ehf")
    assert g.killing[h][h] == Scalar(8)
    assert g.killing[e][f] == Scalar(4)
    assert g.killing[e][e] == Scalar(0)


def test_sl2_bracket_e_f():
    g = build_sl2()
    assert g.bracket({g.index("e"): Scalar(1)}, {g.index("f"): Scalar(1)}) == {g.index("h"): Scalar(1)}


@pytest.mark.parametrize("name", ["sl2", "sl3"])
def test_jacobi_and_invariance(name):
    g = build_algebra(name)
    assert g.is_antisymmetric()
    assert g.jacobi_defects() == []
    assert g.form_invariance_defects() == []


def test_critical_level_sl2():
    g = build_sl2()
    assert critical_level(g) == rational(-1, 2)
    assert center_basis(g, Scalar(0), 2).dim == 0


def test_unknown_algebra():
    with pytest.raises(LieError):
        build_algebra("e8")


def test_exponents():
    assert build_sl2().exponents == (1,)
    assert build_sl3().exponents == (1, 2)
