"""The center of the vacuum module: nullspaces of nonnegative modes, the critical level,
graded dimensions on both sides, and the commutative product."""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .affine_algebra import Word
from .formal_geometry import GeometryError, TruncatedSeries, join_terms
from .lie_core import LiePresentation
from .linear_algebra import echelon_rows, nullspace
from .scalar_ring import ONE, ZERO, Scalar, level_symbol, rational
from .vertex_algebra import VacuumModule, VState, word_text

DEFAULT_MAX_DEGREE = 6


class CenterError(ValueError):
    pass


_MODULES: dict[tuple, VacuumModule] = {}


def vacuum_module(g: LiePresentation, level=None) -> VacuumModule:
    """Shared vacuum module for g at the given level (None keeps g's level)."""
    if level is not None:
        g = g.with_level(level)
    key = (g.name, g.level)
    V = _MODULES.get(key)
    if V is None:
        V = _MODULES[key] = VacuumModule(g)
    return V


@dataclass(frozen=True)
class CenterBasis:
    degree: int
    level: Scalar
    states: tuple[VState, ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    def texts(self) -> list[str]:
        return [v.text() for v in self.states]


def annihilator_columns(V: VacuumModule, d: int, top_mode: int | None = None) -> list[dict]:
    """Column i = concatenated images x_(m) w_i over x in g, 0 <= m <= top_mode."""
    top = d if top_mode is None else top_mode
    cols = []
    for w in V.basis(d):
        col: dict[tuple, Scalar] = {}
        for a in range(V.g.dim):
            for m in range(0, top + 1):
                for u, c in V.alg.left_mul_mode((m, a), w, 0).items():
                    col[(a, m, u)] = c
        cols.append(col)
    return cols


def center_basis(g: LiePresentation, level, d: int, max_degree: int = DEFAULT_MAX_DEGREE) -> CenterBasis:
    """Exact basis (reduced echelon in the PBW order) of the degree-d center."""
    if d > max_degree:
        raise CenterError(f"degree {d} exceeds the configured bound {max_degree}")
    V = vacuum_module(g, level)
    words = V.basis(d)
    kernel = nullspace(annihilator_columns(V, d))
    states = []
    for vec in _echelon_kernel(kernel, len(words)):
        states.append(VState(V.g, {words[i]: c for i, c in vec.items()}))
    return CenterBasis(d, V.g.level, tuple(states))


def _echelon_kernel(kernel: list[dict], n: int) -> list[dict]:
    """Reduced echelon form of the kernel with pivots in PBW order, normalized to leading 1."""
    order = {i: i for i in range(n)}
    rows, _ = echelon_rows([(v, {}) for v in kernel], order)
    return [row for _, (row, _) in rows]


def graded_dimension_center(g: LiePresentation, level, d_max: int, max_degree: int = DEFAULT_MAX_DEGREE) -> list[int]:
    return [center_basis(g, level, d, max_degree).dim for d in range(d_max + 1)]


def op_graded_dimension(g: LiePresentation, d_max: int) -> list[int]:
    """Monomials in commuting generators v_{i,m}, m <= -1, of degree d_i - m."""
    degrees = []
    for d_i in g.exponents:
        degrees.extend(range(d_i + 1, d_max + 1))
    counts = [1] + [0] * d_max
    for deg in degrees:
        for total in range(deg, d_max + 1):
            counts[total] += counts[total - deg]
    return counts


def is_central(V: VacuumModule, v: VState) -> bool:
    top = v.degree()
    for a in range(V.g.dim):
        for m in range(0, top + 1):
            if not V.act(a, m, v).is_zero():
                return False
    return True


# ---------------------------------------------------------------------------
# critical level


@dataclass(frozen=True)
class Obstruction:
    polynomial: str
    roots: tuple[Scalar, ...]
    generic_dim: int
    dims_at_roots: tuple[int, ...]


def obstruction(g: LiePresentation, degree: int = 2, samples: int = 24, seed: int = 0) -> Obstruction:
    """Roots in k where the degree-d center jumps.

    The obstruction polynomial is the gcd of sampled maximal minors of the
    stacked annihilator matrix over Q[k]; every rational root is then verified
    by recomputing the nullspace at that level.
    """
    from sympy import Poly as SymPoly
    from sympy import Symbol

    from .scalar_ring import POLY_RING

    k = level_symbol()
    V = vacuum_module(g, k)
    cols = annihilator_columns(V, degree)
    row_keys = sorted({r for col in cols for r in col}, key=repr)
    n = len(cols)
    matrix = []
    for r in row_keys:
        row = []
        for col in cols:
            num, den = col.get(r, ZERO).numerator_denominator()
            if den != POLY_RING.one:
                raise CenterError("annihilator entries are expected to be polynomial in the level")
            row.append(_k_coeffs(num))
        matrix.append(row)
    rng = random.Random(seed)
    # generic rank: the maximum over a few random rational levels
    rank = 0
    for _ in range(3):
        level = QQ(rng.randint(-10**6, 10**6), rng.randint(1, 10**3))
        vals = _at(matrix, level)
        rank = max(rank, DomainMatrix(vals, (len(vals), n), QQ).rank())
    generic = n - rank
    gcd = None
    if rank == n:
        # det(R M) for random integer R mixes all maximal minors (Cauchy-Binet),
        # so the gcd of a few such determinants is the gcd of all of them
        stable = 0
        for _ in range(samples):
            mix = [[rng.randint(-9, 9) for _ in matrix] for _ in range(n)]
            det = _mixed_minor_in_k(mix, matrix)
            if not det:
                continue
            new = det if gcd is None else gcd.gcd(det)
            stable = stable + 1 if new == gcd else 0
            gcd = new
            if gcd.is_ground or stable >= 2:
                break
    if gcd is None or gcd.is_ground:
        return Obstruction("1", (), generic, ())
    ksym = Symbol("k")
    sp = SymPoly(gcd.as_expr(), ksym)
    square_free = SymPoly(sp.sqf_part(), ksym).monic()
    roots = []
    for r in sorted(square_free.ground_roots()):
        if r.is_rational:
            roots.append(rational(int(r.p), int(r.q)))
    dims = tuple(center_basis(g, r, degree).dim for r in roots)
    verified = tuple(r for r, d in zip(roots, dims) if d > generic)
    text = str(square_free.as_expr()).replace("**", "^").replace("*", "")
    return Obstruction(text, verified, generic, tuple(d for d in dims if d > generic))


def _k_coeffs(p) -> dict[int, object]:
    """Coefficients of a polynomial that only involves the level k."""
    out = {}
    for monom, v in p.terms():
        if any(monom[1:]):
            raise CenterError("annihilator entries may only depend on the level")
        out[monom[0]] = v
    return out


def _at(rows: list[list[dict]], level) -> list[list]:
    return [[sum((v * level**e for e, v in c.items()), QQ(0)) for c in row] for row in rows]


def _mixed_minor_in_k(mix: list[list[int]], rows: list[list[dict]]):
    """det(mix . M(k)) as a polynomial in k, by exact evaluation at integer points
    and interpolation (much faster than fraction-free elimination over Q[k])."""
    n = len(mix)
    ncols = len(rows[0])
    bound = sum(max((max(row[j], default=0) for row in rows), default=0) for j in range(ncols))
    R = DomainMatrix([[QQ(c) for c in r] for r in mix], (n, len(rows)), QQ)
    top = max(e for row in rows for c in row for e in c) if any(c for row in rows for c in row) else 0
    # R M = sum_e k^e (R M_e), formed once per power of k
    parts = []
    for e in range(top + 1):
        Me = DomainMatrix([[c.get(e, QQ(0)) for c in row] for row in rows], (len(rows), ncols), QQ)
        parts.append((R * Me).to_list())
    samples = []
    for x in range(bound + 1):
        xq = QQ(x)
        vals = [[sum((parts[e][i][j] * xq**e for e in range(top + 1)), QQ(0)) for j in range(ncols)] for i in range(n)]
        samples.append((x, DomainMatrix(vals, (n, ncols), QQ).det()))
    return _newton_interpolate(samples)


def _newton_interpolate(samples: list[tuple[int, object]]):
    """The polynomial in k through the given (x, value) points, via divided differences."""
    from .scalar_ring import POLY_RING

    xs = [QQ(x) for x, _ in samples]
    coef = [v for _, v in samples]
    for j in range(1, len(xs)):
        for i in range(len(xs) - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    kk = POLY_RING.gens[0]
    out = POLY_RING.zero
    for i in range(len(xs) - 1, -1, -1):
        out = out * (kk - xs[i]) + coef[i]
    return out


@lru_cache(maxsize=None)
def _critical_levels(name: str, degree: int) -> tuple[Scalar, ...]:
    from .lie_core import build_algebra

    return obstruction(build_algebra(name), degree).roots


def critical_levels(g: LiePresentation, degree: int = 2) -> list[Scalar]:
    return list(_critical_levels(g.name, degree))


def sugawara_vector(g: LiePresentation) -> VState:
    """sum_a x_a(-1) x^a(-1) |0> for the dual basis of the normalized form.

    The form is Killing / K(x_0, x_0^*), so for sl2 this is e f + f e + (1/2) h h.
    """
    V = vacuum_module(g)
    kil = g.killing
    # inverse of the Killing matrix
    n = g.dim
    rows = [({j: kil[i][j] for j in range(n) if not kil[i][j].is_zero()}, {i: ONE}) for i in range(n)]
    ech, _ = echelon_rows(rows, {j: j for j in range(n)})
    inv = {p: tag for p, (_, tag) in ech}  # row p of K^{-1} as {i: coeff}
    out = VState(g)
    for a in range(n):
        for b, c in inv[a].items():
            out = out + V.word_state([(-1, a), (-1, b)]).scale(c)
    partner = next(b for b in range(n) if not kil[0][b].is_zero())
    return out.scale(kil[0][partner])


# ---------------------------------------------------------------------------
# commutative product


@dataclass(frozen=True)
class CoordinateState:
    """A state with truncated-series coefficients in t."""

    g: LiePresentation
    terms: tuple  # ((word, TruncatedSeries), ...)

    def as_dict(self) -> dict:
        return dict(self.terms)

    def text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for w, s in self.terms:
            body = word_text(self.g, w)
            st = s.text()
            parts.append(f"({st})·{body}")
        return join_terms(parts)


def inverse_difference_expansion(s_of_t: TruncatedSeries, terms: int) -> list[TruncatedSeries]:
    """c_0..c_{terms-1} with (s(t1) - s(t2))^{-1} = sum_l c_l(t2) (t1-t2)^{l-1}, as series in t2."""
    from math import factorial

    # s(t2 + u) - s(t2) = u * sum_{k>=1} s^(k)(t2)/k! u^{k-1}
    derivs = [s_of_t]
    for _ in range(terms):
        derivs.append(derivs[-1].deriv())
    if derivs[1][0].is_zero():
        raise GeometryError("not a coordinate")
    order = derivs[terms].order
    a = [derivs[k].truncate(order) * (Scalar(1) / Scalar(factorial(k))) for k in range(1, terms + 1)]
    inv0 = a[0].reciprocal()
    c = [inv0]
    for l in range(1, terms):
        acc = TruncatedSeries([], order, s_of_t.var)
        for i in range(1, l + 1):
            acc = acc + a[i] * c[l - i]
        c.append(-(acc * inv0))
    return c


def commutative_product(V: VacuumModule, a: VState, b: VState, s_of_t: TruncatedSeries | None = None) -> CoordinateState | VState:
    """a ._s b: the (-1)-product of central states in the coordinate s(t).

    With s omitted the coordinate is t and a VState is returned.
    """
    if not is_central(V, a) or not is_central(V, b):
        raise CenterError("not central")
    if s_of_t is None:
        return V.nth_product(a, b, -1)
    products = [V.nth_product(a, b, l - 1) for l in range(a.degree() + b.degree() + 1)]
    while products and products[-1].is_zero():
        products.pop()
    if not products:
        return CoordinateState(V.g, ())
    coeffs = inverse_difference_expansion(s_of_t, len(products))
    acc: dict[Word, TruncatedSeries] = {}
    for c, prod in zip(coeffs, products):
        for w, x in prod.terms.items():
            term = c * x
            acc[w] = acc[w] + term if w in acc else term
    terms = tuple(sorted(((w, s) for w, s in acc.items() if s.valuation() is not None), key=lambda p: p[0]))
    return CoordinateState(V.g, terms)


def center_report(g: LiePresentation, level, d_max: int) -> dict:
    out = {}
    for d in range(d_max + 1):
        out[str(d)] = center_basis(g, level, d).texts()
    return out
