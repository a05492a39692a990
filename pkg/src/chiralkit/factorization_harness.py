"""Desk-scale checks that functions, residues, affine brackets, fields and the center
behave well when marked points split apart (fact) or collide (Ran)."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .affine_algebra import AffineAlgebra, UEElement
from .formal_geometry import (
    KElement,
    LocalExpansion,
    SigmaConfig,
    TruncatedSeries,
    local_expansion,
    local_product,
    ran_merge,
    residue_sigma,
)
from .lie_core import LiePresentation
from .scalar_ring import ONE, ZERO, Scalar, as_scalar, rational, scalar_text
from .vertex_algebra import VState, _algebra, field_map, truncated_commutator, word_degree


class FactorizationError(ValueError):
    pass


@dataclass(frozen=True)
class SplitReport:
    configuration: str
    operation: str
    lhs: str
    rhs: str
    equal: bool
    truncation: int

    def to_json(self) -> dict:
        return {
            "configuration": self.configuration,
            "operation": self.operation,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "equal": self.equal,
            "truncation": self.truncation,
        }


# ---------------------------------------------------------------------------
# local expansions


def _local_deriv(x: LocalExpansion) -> LocalExpansion:
    """d/du of a Laurent expansion; the tail loses one order."""
    coeffs = {}
    for m in range(-len(x.principal), x.tail.order + 1):
        c = x.coefficient(m)
        if m != 0 and not c.is_zero():
            coeffs[m - 1] = c * Scalar(m)
    depth = len(x.principal) + 1 if x.principal else 0
    principal = tuple(coeffs.get(-m, ZERO) for m in range(1, depth + 1))
    while principal and principal[-1].is_zero():
        principal = principal[:-1]
    order = max(x.tail.order - 1, 0)
    tail = [coeffs.get(m, ZERO) for m in range(order + 1)]
    return LocalExpansion(principal, TruncatedSeries(tail, order, "u"))


def _local_residue(g: LocalExpansion, f: LocalExpansion) -> Scalar:
    """Res_u g df."""
    return local_product(g, _local_deriv(f)).coefficient(-1)


def _expansion_coeffs(x: LocalExpansion, top: int) -> dict[int, Scalar]:
    out = {}
    for m in range(-len(x.principal), top + 1):
        c = x.coefficient(m)
        if not c.is_zero():
            out[m] = c
    return out


def _max_pole(f: KElement) -> int:
    return max((len(pp) for pp in f.principal), default=0)


def _expansion_text(coeffs: Mapping[int, Scalar]) -> str:
    if not coeffs:
        return "0"
    return " + ".join(f"({scalar_text(c)})u^{m}" for m, c in sorted(coeffs.items()))


# ---------------------------------------------------------------------------
# residues


def check_residue_additivity(cfg: SigmaConfig, g: KElement, f: KElement) -> SplitReport:
    """Res_Sigma(g df) against the sum of the residues of the local expansions."""
    lhs = residue_sigma(cfg, g, f)
    order = _max_pole(g) + _max_pole(f) + 2
    rhs = ZERO
    for i in range(cfg.n):
        rhs = rhs + _local_residue(local_expansion(cfg, g, i, order), local_expansion(cfg, f, i, order))
    return SplitReport(cfg.label(), "residue additivity", scalar_text(lhs), scalar_text(rhs), lhs == rhs, order)


# ---------------------------------------------------------------------------
# brackets


def check_bracket_fact(g: LiePresentation, cfg: SigmaConfig, a: int, f: KElement, b: int, h: KElement, M: int = 8) -> SplitReport:
    """[X_a f, X_b h] over Sigma, expanded at each point, against the bracket of the expansions.

    The local central terms are summed over the points.
    """
    cfg.check_disjoint()
    alg = AffineAlgebra(g, cfg)
    lin, central = alg.current_bracket(a, f, b, h)
    depth = _max_pole(f) + _max_pole(h)
    order = M + depth
    lhs_parts, rhs_parts = [], []
    rhs_central = ZERO
    equal = True
    for i in range(cfg.n):
        fi = local_expansion(cfg, f, i, order)
        hi = local_expansion(cfg, h, i, order)
        prod = local_product(fi, hi)
        rhs_central = rhs_central + g.level * g.killing[a][b] * _local_residue(hi, fi)
        for c in sorted(set(lin) | {c for c, _ in g.bracket_basis(a, b)}):
            left = _expansion_coeffs(local_expansion(cfg, lin[c], i, M), M) if c in lin else {}
            coeff = dict(g.bracket_basis(a, b)).get(c, ZERO)
            right = {m: x * coeff for m, x in _expansion_coeffs(prod, M).items() if not (x * coeff).is_zero()}
            equal = equal and left == right
            lhs_parts.append(f"{g.labels[c]}@{i + 1}: {_expansion_text(left)}")
            rhs_parts.append(f"{g.labels[c]}@{i + 1}: {_expansion_text(right)}")
    equal = equal and central == rhs_central
    lhs_parts.append(f"central: {scalar_text(central)}")
    rhs_parts.append(f"central: {scalar_text(rhs_central)}")
    return SplitReport(cfg.label(), "bracket fact", "; ".join(lhs_parts), "; ".join(rhs_parts), equal, M)


def check_bracket_ran(g: LiePresentation, cfg: SigmaConfig, a: int, f: KElement, b: int, h: KElement, j: int = 1, i: int = 0) -> SplitReport:
    """Bracket then merge point j into point i, against merge then bracket."""
    alg = AffineAlgebra(g, cfg)
    lin, central = alg.current_bracket(a, f, b, h)
    merged_cfg, fm = ran_merge(cfg, f, j, i)
    _, hm = ran_merge(cfg, h, j, i)
    bindings = {next(iter(cfg.points[j].free_symbols())): cfg.points[i]}
    left = {c: ran_merge(cfg, x, j, i)[1] for c, x in lin.items()}
    left_central = central.substitute(bindings)
    right, right_central = AffineAlgebra(g, merged_cfg).current_bracket(a, fm, b, hm)
    left = {c: x for c, x in left.items() if not x.is_zero()}
    right = {c: x for c, x in right.items() if not x.is_zero()}
    equal = left == right and left_central == right_central

    def show(d, c0):
        parts = [f"{g.labels[c]}⊗({x.text()})" for c, x in sorted(d.items())]
        return " + ".join(parts + [f"{scalar_text(c0)}·1"])

    return SplitReport(cfg.label(), "bracket ran", show(left, left_central), show(right, right_central), equal, 0)


# ---------------------------------------------------------------------------
# fields


TensorWord = tuple  # one PBW word per marked point


def _tensor_mul(alg: AffineAlgebra, x: Mapping[TensorWord, Scalar], y: Mapping[TensorWord, Scalar]) -> dict:
    """Product in the tensor product of the local enveloping algebras (modes at different
    points commute, the central units are identified)."""
    out: dict[TensorWord, Scalar] = {}
    for kx, cx in x.items():
        for ky, cy in y.items():
            partial = {(): cx * cy}
            for wx, wy in zip(kx, ky):
                local = alg.left_mul_word(wx, {wy: ONE}, None) if wx else {wy: ONE}
                nxt = {}
                for prefix, c in partial.items():
                    for w, cw in local.items():
                        key = prefix + (w,)
                        nxt[key] = nxt.get(key, ZERO) + c * cw
                partial = nxt
            for key, c in partial.items():
                if not c.is_zero():
                    out[key] = out.get(key, ZERO) + c
    return {k: c for k, c in out.items() if not c.is_zero()}


def _collapse_units(terms: Mapping[TensorWord, Scalar]) -> dict:
    return {k: c for k, c in terms.items() if not c.is_zero()}


def fact_image(x: UEElement, N: int) -> dict[TensorWord, Scalar]:
    """Image of an element over Sigma in the tensor product of the local algebras, modulo
    the local cutoff-N ideals."""
    cfg = x.alg.cfg
    local = _algebra(x.alg.g, SigmaConfig.origin())
    n = cfg.n
    basis = x.alg.basis
    unit_key = tuple(() for _ in range(n))
    out: dict[TensorWord, Scalar] = {}
    for word, coeff in x.terms.items():
        factors = []
        depths = []
        for j, a in word:
            phi = basis.element(j)
            depths.append(_max_pole(phi))
            factors.append((phi, a))
        order = N + sum(depths)
        acc = {unit_key: coeff}
        for phi, a in factors:
            image: dict[TensorWord, Scalar] = {}
            for i in range(n):
                exp = local_expansion(cfg, phi, i, order)
                for m, c in _expansion_coeffs(exp, order).items():
                    key = tuple(((m, a),) if l == i else () for l in range(n))
                    image[key] = image.get(key, ZERO) + c
            acc = _tensor_mul(local, acc, image)
        for k, c in acc.items():
            out[k] = out.get(k, ZERO) + c
    return _drop_ideal(local, out, N)


def _drop_ideal(local: AffineAlgebra, terms: Mapping[TensorWord, Scalar], N: int) -> dict:
    return {k: c for k, c in terms.items() if not c.is_zero() and not any(local.in_ideal(w, N) for w in k)}


def local_fields_sum(v: VState, cfg: SigmaConfig, h: KElement, N: int) -> dict[TensorWord, Scalar]:
    """sum_i 1 (x) ... (x) Y_{a_i}(v)(h expanded at a_i) (x) ... (x) 1."""
    n = cfg.n
    fm = field_map(v.g, SigmaConfig.origin(), N)
    bound = max((max(0, len(w) * (N - 1)) + word_degree(w) for w in v.terms), default=0)
    out: dict[TensorWord, Scalar] = {}
    for i in range(n):
        coords = _expansion_coeffs(local_expansion(cfg, h, i, bound + 1), bound + 1)
        value = fm(v, coords)
        for w, c in value.terms.items():
            key = tuple(w if l == i else () for l in range(n))
            out[key] = out.get(key, ZERO) + c
    return {k: c for k, c in out.items() if not c.is_zero()}


def _tensor_text(g: LiePresentation, terms: Mapping[TensorWord, Scalar]) -> str:
    if not terms:
        return "0"
    parts = []
    for key in sorted(terms, key=lambda k: (sum(len(w) for w in k), k)):
        slots = []
        for i, w in enumerate(key):
            if w:
                slots.append("".join(f"{g.labels[a]}[u{i + 1}^{j}]" for j, a in w))
        parts.append(f"({scalar_text(terms[key])})" + ("·" + "⊗".join(slots) if slots else "·1"))
    return " + ".join(parts)


def check_y_fact(v: VState, cfg: SigmaConfig, h: KElement, N: int = 6) -> SplitReport:
    """Y_Sigma(v)(h) carried to the product of the local algebras, against the sum of the
    single-point fields applied to the local expansions of h."""
    cfg.check_disjoint()
    value = field_map(v.g, cfg, N)(v, h)
    lhs = fact_image(value, N)
    rhs = local_fields_sum(v, cfg, h, N)
    return SplitReport(cfg.label(), "field fact", _tensor_text(v.g, lhs), _tensor_text(v.g, rhs), lhs == rhs, N)


def check_y_ran(v: VState, N: int = 2, l: int = 0) -> SplitReport:
    """Y over two symbolic points at cutoff N, with a2 := a1, against Y over the merged
    point at cutoff 2N; the basis phi_l specializes to (t - a1)^l."""
    cfg = SigmaConfig.symbolic(2)
    merged = SigmaConfig(cfg.points[:1])
    bindings = {next(iter(cfg.points[1].free_symbols())): cfg.points[0]}
    left = field_map(v.g, cfg, N).at(v, l)
    left_terms = {w: c.substitute(bindings) for w, c in left.terms.items()}
    left_terms = {w: c for w, c in left_terms.items() if not c.is_zero()}
    right = field_map(v.g, merged, 2 * N).at(v, l)
    malg = right.alg
    lhs = UEElement(malg, left_terms, 2 * N)
    return SplitReport(cfg.label(), "field ran", lhs.text(), right.text(), lhs.terms == right.terms, N)


# ---------------------------------------------------------------------------
# the center


def check_center_fact(g: LiePresentation, cfg: SigmaConfig, level, state: VState, f: KElement, other: VState, h: KElement, N: int = 6) -> SplitReport:
    """[Y(state)(f), Y(other)(h)] modulo the cutoff-N ideal over Sigma, expected to vanish."""
    cfg.check_disjoint()
    gk = g.with_level(level)
    s = VState(gk, state.terms)
    o = VState(gk, other.terms)
    comm = truncated_commutator(s, f, o, h, cfg, N)
    return SplitReport(cfg.label(), f"center fact at k={scalar_text(as_scalar(level))}", comm.text(), "0", comm.is_zero(), N)


# ---------------------------------------------------------------------------
# functions: Ran and fact coherence


def check_merge_paths(cfg: SigmaConfig, x: KElement) -> SplitReport:
    """Two orders of fully merging three symbolic points agree."""
    if cfg.n != 3:
        raise FactorizationError("three points are required")
    c1, y = ran_merge(cfg, x, 2, 1)
    _, left = ran_merge(c1, y, 1, 0)
    c2, z = ran_merge(cfg, x, 1, 0)
    _, right = ran_merge(c2, z, 1, 0)
    return SplitReport(cfg.label(), "merge paths", left.text(), right.text(), left == right, 0)


def check_expand_merge(cfg: SigmaConfig, x: KElement, M: int = 6) -> SplitReport:
    """Expanding at a1 commutes with merging a3 into a2 (a fiber away from a1)."""
    if cfg.n != 3:
        raise FactorizationError("three points are required")
    bindings = {next(iter(cfg.points[2].free_symbols())): cfg.points[1]}
    first = local_expansion(cfg, x, 0, M)
    left = {m: c.substitute(bindings) for m, c in _expansion_coeffs(first, M).items()}
    left = {m: c for m, c in left.items() if not c.is_zero()}
    merged_cfg, y = ran_merge(cfg, x, 2, 1)
    right = _expansion_coeffs(local_expansion(merged_cfg, y, 0, M), M)
    return SplitReport(cfg.label(), "expand then merge", _expansion_text(left), _expansion_text(right), left == right, M)


# ---------------------------------------------------------------------------
# sampling


def distinct_points(rng: random.Random, n: int) -> SigmaConfig:
    pts: list[Fraction] = []
    while len(pts) < n:
        p = Fraction(rng.randint(-6, 6), rng.randint(1, 3))
        if p not in pts:
            pts.append(p)
    return SigmaConfig(tuple(rational(p.numerator, p.denominator) for p in pts))


def random_function(rng: random.Random, cfg: SigmaConfig, terms: int = 3, max_pole: int = 2, max_degree: int = 2) -> KElement:
    out = KElement(cfg)
    for _ in range(terms):
        i = rng.randrange(cfg.n)
        m = rng.randint(-max_pole, max_degree)
        c = rng.choice([-2, -1, 1, 2, 3])
        out = out + KElement.local_power(cfg, i, m).scale(Scalar(c))
    return out


def sample_reports(g: LiePresentation, rng: random.Random, residue_samples: int = 200, bracket_samples: int = 50,
                   states: Sequence[VState] = (), N: int = 6, points: int = 2) -> list[SplitReport]:
    """The standard seeded sample set used by the factorization suite."""
    reports = []
    for _ in range(residue_samples):
        cfg = distinct_points(rng, rng.choice([2, 3]))
        reports.append(check_residue_additivity(cfg, random_function(rng, cfg), random_function(rng, cfg)))
    for s in range(bracket_samples):
        n = 2 + s % 2
        cfg = distinct_points(rng, n)
        a, b = rng.randrange(g.dim), rng.randrange(g.dim)
        reports.append(check_bracket_fact(g, cfg, a, random_function(rng, cfg), b, random_function(rng, cfg)))
        sym = SigmaConfig.symbolic(n)
        reports.append(check_bracket_ran(g, sym, a, random_function(rng, sym, 2), b, random_function(rng, sym, 2)))
    return reports
