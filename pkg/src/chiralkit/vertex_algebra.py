"""The vacuum vertex algebra V^k(g), its n-th products and the field map into the enveloping algebra.

States are linear combinations of PBW words of negative modes applied to the
vacuum; a word is a tuple of ``(j, a)`` meaning x^a_(j) with j < 0, sorted
ascending (so x_(-n1) ... x_(-nr) with n1 >= ... >= nr).
"""

from __future__ import annotations

import re
from math import comb, factorial
from typing import Iterable, Mapping

from .affine_algebra import AffineAlgebra, PrecisionError, UEElement, Word, _accumulate, _clean
from .formal_geometry import KElement, Poly, SigmaConfig, function_basis, join_terms
from .lie_core import LiePresentation
from .linear_algebra import echelon_rows
from .scalar_ring import ONE, ZERO, Scalar, as_scalar, parse_scalar, scalar_text


class VertexError(ValueError):
    pass


def word_degree(w: Word) -> int:
    return -sum(j for j, _ in w)


# ---------------------------------------------------------------------------
# states


def _wrap_coeff(ct: str) -> str:
    return f"({ct})" if any(op in ct[1:] for op in " +-/") or "ε" in ct else ct


class VState:
    """Element of the vacuum module: {word: Scalar}."""

    __slots__ = ("g", "terms")

    def __init__(self, g: LiePresentation, terms: Mapping[Word, Scalar] | None = None):
        self.g = g
        self.terms = _clean(dict(terms or {}))

    @classmethod
    def vacuum(cls, g: LiePresentation) -> "VState":
        return cls(g, {(): ONE})

    @classmethod
    def monomial(cls, g: LiePresentation, w: Word, coeff=ONE) -> "VState":
        return cls(g, {tuple(w): as_scalar(coeff)})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, VState):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: "VState") -> "VState":
        out = dict(self.terms)
        _accumulate(out, other.terms)
        return VState(self.g, out)

    def __neg__(self):
        return VState(self.g, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "VState":
        s = as_scalar(s)
        return VState(self.g, {w: c * s for w, c in self.terms.items()})

    __rmul__ = scale

    def degree(self) -> int:
        return max((word_degree(w) for w in self.terms), default=0)

    def is_homogeneous(self) -> bool:
        return len({word_degree(w) for w in self.terms}) <= 1

    def substitute(self, bindings) -> "VState":
        return VState(self.g, {w: c.substitute(bindings) for w, c in self.terms.items()})

    def text(self) -> str:
        if not self.terms:
            return "0"
        terms = []
        for w in sorted(self.terms, key=lambda w: (word_degree(w), len(w), w)):
            body = word_text(self.g, w)
            ct = scalar_text(self.terms[w])
            if ct == "1":
                terms.append(body)
            elif ct == "-1":
                terms.append(f"-{body}")
            elif ct.startswith("-") and _wrap_coeff(ct) == ct:
                terms.append(f"-{ct[1:]}·{body}")
            else:
                terms.append(f"{_wrap_coeff(ct)}·{body}")
        return join_terms(terms)

    def __repr__(self):
        return f"VState({self.text()})"


def word_text(g: LiePresentation, w: Word) -> str:
    return "".join(f"{g.labels[a]}({j})" for j, a in w) + "|0>"


_MODE_RE = re.compile(r"([A-Za-z][A-Za-z0-9]*)\((-?\d+)\)")


class VStateO:
    """Element of V (x) O: {word: polynomial in t}."""

    __slots__ = ("g", "terms")

    def __init__(self, g: LiePresentation, terms: Mapping[Word, Poly] | None = None):
        self.g = g
        self.terms = {w: p for w, p in (terms or {}).items() if not p.is_zero()}

    @classmethod
    def from_state(cls, v: VState, p: Poly | None = None) -> "VStateO":
        p = p if p is not None else Poly.constant(ONE)
        return cls(v.g, {w: p * c for w, c in v.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, VStateO):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other: "VStateO") -> "VStateO":
        out = dict(self.terms)
        for w, p in other.terms.items():
            out[w] = out[w] + p if w in out else p
        return VStateO(self.g, out)

    def __neg__(self):
        return VStateO(self.g, {w: -p for w, p in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self) -> bool:
        return not self.terms

    def scale(self, p) -> "VStateO":
        if not isinstance(p, Poly):
            p = Poly.constant(p)
        return VStateO(self.g, {w: q * p for w, q in self.terms.items()})

    def map_polys(self, fn) -> "VStateO":
        return VStateO(self.g, {w: fn(p) for w, p in self.terms.items()})

    def text(self) -> str:
        if not self.terms:
            return "0"
        terms = []
        for w in sorted(self.terms, key=lambda w: (word_degree(w), len(w), w)):
            body = word_text(self.g, w)
            pt = self.terms[w].text()
            if pt == "1":
                terms.append(body)
            elif pt == "-1":
                terms.append(f"-{body}")
            else:
                terms.append(f"{_wrap_coeff(pt)}·{body}")
        return join_terms(terms)

    def __repr__(self):
        return f"VStateO({self.text()})"


# ---------------------------------------------------------------------------
# the vacuum module


class VacuumModule:
    """V^k(g) over a single point with coordinate t; memoizes mode actions and n-th products."""

    def __init__(self, g: LiePresentation):
        self.g = g
        self.alg = AffineAlgebra(g, SigmaConfig.origin())
        self._nprod: dict[tuple[Word, Word, int], dict[Word, Scalar]] = {}
        self._basis: dict[int, list[Word]] = {}
        self._T: dict[Word, dict[Word, Scalar]] = {}

    # parsing and bases --------------------------------------------------------
    def parse(self, text: str) -> VState:
        """Parse ``e(-1)f(-2)|0>``, sums and scalar multiples such as ``1/2 h(-1)h(-1)|0>``."""
        out = VState(self.g)
        for sign, coeff, body in _split_state_terms(text):
            modes = []
            pos = 0
            body = body.strip()
            if not body.endswith("|0>"):
                raise VertexError(f"state must end with |0>: {body!r}")
            core = body[:-3].replace(" ", "")
            while pos < len(core):
                m = _MODE_RE.match(core, pos)
                if not m:
                    raise VertexError(f"cannot parse mode at position {pos} in {body!r}")
                modes.append((int(m.group(2)), self.g.index(m.group(1))))
                pos = m.end()
            try:
                c = parse_scalar(coeff) if coeff else ONE
            except ArithmeticError as exc:
                raise VertexError(f"bad coefficient in {body!r}: {exc}") from exc
            if sign < 0:
                c = -c
            out = out + self.word_state(modes).scale(c)
        return out

    def word_state(self, modes: Iterable[tuple[int, int]]) -> VState:
        """Apply the modes (rightmost first) to the vacuum."""
        terms = self.alg.left_mul_word(tuple(modes), {(): ONE}, 0)
        return VState(self.g, terms)

    def basis(self, d: int) -> list[Word]:
        """PBW monomials of degree d in canonical order."""
        if d not in self._basis:
            dim = self.g.dim
            out: list[Word] = []

            def rec(remaining: int, max_key: tuple[int, int] | None, acc: list):
                if remaining == 0:
                    out.append(tuple(acc))
                    return
                # modes ascending by (j, a): j = -n; next mode must be >= previous
                for n in range(remaining, 0, -1):
                    for a in range(dim):
                        key = (-n, a)
                        if max_key is not None and key < max_key:
                            continue
                        acc.append(key)
                        rec(remaining - n, key, acc)
                        acc.pop()

            rec(d, None, [])
            self._basis[d] = sorted(out)
            if d == 0:
                self._basis[d] = [()]
        return self._basis[d]

    def basis_up_to(self, d: int) -> list[Word]:
        out = []
        for e in range(d + 1):
            out.extend(self.basis(e))
        return out

    # operators ----------------------------------------------------------------
    def act(self, a: int, m: int, v: VState | Mapping[Word, Scalar]) -> VState:
        """x^a_(m) v."""
        terms = v.terms if isinstance(v, VState) else v
        out: dict[Word, Scalar] = {}
        for w, c in terms.items():
            _accumulate(out, self.alg.left_mul_mode((m, a), w, 0), c)
        return VState(self.g, out)

    def translation(self, v: VState) -> VState:
        out: dict[Word, Scalar] = {}
        for w, c in v.terms.items():
            _accumulate(out, self._translate_word(w), c)
        return VState(self.g, out)

    def _translate_word(self, w: Word) -> dict[Word, Scalar]:
        hit = self._T.get(w)
        if hit is None:
            out: dict[Word, Scalar] = {}
            for pos, (j, a) in enumerate(w):
                # T x_(j) |0>-words: [T, x_(j)] = -j x_(j-1)
                new = w[:pos] + ((j - 1, a),) + w[pos + 1 :]
                _accumulate(out, self.alg.left_mul_word(new, {(): ONE}, 0), Scalar(-j))
            hit = self._T[w] = _clean(out)
        return hit

    def nth_product(self, A: VState, B: VState, n: int) -> VState:
        out: dict[Word, Scalar] = {}
        for wa, ca in A.terms.items():
            for wb, cb in B.terms.items():
                _accumulate(out, self._nprod_words(wa, wb, n), ca * cb)
        return VState(self.g, out)

    def _nprod_terms(self, wa: Word, terms: Mapping[Word, Scalar], n: int) -> dict[Word, Scalar]:
        out: dict[Word, Scalar] = {}
        for wb, cb in terms.items():
            _accumulate(out, self._nprod_words(wa, wb, n), cb)
        return out

    def _act_terms(self, a: int, m: int, terms: Mapping[Word, Scalar]) -> dict[Word, Scalar]:
        out: dict[Word, Scalar] = {}
        for w, c in terms.items():
            _accumulate(out, self.alg.left_mul_mode((m, a), w, 0), c)
        return out

    def _nprod_words(self, wa: Word, wb: Word, n: int) -> dict[Word, Scalar]:
        key = (wa, wb, n)
        hit = self._nprod.get(key)
        if hit is not None:
            return hit
        da, db = word_degree(wa), word_degree(wb)
        if da + db - n - 1 < 0:
            out: dict[Word, Scalar] = {}
        elif not wa:
            out = {wb: ONE} if n == -1 else {}
        elif len(wa) == 1 and wa[0][0] == -1:
            out = self._act_terms(wa[0][1], n, {wb: ONE})
        else:
            (j, a), rest = wa[0], wa[1:]
            p = -j
            d_rest = da - p
            out = {}
            # (x_(-p) A')_(n) B = sum_j C(p+j-1, j) [x_(-p-j) A'_(n+j) B - (-1)^p A'_(n-p-j) x_(j) B]
            for i in range(0, max(d_rest + db - n, 0)):
                inner = self._nprod_words(rest, wb, n + i)
                if inner:
                    _accumulate(out, self._act_terms(a, -p - i, inner), Scalar(comb(p + i - 1, i)))
            sign = -1 if p % 2 == 0 else 1  # -(-1)^p
            for i in range(0, db + 1):
                inner = self.alg.left_mul_mode((i, a), wb, 0)
                if inner:
                    _accumulate(out, self._nprod_terms(rest, inner, n - p - i), Scalar(sign * comb(p + i - 1, i)))
            out = _clean(out)
        self._nprod[key] = out
        return out

    def product_max_index(self, A: VState, B: VState) -> int | None:
        """max{n >= 0 : A_(n) B != 0}, or None."""
        top = A.degree() + B.degree() - 1
        for n in range(top, -1, -1):
            if not self.nth_product(A, B, n).is_zero():
                return n
        return None

    def locality_order(self, A: VState, B: VState, cutoff: int = 6, window: int = 2, test_degree: int = 2) -> int | None:
        """Least n with sum_k C(n,k)(-1)^(n-k) [A_(a+k), B_(b+n-k)] = 0 on the test window.

        Returns None when no n <= cutoff works.
        """
        tests = [VState.monomial(self.g, w) for w in self.basis_up_to(test_degree)]
        for n in range(cutoff + 1):
            if self._locality_holds(A, B, n, window, tests):
                return n
        return None

    def _locality_holds(self, A, B, n, window, tests) -> bool:
        for a in range(-window, window + 1):
            for b in range(-window, window + 1):
                for C in tests:
                    acc = VState(self.g)
                    for k in range(n + 1):
                        coeff = comb(n, k) * (-1) ** (n - k)
                        r, s = a + k, b + n - k
                        lhs = self.nth_product(A, self.nth_product(B, C, s), r)
                        rhs = self.nth_product(B, self.nth_product(A, C, r), s)
                        acc = acc + (lhs - rhs).scale(coeff)
                    if not acc.is_zero():
                        return False
        return True

    def extended_nth_product(self, A: VStateO, B: VStateO, n: int) -> VStateO:
        """(X f)_(n)(Y g) = sum_k 1/k! X_(n+k)Y (x) g d^k f, for polynomial f."""
        out = VStateO(self.g)
        for wa, f in A.terms.items():
            for wb, gp in B.terms.items():
                for k in range(f.degree + 1):
                    prod = self._nprod_words(wa, wb, n + k)
                    if not prod:
                        continue
                    shift = gp * f.deriv(k) * (Scalar(1) / Scalar(factorial(k)))
                    out = out + VStateO(self.g, {w: shift * c for w, c in prod.items()})
        return out

    def extended_translation(self, v: VStateO) -> VStateO:
        """T on V (x) O acting on the V factor only."""
        out = VStateO(self.g)
        for w, p in v.terms.items():
            out = out + VStateO(self.g, {u: p * c for u, c in self._translate_word(w).items()})
        return out


def _split_state_terms(text: str):
    """Split ``a |0> + 2 b |0> - (1/2) c |0>`` into (sign, coefficient text, monomial text)."""
    text = text.replace("−", "-").replace("⟩", ">").replace("*", " ")
    pieces = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch in "+-" and depth == 0 and i > 0 and text[:i].strip():
            pieces.append(text[start:i])
            start = i
    pieces.append(text[start:])
    out = []
    for piece in pieces:
        piece = piece.strip()
        if not piece:
            continue
        sign = 1
        if piece[0] in "+-":
            sign = -1 if piece[0] == "-" else 1
            piece = piece[1:].strip()
        m = _MODE_RE.search(piece)
        bar = piece.find("|0>")
        if bar < 0:
            raise VertexError(f"state term must contain |0>: {piece!r}")
        cut = m.start() if m and m.start() < bar else bar
        coeff = piece[:cut].strip().rstrip("·").strip()
        if coeff.startswith("(") and coeff.endswith(")"):
            coeff = coeff[1:-1]
        out.append((sign, coeff, piece[cut:]))
    return out


# ---------------------------------------------------------------------------
# fields


class FieldMap:
    """Y_{Sigma,t}: V -> fields valued in U(g (x) K^poly) modulo the cutoff-N left ideal.

    Y(B)(phi_l) is computed by the normally ordered product recursion
    Y(x_(-p) B)(g) = sum_j X phi_j^v . Y(B)(D_p phi_j g) - (-1)^p sum_j Y(B)(phi_j^v g) . X D_p phi_j,
    with D_p = d^(p-1)/(p-1)!.
    """

    def __init__(self, g: LiePresentation, cfg: SigmaConfig, N: int):
        if N < 0:
            raise PrecisionError("cutoff must be nonnegative")
        self.g = g
        self.cfg = cfg
        self.N = N
        self.alg = _algebra(g, cfg)
        self.basis = self.alg.basis
        self.n = cfg.n
        self._memo: dict[tuple[Word, int], dict[Word, Scalar]] = {}
        self._dp: dict[tuple[int, int], dict[int, Scalar]] = {}

    def _vanish_bound(self, w: Word) -> int:
        """Y(w)(h) lies in the ideal once val(h) reaches this bound."""
        return max(0, len(w) * (self.N - 1)) + word_degree(w)

    def _divided_derivative(self, j: int, p: int) -> dict[int, Scalar]:
        key = (j, p)
        if key not in self._dp:
            d = self.basis.coords_deriv({j: ONE}, p - 1)
            scale = Scalar(1) / Scalar(factorial(p - 1))
            self._dp[key] = {l: c * scale for l, c in d.items()}
        return self._dp[key]

    def value_terms(self, w: Word, coords: Mapping[int, Scalar]) -> dict[Word, Scalar]:
        out: dict[Word, Scalar] = {}
        bound = self._vanish_bound(w)
        for l, c in coords.items():
            if self.basis.val(l) >= bound:
                continue
            _accumulate(out, self._basis_value(w, l), c)
        return _clean(out)

    def _basis_value(self, w: Word, l: int) -> dict[Word, Scalar]:
        key = (w, l)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        N, n = self.N, self.n
        alg = self.alg
        if not w:
            res = self.basis.residue_dt({l: ONE})
            out = {(): res} if not res.is_zero() else {}
        elif len(w) == 1 and w[0][0] == -1:
            a = w[0][1]
            out = {} if l >= n * N else {((l, a),): ONE}
        else:
            (j0, a), rest = w[0], w[1:]
            p = -j0
            val_l = self.basis.val(l)
            rest_bound = self._vanish_bound(rest)
            out = {}
            j = 0
            while self.basis.val(j) - p + 1 + val_l < rest_bound:
                h = self.basis.coords_mul(self._divided_derivative(j, p), {l: ONE})
                inner = self.value_terms(rest, h)
                if inner:
                    for k, c in self.basis.dual(j).items():
                        for u, cu in inner.items():
                            _accumulate(out, alg.left_mul_mode((k, a), u, N), c * cu)
                j += 1
            sign = Scalar(-1) if p % 2 == 0 else Scalar(1)  # -(-1)^p
            j = 0
            while self.basis.val(j) <= N + p - 1:
                q = {k: c for k, c in self._divided_derivative(j, p).items() if self.basis.val(k) < N}
                if q:
                    wcoords = self.basis.coords_mul(self.basis.dual(j), {l: ONE})
                    inner = self.value_terms(rest, wcoords)
                    if inner:
                        right = {((k, a),): c for k, c in q.items()}
                        for u, cu in inner.items():
                            _accumulate(out, alg.left_mul_word(u, right, N), cu * sign)
                j += 1
            out = _clean(out)
        self._memo[key] = out
        return out

    def __call__(self, v: VState, h: KElement | Mapping[int, Scalar]) -> UEElement:
        coords = self.basis.coords(h) if isinstance(h, KElement) else h
        out: dict[Word, Scalar] = {}
        for w, c in v.terms.items():
            _accumulate(out, self.value_terms(w, coords), c)
        return UEElement(self.alg, out, self.N)

    def at(self, v: VState, l: int) -> UEElement:
        return self(v, {l: ONE})


_ALGEBRAS: dict[tuple, AffineAlgebra] = {}


def _algebra(g: LiePresentation, cfg: SigmaConfig) -> AffineAlgebra:
    key = (g, cfg)
    alg = _ALGEBRAS.get(key)
    if alg is None:
        alg = _ALGEBRAS[key] = AffineAlgebra(g, cfg)
    return alg


_FIELD_MAPS: dict[tuple, FieldMap] = {}


def field_map(g: LiePresentation, cfg: SigmaConfig, N: int) -> FieldMap:
    key = (g, cfg, N)
    fm = _FIELD_MAPS.get(key)
    if fm is None:
        fm = _FIELD_MAPS[key] = FieldMap(g, cfg, N)
    return fm


class Field:
    """The field Y(A) at a fixed cutoff, as a callable on functions."""

    def __init__(self, state: VState, cfg: SigmaConfig, cutoff: int):
        self.state = state
        self.cfg = cfg
        self.cutoff = cutoff
        self._map = field_map(state.g, cfg, cutoff)

    @property
    def algebra(self) -> AffineAlgebra:
        return self._map.alg

    def __call__(self, h) -> UEElement:
        return self._map(self.state, h)

    def table(self, lo: int, hi: int) -> dict[int, UEElement]:
        return {l: self._map.at(self.state, l) for l in range(lo, hi)}

    def to_json(self, lo: int, hi: int) -> dict:
        return {self.algebra.function_text(l): self._map.at(self.state, l).text() for l in range(lo, hi)}


def field_of(A: VState, cfg: SigmaConfig, cutoff: int) -> Field:
    return Field(A, cfg, cutoff)


def truncated_commutator(u_state: VState, f, v_state: VState, g, cfg: SigmaConfig, N: int) -> UEElement:
    """[Y(u)(f), Y(v)(g)] modulo the cutoff-N ideal.

    The left factor of each product is evaluated at a cutoff raised by the pole
    depth of the right factor, so both products are exact modulo I_N.
    """
    fm = field_map(u_state.g, cfg, N)
    v_low = fm(v_state, g)
    u_low = fm(u_state, f)
    u_high = field_map(u_state.g, cfg, N + v_low.pole_depth())(u_state, f)
    v_high = field_map(u_state.g, cfg, N + u_low.pole_depth())(v_state, g)
    return (u_high * v_low - v_high * u_low).truncate(N)


# ---------------------------------------------------------------------------
# the Lie algebra of modes


class LieModeElement:
    """Finite combination of symbols A[f] in normal form, plus a multiple of the central unit.

    Normal form: A runs over a complement of T(V) chosen by echelon reduction,
    and |0>[f] is replaced by Res(f dt) times the unit.
    """

    __slots__ = ("space", "terms", "unit")

    def __init__(self, space: "ModeSpace", terms: Mapping[tuple[Word, int], Scalar], unit: Scalar = ZERO):
        self.space = space
        self.terms = _clean(dict(terms))
        self.unit = as_scalar(unit)

    def __eq__(self, other):
        if not isinstance(other, LieModeElement):
            return NotImplemented
        return self.terms == other.terms and self.unit == other.unit

    def is_zero(self) -> bool:
        return not self.terms and self.unit.is_zero()

    def __add__(self, other: "LieModeElement") -> "LieModeElement":
        out = dict(self.terms)
        _accumulate(out, other.terms)
        return LieModeElement(self.space, out, self.unit + other.unit)

    def __neg__(self):
        return LieModeElement(self.space, {k: -c for k, c in self.terms.items()}, -self.unit)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "LieModeElement":
        s = as_scalar(s)
        return LieModeElement(self.space, {k: c * s for k, c in self.terms.items()}, self.unit * s)

    def text(self) -> str:
        sp = self.space
        terms = []
        for (w, l), c in sorted(self.terms.items()):
            body = f"{word_text(sp.g, w)}[{sp.function_text(l)}]"
            ct = scalar_text(c)
            terms.append(body if ct == "1" else f"-{body}" if ct == "-1" else f"{_wrap_coeff(ct)}·{body}")
        if not self.unit.is_zero():
            terms.append(f"{_wrap_coeff(scalar_text(self.unit))}·1")
        return join_terms(terms)

    def __repr__(self):
        return f"LieModeElement({self.text()})"


class ModeSpace:
    """Symbols A[f] over a point configuration, with normal form, bracket and beta."""

    def __init__(self, V: VacuumModule, cfg: SigmaConfig):
        self.V = V
        self.g = V.g
        self.cfg = cfg
        self.basis = function_basis(cfg)
        self._complement: dict[int, tuple[list[Word], dict]] = {}

    def function_text(self, l: int) -> str:
        return _algebra(self.g, self.cfg).function_text(l)

    def _reduction(self, d: int):
        """(pivot words, reducer) with reducer[w] = (preimage under T in V_{d-1})."""
        if d not in self._complement:

            prev = self.V.basis(d - 1) if d >= 1 else []
            rows = []
            for w in prev:
                image = self.V._translate_word(w)
                if image:
                    rows.append((dict(image), {w: ONE}))
            order = {w: i for i, w in enumerate(self.V.basis(d))}
            self._complement[d] = echelon_rows(rows, order)
        return self._complement[d]

    def symbol(self, A: VState, f: KElement | Mapping[int, Scalar]) -> LieModeElement:
        """Normal form of A[f]."""
        coords = self.basis.coords(f) if isinstance(f, KElement) else dict(f)
        out: dict[tuple[Word, int], Scalar] = {}
        unit = ZERO
        pending = [(A.terms, coords, ONE)]
        while pending:
            terms, fc, scale = pending.pop()
            by_degree: dict[int, dict[Word, Scalar]] = {}
            for w, c in terms.items():
                by_degree.setdefault(word_degree(w), {})[w] = c
            for d, part in by_degree.items():
                if d == 0:
                    unit = unit + part.get((), ZERO) * scale * self.basis.residue_dt(fc)
                    continue
                pivots = self._reduction(d)
                remainder, preimage = _reduce_against(part, pivots)
                for w, c in remainder.items():
                    for l, fl in fc.items():
                        key = (w, l)
                        out[key] = out.get(key, ZERO) + c * fl * scale
                if preimage:
                    # (T u)[f] = -u[f']
                    pending.append((preimage, self.basis.coords_deriv(fc), -scale))
        return LieModeElement(self, out, unit)

    def bracket(self, x: LieModeElement, y: LieModeElement) -> LieModeElement:
        """[A[f], B[g]] = sum_k 1/k! (A_(k) B)[(d^k f) g]."""
        acc = LieModeElement(self, {})
        for (wa, la), ca in x.terms.items():
            A = VState.monomial(self.g, wa)
            for (wb, lb), cb in y.terms.items():
                B = VState.monomial(self.g, wb)
                k = 0
                df = {la: ONE}
                top = word_degree(wa) + word_degree(wb) - 1
                while k <= top and df:
                    prod = self.V.nth_product(A, B, k)
                    if not prod.is_zero():
                        fg = self.basis.coords_mul(df, {lb: ONE})
                        if fg:
                            scale = ca * cb / Scalar(factorial(k))
                            acc = acc + self.symbol(prod, fg).scale(scale)
                    k += 1
                    df = self.basis.coords_deriv(df)
        return acc

    def beta(self, x: LieModeElement, cutoff: int) -> UEElement:
        fm = field_map(self.g, self.cfg, cutoff)
        out = UEElement(fm.alg, {(): x.unit}, cutoff)
        for (w, l), c in x.terms.items():
            out = out + fm(VState.monomial(self.g, w), {l: ONE}).scale(c)
        return out

    def beta_commutator(self, x: LieModeElement, y: LieModeElement, cutoff: int) -> UEElement:
        """[beta(x), beta(y)] modulo the cutoff ideal, with precision raised where needed."""
        acc = UEElement(field_map(self.g, self.cfg, cutoff).alg, {}, cutoff)
        for (wa, la), ca in x.terms.items():
            for (wb, lb), cb in y.terms.items():
                comm = truncated_commutator(
                    VState.monomial(self.g, wa), {la: ONE}, VState.monomial(self.g, wb), {lb: ONE}, self.cfg, cutoff
                )
                acc = acc + comm.scale(ca * cb)
        return acc


def _reduce_against(part: Mapping[Word, Scalar], pivots) -> tuple[dict, dict]:
    """Split v = remainder (supported off pivots) + T(preimage)."""
    pivot_rows, order = pivots
    v = dict(part)
    preimage: dict[Word, Scalar] = {}
    for pivot, (row, pre) in pivot_rows:
        c = v.get(pivot)
        if c is None or c.is_zero():
            continue
        for w, x in row.items():
            v[w] = v.get(w, ZERO) - c * x
        for w, x in pre.items():
            preimage[w] = preimage.get(w, ZERO) + c * x
    return _clean(v), _clean(preimage)


def translation(V: VacuumModule, A: VState) -> VState:
    return V.translation(A)


def nth_product(V: VacuumModule, A: VState, B: VState, n: int) -> VState:
    return V.nth_product(A, B, n)


def locality_order(V: VacuumModule, A: VState, B: VState, cutoff: int = 6) -> int | None:
    return V.locality_order(A, B, cutoff)


def _binomial(m: int, j: int) -> int:
    """C(m, j) for any integer m and j >= 0."""
    if m >= 0:
        return comb(m, j)
    return (-1) ** j * comb(-m + j - 1, j)


def borcherds_sides(V: VacuumModule, A: VState, B: VState, C: VState, m: int, n: int) -> tuple[VState, VState]:
    """A_(m)B_(n)C - B_(n)A_(m)C against sum_j C(m, j) (A_(j)B)_(m+n-j)C."""
    lhs = V.nth_product(A, V.nth_product(B, C, n), m) - V.nth_product(B, V.nth_product(A, C, m), n)
    rhs = VState(V.g)
    top = V.product_max_index(A, B)
    if top is not None:
        for j in range(top + 1):
            coeff = _binomial(m, j)
            if coeff:
                rhs = rhs + V.nth_product(V.nth_product(A, B, j), C, m + n - j).scale(coeff)
    return lhs, rhs
