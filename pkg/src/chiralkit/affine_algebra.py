"""The affine Lie algebra relative to a set of marked points and its truncated enveloping algebra.

A mode X_a (x) phi_j is stored as the pair ``(j, a)``; PBW words are tuples of
modes sorted ascending, so modes in g (x) phi^N R (index j >= n*N) sit at the
right end and the truncation left ideal is "any mode with j >= n*N".
The central element acts as the scalar 1.
"""

from __future__ import annotations

from typing import Iterable, Mapping

from .formal_geometry import FunctionBasis, GeometryError, KElement, SigmaConfig, function_basis, join_terms, parse_kelement
from .lie_core import LiePresentation
from .scalar_ring import ONE, ZERO, Scalar, as_scalar, scalar_text

ModeKey = tuple[int, int]  # (basis index j, lie index a)
Word = tuple[ModeKey, ...]


class AffineError(ValueError):
    pass


class PrecisionError(AffineError):
    pass


def _clean(d: dict) -> dict:
    return {k: v for k, v in d.items() if not v.is_zero()}


def _accumulate(out: dict, src: Mapping, scale: Scalar = ONE) -> None:
    for k, v in src.items():
        out[k] = out.get(k, ZERO) + v * scale


class AffineAlgebra:
    """g (x) K^poly + C*1 with [X f, Y g] = [X,Y] fg + kappa(X,Y) Res(g df).

    Holds the memo tables for normal ordering; one instance per (g, level, points).
    """

    def __init__(self, g: LiePresentation, cfg: SigmaConfig):
        self.g = g
        self.cfg = cfg
        self.basis: FunctionBasis = function_basis(cfg)
        self.n = cfg.n
        self._bracket: dict[tuple[ModeKey, ModeKey], tuple[dict, Scalar]] = {}
        self._left: dict[tuple[ModeKey, Word, int | None], dict[Word, Scalar]] = {}

    # modes ------------------------------------------------------------------
    def cutoff_index(self, N: int | None) -> int | None:
        return None if N is None else self.n * N

    def in_ideal(self, word: Word, N: int | None) -> bool:
        return N is not None and bool(word) and word[-1][0] >= self.n * N

    def mode_bracket(self, x: ModeKey, y: ModeKey) -> tuple[dict[ModeKey, Scalar], Scalar]:
        """[x, y] as (linear combination of modes, central scalar)."""
        key = (x, y)
        hit = self._bracket.get(key)
        if hit is not None:
            return hit
        (j, a), (k, b) = x, y
        lin: dict[ModeKey, Scalar] = {}
        struct = self.g.bracket_basis(a, b)
        if struct:
            prod = self.basis.mul(j, k)
            for c, coeff in struct:
                for l, v in prod.items():
                    lin[(l, c)] = lin.get((l, c), ZERO) + coeff * v
        central = ZERO
        form = self.g.killing[a][b]
        if not form.is_zero():
            cocycle = self.basis.cocycle(j, k)
            if not cocycle.is_zero():
                central = self.g.level * form * cocycle
        out = (_clean(lin), central)
        self._bracket[key] = out
        return out

    # normal ordering ----------------------------------------------------------
    def left_mul_mode(self, x: ModeKey, word: Word, N: int | None) -> dict[Word, Scalar]:
        """x * word, normal ordered, modulo the truncation ideal."""
        memo_key = (x, word, N)
        hit = self._left.get(memo_key)
        if hit is not None:
            return hit
        if not word or x <= word[0]:
            new = (x,) + word
            out = {} if self.in_ideal(new, N) else {new: ONE}
        else:
            first, rest = word[0], word[1:]
            out: dict[Word, Scalar] = {}
            # x w1 rest = w1 (x rest) + [x, w1] rest
            for w, c in self.left_mul_mode(x, rest, N).items():
                _accumulate(out, self.left_mul_mode(first, w, N), c)
            lin, central = self.mode_bracket(x, first)
            for m, c in lin.items():
                _accumulate(out, self.left_mul_mode(m, rest, N), c)
            if not central.is_zero() and not self.in_ideal(rest, N):
                out[rest] = out.get(rest, ZERO) + central
            out = _clean(out)
        self._left[memo_key] = out
        return out

    def left_mul_word(self, word: Iterable[ModeKey], terms: Mapping[Word, Scalar], N: int | None) -> dict[Word, Scalar]:
        cur = dict(terms)
        for x in reversed(tuple(word)):
            nxt: dict[Word, Scalar] = {}
            for w, c in cur.items():
                _accumulate(nxt, self.left_mul_mode(x, w, N), c)
            cur = _clean(nxt)
        return cur

    def normal_order(self, word: Iterable[ModeKey], N: int | None = None) -> "UEElement":
        return UEElement(self, self.left_mul_word(word, {(): ONE}, N), N)

    # constructors -------------------------------------------------------------
    def unit(self, N: int | None = None) -> "UEElement":
        return UEElement(self, {(): ONE}, N)

    def scalar(self, c, N: int | None = None) -> "UEElement":
        return UEElement(self, _clean({(): as_scalar(c)}), N)

    def mode(self, a: int | str, j: int, N: int | None = None, coeff=ONE) -> "UEElement":
        if isinstance(a, str):
            a = self.g.index(a)
        word = ((j, a),)
        if self.in_ideal(word, N):
            return UEElement(self, {}, N)
        return UEElement(self, _clean({word: as_scalar(coeff)}), N)

    def current(self, a: int | str, f: KElement, N: int | None = None) -> "UEElement":
        """X_a (x) f expanded in the phi-basis."""
        if isinstance(a, str):
            a = self.g.index(a)
        terms = {}
        for j, c in self.basis.coords(f).items():
            word = ((j, a),)
            if not self.in_ideal(word, N):
                terms[word] = c
        return UEElement(self, _clean(terms), N)

    def current_bracket(self, a: int, f: KElement, b: int, g: KElement) -> tuple[dict[int, KElement], Scalar]:
        """[X_a f, X_b g] computed directly on functions: ({lie index: function}, central)."""
        from .formal_geometry import residue_sigma

        lin: dict[int, KElement] = {}
        fg = f * g
        for c, coeff in self.g.bracket_basis(a, b):
            lin[c] = fg.scale(coeff)
        central = self.g.level * self.g.killing[a][b] * residue_sigma(self.cfg, g, f)
        return lin, central

    # text ---------------------------------------------------------------------
    def mode_text(self, m: ModeKey) -> str:
        j, a = m
        return f"{self.g.labels[a]}[{self.function_text(j)}]"

    def function_text(self, j: int) -> str:
        if self.n == 1:
            return self.basis.element(j).compact_text()
        return self.basis.basis_text(j)

    def word_text(self, w: Word) -> str:
        return " ".join(self.mode_text(m) for m in w)

    def parse_mode(self, text: str) -> "UEElement":
        """``x[g]`` with g any function supported by the marked points."""
        text = text.strip()
        if not text.endswith("]") or "[" not in text:
            raise AffineError(f"cannot parse mode {text!r}; expected x[g]")
        label, body = text[:-1].split("[", 1)
        try:
            f = parse_kelement(body, self.cfg)
        except GeometryError as exc:
            raise AffineError(str(exc)) from exc
        return self.current(label.strip(), f)


class UEElement:
    """Linear combination of PBW words, known modulo the left ideal at cutoff N (None = exact)."""

    __slots__ = ("alg", "terms", "N")

    def __init__(self, alg: AffineAlgebra, terms: Mapping[Word, Scalar], N: int | None = None):
        self.alg = alg
        self.N = N
        if N is not None:
            terms = {w: c for w, c in terms.items() if not alg.in_ideal(w, N)}
        self.terms = _clean(dict(terms))

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, UEElement):
            return NotImplemented
        if self.N != other.N:
            N = _min_cutoff(self.N, other.N)
            return self.truncate(N).terms == other.truncate(N).terms
        return self.terms == other.terms

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.N))

    def truncate(self, N: int | None) -> "UEElement":
        if N is None:
            if self.N is not None:
                raise PrecisionError("cannot remove a truncation")
            return self
        if self.N is not None and N > self.N:
            raise PrecisionError("cannot raise the truncation of an element")
        return UEElement(self.alg, self.terms, N)

    def __add__(self, other):
        if not isinstance(other, UEElement):
            other = self.alg.scalar(other, self.N)
        N = _min_cutoff(self.N, other.N)
        out = dict(self.terms)
        _accumulate(out, other.terms)
        return UEElement(self.alg, out, N)

    __radd__ = __add__

    def __neg__(self):
        return UEElement(self.alg, {w: -c for w, c in self.terms.items()}, self.N)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "UEElement":
        s = as_scalar(s)
        return UEElement(self.alg, {w: c * s for w, c in self.terms.items()}, self.N)

    def pole_depth(self) -> int:
        """max over words of sum of max(0, -val) over modes."""
        best = 0
        for w in self.terms:
            depth = sum(max(0, -self.alg.basis.val(j)) for j, _ in w)
            best = max(best, depth)
        return best

    def __mul__(self, other):
        if not isinstance(other, UEElement):
            return self.scale(other)
        if self.alg is not other.alg:
            raise AffineError("elements of different algebras")
        N = other.N
        if self.N is not None:
            bound = self.N - other.pole_depth()
            if bound < 1:
                raise PrecisionError("precision exhausted")
            N = _min_cutoff(N, bound)
        out: dict[Word, Scalar] = {}
        for w, c in self.terms.items():
            _accumulate(out, self.alg.left_mul_word(w, other.terms, N), c)
        return UEElement(self.alg, out, N)

    def __rmul__(self, other):
        return self.scale(other)

    def commutator(self, other: "UEElement") -> "UEElement":
        return self * other - other * self

    def scalar_part(self) -> Scalar:
        return self.terms.get((), ZERO)

    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def substitute(self, bindings) -> "UEElement":
        return UEElement(self.alg, {w: c.substitute(bindings) for w, c in self.terms.items()}, self.N)

    def text(self) -> str:
        if not self.terms:
            return "0"
        terms = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            c = self.terms[w]
            ct = scalar_text(c)
            wrapped = f"({ct})" if any(op in ct[1:] for op in " +-/") or "ε" in ct else ct
            if not w:
                terms.append(f"{ct}·1" if ct not in ("1", "-1") else f"{ct}·1")
                continue
            body = self.alg.word_text(w)
            if ct == "1":
                terms.append(body)
            elif ct == "-1":
                terms.append(f"-{body}")
            elif ct.startswith("-") and wrapped == ct:
                terms.append(f"-{ct[1:]}·{body}")
            else:
                terms.append(f"{wrapped}·{body}")
        return join_terms(sorted(terms, key=_text_order))

    def to_json(self) -> list:
        return [
            {"word": [[self.alg.g.labels[a], j] for j, a in w], "coeff": scalar_text(c)}
            for w, c in sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ]

    def __repr__(self):
        return f"UEElement({self.text()}, N={self.N})"


def _text_order(term: str) -> tuple:
    # words first, scalar multiples of the unit last
    return (term.endswith("·1") and "[" not in term,)


def _min_cutoff(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def mode_bracket(alg: AffineAlgebra, x: UEElement, y: UEElement) -> UEElement:
    """Bracket of two linear combinations of single modes (exact)."""
    out: dict[Word, Scalar] = {}
    for wx, cx in x.terms.items():
        for wy, cy in y.terms.items():
            if len(wx) != 1 or len(wy) != 1:
                raise AffineError("mode_bracket expects linear combinations of single modes")
            lin, central = alg.mode_bracket(wx[0], wy[0])
            for m, c in lin.items():
                out[(m,)] = out.get((m,), ZERO) + cx * cy * c
            if not central.is_zero():
                out[()] = out.get((), ZERO) + cx * cy * central
    return UEElement(alg, out, _min_cutoff(x.N, y.N))


def pbw_normal_order(alg: AffineAlgebra, word: Iterable[ModeKey], N: int | None = None) -> UEElement:
    return alg.normal_order(word, N)


def ue_multiply(x: UEElement, y: UEElement) -> UEElement:
    return x * y


def apply_to_vacuum(x: UEElement):
    """Image in the vacuum module: kill every word containing a nonnegative mode."""
    from .vertex_algebra import VState

    alg = x.alg
    if alg.n != 1:
        raise AffineError("the vacuum quotient is available for a single marked point only")
    if x.N is not None and x.N < 0:
        raise PrecisionError("precision exhausted")
    out = {}
    for w, c in x.terms.items():
        if any(j >= 0 for j, _ in w):
            continue
        out[w] = c
    return VState(alg.g, out)
