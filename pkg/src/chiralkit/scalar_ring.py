"""Exact coefficients: rational functions over QQ in the level and point symbols,
optionally extended by a single square-zero nilpotent ``eps``.

Pure rationals are kept as ``gmpy2.mpq`` (the hot path of every PBW kernel);
anything involving a symbol is a reduced fraction of sparse sympy polynomials.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Union

from gmpy2 import mpq
from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

MAX_POINTS = 4
SYMBOL_NAMES = ("k",) + tuple(f"a{i}" for i in range(1, MAX_POINTS + 1))

POLY_RING, *_GENS = ring(",".join(SYMBOL_NAMES), QQ)
_GEN_BY_NAME = dict(zip(SYMBOL_NAMES, _GENS))
_ONE_POLY = POLY_RING.one


class ScalarError(ArithmeticError):
    pass


class _Frac:
    """num/den with den monic (lex leading coefficient 1) and gcd(num, den) = 1.

    Never constant: a constant fraction is always demoted to ``mpq``.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: PolyElement, den: PolyElement):
        self.num = num
        self.den = den
        self._hash = None

    def __eq__(self, other):
        return isinstance(other, _Frac) and self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash


Raw = Union[mpq, _Frac]
_ZERO = mpq(0)
_ONE = mpq(1)


def _make(num: PolyElement, den: PolyElement, reduce: bool = True) -> Raw:
    if not num:
        return _ZERO
    if reduce and not den.is_ground:
        num, den = num.cancel(den)
    lc = den.LC
    if lc != 1:
        num = num.quo_ground(lc)
        den = den.quo_ground(lc)
    if den.is_ground and num.is_ground:
        return mpq(num.LC)
    return _Frac(num, den)


def _as_frac(x: Raw):
    if isinstance(x, _Frac):
        return x.num, x.den
    return POLY_RING(x), _ONE_POLY


def _add(x: Raw, y: Raw) -> Raw:
    if type(x) is not _Frac and type(y) is not _Frac:
        return x + y
    xn, xd = _as_frac(x)
    yn, yd = _as_frac(y)
    if xd == yd:
        return _make(xn + yn, xd, reduce=not xd.is_ground)
    return _make(xn * yd + yn * xd, xd * yd)


def _mul(x: Raw, y: Raw) -> Raw:
    tx, ty = type(x) is _Frac, type(y) is _Frac
    if not tx and not ty:
        return x * y
    if not tx:
        if not x:
            return _ZERO
        return _Frac(y.num * x, y.den)
    if not ty:
        if not y:
            return _ZERO
        return _Frac(x.num * y, x.den)
    if x.den.is_ground and y.den.is_ground:
        return _make(x.num * y.num, _ONE_POLY, reduce=False)
    return _make(x.num * y.num, x.den * y.den)


def _neg(x: Raw) -> Raw:
    if type(x) is _Frac:
        return _Frac(-x.num, x.den)
    return -x


def _inv(x: Raw) -> Raw:
    if type(x) is _Frac:
        return _make(x.den, x.num, reduce=False)
    if not x:
        raise ScalarError("not invertible")
    return 1 / x


def _coerce_raw(value) -> Raw:
    if isinstance(value, (_Frac,)):
        return value
    if isinstance(value, bool):
        return mpq(int(value))
    if isinstance(value, int):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if type(value) is type(_ZERO):
        return value
    if isinstance(value, PolyElement):
        return _make(value, _ONE_POLY, reduce=False)
    raise TypeError(f"cannot build a scalar from {type(value).__name__}")


class Scalar:
    """Immutable element of QQ(k, a1..a4)[eps]/(eps^2)."""

    __slots__ = ("re", "ep")

    def __init__(self, value=0, eps=None):
        if isinstance(value, Scalar):
            self.re, self.ep = value.re, value.ep
            return
        self.re = _coerce_raw(value)
        ep = None if eps is None else _coerce_raw(eps)
        self.ep = None if ep is not None and type(ep) is not _Frac and not ep else ep

    @classmethod
    def _raw(cls, re: Raw, ep: Raw | None = None) -> "Scalar":
        s = object.__new__(cls)
        s.re = re
        if ep is not None and type(ep) is not _Frac and not ep:
            ep = None
        s.ep = ep
        return s

    # arithmetic --------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar(other)
        if self.ep is None and other.ep is None:
            return Scalar._raw(_add(self.re, other.re))
        if self.ep is None:
            ep = other.ep
        elif other.ep is None:
            ep = self.ep
        else:
            ep = _add(self.ep, other.ep)
        return Scalar._raw(_add(self.re, other.re), ep)

    __radd__ = __add__

    def __neg__(self):
        return Scalar._raw(_neg(self.re), None if self.ep is None else _neg(self.ep))

    def __sub__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar(other)
        return self + (-other)

    def __rsub__(self, other):
        return Scalar(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar(other)
        re = _mul(self.re, other.re)
        if self.ep is None and other.ep is None:
            return Scalar._raw(re)
        ep = None
        if self.ep is not None:
            ep = _mul(self.ep, other.re)
        if other.ep is not None:
            term = _mul(self.re, other.ep)
            ep = term if ep is None else _add(ep, term)
        return Scalar._raw(re, ep)

    __rmul__ = __mul__

    def inv(self) -> "Scalar":
        if type(self.re) is not _Frac and not self.re:
            raise ScalarError("not invertible")
        r = _inv(self.re)
        if self.ep is None:
            return Scalar._raw(r)
        return Scalar._raw(r, _neg(_mul(self.ep, _mul(r, r))))

    def __truediv__(self, other):
        if not isinstance(other, Scalar):
            other = Scalar(other)
        return self * other.inv()

    def __rtruediv__(self, other):
        return Scalar(other) * self.inv()

    def __pow__(self, n: int):
        if n < 0:
            return self.inv() ** (-n)
        result = ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # predicates ----------------------------------------------------------
    def is_zero(self) -> bool:
        return type(self.re) is not _Frac and not self.re and self.ep is None

    def __bool__(self):
        return not self.is_zero()

    def is_rational(self) -> bool:
        return type(self.re) is not _Frac and self.ep is None

    def has_eps(self) -> bool:
        return self.ep is not None

    def __eq__(self, other):
        if not isinstance(other, Scalar):
            try:
                other = Scalar(other)
            except TypeError:
                return NotImplemented
        return self.re == other.re and self.ep == other.ep

    def __hash__(self):
        return hash((self.re, self.ep))

    # parts ---------------------------------------------------------------
    @property
    def real(self) -> "Scalar":
        return Scalar._raw(self.re)

    @property
    def eps(self) -> "Scalar":
        return Scalar._raw(_ZERO if self.ep is None else self.ep)

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ScalarError("scalar is not a plain rational")
        return Fraction(int(self.re.numerator), int(self.re.denominator))

    def numerator_denominator(self):
        """(numerator, denominator) polynomials of the eps-free part."""
        return _as_frac(self.re)

    def substitute(self, bindings: Mapping[str, object]) -> "Scalar":
        return Scalar._raw(_subs(self.re, bindings), None if self.ep is None else _subs(self.ep, bindings))

    def free_symbols(self) -> set[str]:
        out = set()
        for part in (self.re, self.ep):
            if type(part) is _Frac:
                for poly in (part.num, part.den):
                    for monom in poly.monoms():
                        out.update(n for n, e in zip(SYMBOL_NAMES, monom) if e)
        return out

    # text ------------------------------------------------------------------
    def __repr__(self):
        return f"Scalar({self})"

    def __str__(self):
        return scalar_text(self)


ZERO = Scalar(0)
ONE = Scalar(1)
EPS = Scalar(0, 1)


def symbol(name: str) -> Scalar:
    if name not in _GEN_BY_NAME:
        raise ScalarError(f"unknown symbol {name!r}; available: {', '.join(SYMBOL_NAMES)}")
    return Scalar._raw(_Frac(_GEN_BY_NAME[name], _ONE_POLY))


def level_symbol() -> Scalar:
    return symbol("k")


def point_symbol(i: int) -> Scalar:
    return symbol(f"a{i}")


def rational(p: int, q: int = 1) -> Scalar:
    return Scalar._raw(mpq(p, q))


def _subs(x: Raw, bindings: Mapping[str, object]) -> Raw:
    if type(x) is not _Frac:
        return x
    num, den = x.num, x.den
    for name, value in bindings.items():
        gen = _GEN_BY_NAME[name]
        value = value if isinstance(value, Scalar) else Scalar(value)
        if value.ep is not None:
            raise ScalarError("cannot substitute a nilpotent value")
        vn, vd = _as_frac(value.re)
        if vd.is_ground:
            # substitution of a polynomial value keeps everything polynomial
            num = num.compose(gen, vn.quo_ground(vd.LC))
            den = den.compose(gen, vn.quo_ground(vd.LC))
        else:
            # clear the denominator of the substituted value degree by degree
            d_num, d_den = num.degree(gen), den.degree(gen)
            top = max(d_num, d_den)
            num = _homog_subs(num, gen, vn, vd, top)
            den = _homog_subs(den, gen, vn, vd, top)
    if not den:
        raise ScalarError("pole at substitution")
    return _make(num, den)


def _homog_subs(p: PolyElement, gen, vn, vd, top: int) -> PolyElement:
    out = POLY_RING.zero
    idx = POLY_RING.gens.index(gen)
    for monom, coeff in p.terms():
        e = monom[idx]
        rest = list(monom)
        rest[idx] = 0
        out += POLY_RING({tuple(rest): coeff}) * vn**e * vd ** (top - e)
    return out


# ---------------------------------------------------------------------------
# textual form


def _rational_text(c) -> str:
    c = mpq(c)
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def poly_text(p: PolyElement) -> str:
    """Expanded polynomial, lex order, e.g. ``2k^2 - (1/2)a1*a2 + 3``."""
    if not p:
        return "0"
    pieces = []
    for monom, coeff in p.terms():
        names = [n if e == 1 else f"{n}^{e}" for n, e in zip(SYMBOL_NAMES, monom) if e]
        mono = "*".join(names)
        c = mpq(coeff)
        sign = "-" if c < 0 else "+"
        c = abs(c)
        if not mono:
            body = _rational_text(c)
        elif c == 1:
            body = mono
        elif c.denominator == 1:
            body = f"{c.numerator}{mono}"
        else:
            body = f"({_rational_text(c)}){mono}"
        pieces.append((sign, body))
    first_sign, first = pieces[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text


def _raw_text(x: Raw) -> str:
    if type(x) is not _Frac:
        return _rational_text(x)
    num = poly_text(x.num)
    if x.den == _ONE_POLY:
        return num
    den = poly_text(x.den)
    if len(x.num.terms()) > 1:
        num = f"({num})"
    if len(x.den.terms()) > 1 or "*" in den or "^" in den:
        den = f"({den})"
    return f"{num}/{den}"


def scalar_text(x: Scalar) -> str:
    """``p/q + (r/s)ε`` with the eps part omitted when zero."""
    base = _raw_text(x.re)
    if x.ep is None:
        return base
    eps = _raw_text(x.ep)
    if type(x.re) is not _Frac and not x.re:
        return f"({eps})ε"
    return f"{base} + ({eps})ε"


def locate_syntax_error(text: str) -> int | None:
    """Index of the first character that cannot continue an arithmetic expression, or None."""
    stack: list[int] = []
    prev = None  # None, "operand", "op", "open"
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isalnum() or c in "._ε":
            prev = "operand"
        elif c == "(":
            stack.append(i)
            prev = "open"
        elif c == ")":
            if not stack or prev in ("op", "open"):
                return i
            stack.pop()
            prev = "operand"
        elif c in "+-":
            prev = "op"
        elif c in "*/^":
            if prev in (None, "op", "open"):
                return i
            if c == "*" and text[i + 1 : i + 2] == "*":
                i += 1
            prev = "op"
        else:
            return i
        i += 1
    if prev == "op" or prev is None:
        return len(text)
    if stack:
        return stack[-1]
    return None


def sympy_parse(text: str, names: dict, evaluate: bool = True):
    """sympy parser with implicit multiplication (``4k``, ``2t``)."""
    from sympy.parsing.sympy_parser import implicit_multiplication, parse_expr, standard_transformations

    return parse_expr(
        text,
        local_dict=names,
        transformations=standard_transformations + (implicit_multiplication,),
        evaluate=evaluate,
    )


def parse_scalar(text: str) -> Scalar:
    """Parse a rational expression in k, a1..a4 (and ``eps``)."""
    from sympy import S, Symbol, together, fraction, expand, Poly

    pos = locate_syntax_error(text)
    if pos is not None:
        raise ScalarError(f"cannot parse scalar {text!r}: syntax error at position {pos}")
    text = text.strip().replace("^", "**").replace("ε", "eps")
    names = {n: Symbol(n) for n in SYMBOL_NAMES}
    eps_sym = Symbol("eps")
    names["eps"] = eps_sym
    try:
        expr = sympy_parse(text, names)
    except Exception as exc:  # sympify raises a zoo of types
        raise ScalarError(f"cannot parse scalar {text!r}: {exc}") from exc
    extra = expr.free_symbols - set(names.values())
    if extra:
        raise ScalarError(f"unknown symbols in {text!r}: {sorted(map(str, extra))}")
    if expr.has(S.ComplexInfinity, S.NaN, S.Infinity, S.NegativeInfinity):
        raise ScalarError(f"division by zero in {text!r}")
    expr = expand(together(expr))
    re_expr = expr.subs(eps_sym, 0)
    ep_expr = expand(together(expr.diff(eps_sym).subs(eps_sym, 0)))

    def to_scalar(e) -> Scalar:
        n, d = fraction(together(e))
        gens = [names[s] for s in SYMBOL_NAMES]
        pn = POLY_RING.from_dict(Poly(n, *gens).as_dict())
        pd = POLY_RING.from_dict(Poly(d, *gens).as_dict())
        if not pd:
            raise ScalarError("not invertible")
        return Scalar._raw(_make(pn, pd))

    return Scalar._raw(to_scalar(re_expr).re, to_scalar(ep_expr).re)


def as_scalar(value) -> Scalar:
    if isinstance(value, Scalar):
        return value
    if isinstance(value, str):
        return parse_scalar(value)
    return Scalar(value)


__all__ = [
    "Scalar",
    "ScalarError",
    "ZERO",
    "ONE",
    "EPS",
    "SYMBOL_NAMES",
    "MAX_POINTS",
    "symbol",
    "level_symbol",
    "point_symbol",
    "rational",
    "parse_scalar",
    "as_scalar",
    "scalar_text",
    "poly_text",
]
