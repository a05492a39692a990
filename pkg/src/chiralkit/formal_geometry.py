"""Function rings over a finite set of marked points.

``Poly`` is a polynomial in t, ``KElement`` an element of A[t][1/phi] with
phi = prod(t - a_i) kept as polynomial part plus principal parts, and
``FunctionBasis`` the coordinate system given by phi_{m,i} = phi^m (t-a_1)...(t-a_i).
``TruncatedSeries`` carries formal coordinate changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb, factorial
from typing import Callable, Iterable, Sequence

from .scalar_ring import ONE, ZERO, Scalar, ScalarError, as_scalar, point_symbol, scalar_text

DEFAULT_ORDER = 12


class GeometryError(ValueError):
    pass


def _wrap(text: str) -> str:
    return f"({text})" if any(op in text[1:] for op in " +-/") or "ε" in text else text


def _coeff_term(c: Scalar, mono: str) -> str:
    """Render c*mono, mono possibly empty; returns (sign, body)."""
    text = scalar_text(c)
    if not mono:
        return text
    if text == "1":
        return mono
    if text == "-1":
        return f"-{mono}"
    if text.startswith("-") and not any(op in text[1:] for op in " +-/") and "ε" not in text:
        return f"-{text[1:]}{mono}"
    return f"{_wrap(text)}{mono}"


def join_terms(terms: Iterable[str]) -> str:
    out = ""
    for term in terms:
        if not out:
            out = term
        elif term.startswith("-") and not term.startswith("-(") or term.startswith("-("):
            out += f" - {term[1:]}"
        else:
            out += f" + {term}"
    return out or "0"


# ---------------------------------------------------------------------------
# polynomials in t


class Poly:
    """Dense polynomial over Scalar; immutable, trailing zeros stripped."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_scalar(x) for x in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        self.c = tuple(cs)

    @classmethod
    def _from(cls, cs: list) -> "Poly":
        while cs and cs[-1].is_zero():
            cs.pop()
        p = object.__new__(cls)
        p.c = tuple(cs)
        return p

    @classmethod
    def constant(cls, x) -> "Poly":
        return cls([x])

    @classmethod
    def monomial(cls, n: int, coeff=ONE) -> "Poly":
        return cls._from([ZERO] * n + [as_scalar(coeff)])

    @classmethod
    def linear_factor(cls, a: Scalar) -> "Poly":
        return cls._from([-a, ONE])

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def is_zero(self) -> bool:
        return not self.c

    def __bool__(self):
        return bool(self.c)

    def coeff(self, i: int) -> Scalar:
        return self.c[i] if 0 <= i < len(self.c) else ZERO

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.c == other.c
        return NotImplemented

    def __hash__(self):
        return hash(self.c)

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(other)
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        return Poly._from([x + b[i] if i < len(b) else x for i, x in enumerate(a)])

    __radd__ = __add__

    def __neg__(self):
        return Poly._from([-x for x in self.c])

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return Poly.constant(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            s = as_scalar(other)
            if s.is_zero():
                return Poly()
            return Poly._from([x * s for x in self.c])
        if not self.c or not other.c:
            return Poly()
        out = [ZERO] * (len(self.c) + len(other.c) - 1)
        for i, x in enumerate(self.c):
            if x.is_zero():
                continue
            for j, y in enumerate(other.c):
                out[i + j] = out[i + j] + x * y
        return Poly._from(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            return self.inv() ** (-n)
        out = Poly.constant(ONE)
        for _ in range(n):
            out = out * self
        return out

    def deriv(self, times: int = 1) -> "Poly":
        cs = list(self.c)
        for _ in range(times):
            cs = [cs[i] * i for i in range(1, len(cs))]
        return Poly._from(cs)

    def __call__(self, x) -> Scalar:
        x = as_scalar(x)
        acc = ZERO
        for coeff in reversed(self.c):
            acc = acc * x + coeff
        return acc

    def compose(self, q: "Poly") -> "Poly":
        acc = Poly()
        for coeff in reversed(self.c):
            acc = acc * q + coeff
        return acc

    def divmod(self, q: "Poly") -> tuple["Poly", "Poly"]:
        if not q.c:
            raise GeometryError("division by the zero polynomial")
        lead_inv = q.c[-1].inv()
        rem = list(self.c)
        dq = q.degree
        quo = [ZERO] * max(len(rem) - dq, 0)
        for i in range(len(rem) - 1, dq - 1, -1):
            coeff = rem[i] * lead_inv
            if coeff.is_zero():
                continue
            quo[i - dq] = coeff
            for j, y in enumerate(q.c):
                rem[i - dq + j] = rem[i - dq + j] - coeff * y
        return Poly._from(quo), Poly._from(rem[:dq])

    def taylor(self, a: Scalar) -> list[Scalar]:
        """Coefficients of the expansion in powers of (t - a)."""
        cs = list(self.c)
        out = []
        while cs:
            # synthetic division by (t - a)
            acc = ZERO
            quo = [ZERO] * (len(cs) - 1)
            for i in range(len(cs) - 1, -1, -1):
                acc = acc * a + cs[i]
                if i > 0:
                    quo[i - 1] = acc
            out.append(acc)
            cs = quo
        return out

    @classmethod
    def from_taylor(cls, coeffs: Sequence[Scalar], a: Scalar) -> "Poly":
        acc = Poly()
        lin = Poly.linear_factor(a)
        for coeff in reversed(list(coeffs)):
            acc = acc * lin + coeff
        return acc

    def inv(self) -> "Poly":
        """Inverse when the eps-free part is a nonzero constant."""
        real = [x.real for x in self.c]
        if any(not x.is_zero() for x in real[1:]) or not real or real[0].is_zero():
            raise ScalarError("not invertible")
        c0_inv = real[0].inv()
        eps_part = Poly._from([Scalar(0, 1) * x.eps for x in self.c])
        return Poly.constant(c0_inv) - eps_part * (c0_inv * c0_inv)

    def map_coeffs(self, fn: Callable[[Scalar], Scalar]) -> "Poly":
        return Poly._from([fn(x) for x in self.c])

    def substitute(self, bindings) -> "Poly":
        return self.map_coeffs(lambda x: x.substitute(bindings))

    def text(self, var: str = "t") -> str:
        terms = []
        for i in range(len(self.c) - 1, -1, -1):
            x = self.c[i]
            if x.is_zero():
                continue
            mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
            terms.append(_coeff_term(x, mono))
        return join_terms(terms)

    def __repr__(self):
        return f"Poly({self.text()})"


T_POLY = Poly.monomial(1)


# ---------------------------------------------------------------------------
# marked points


@dataclass(frozen=True)
class SigmaConfig:
    points: tuple[Scalar, ...]

    def __post_init__(self):
        if not self.points:
            raise GeometryError("at least one marked point is required")
        object.__setattr__(self, "points", tuple(as_scalar(p) for p in self.points))

    @classmethod
    def symbolic(cls, n: int) -> "SigmaConfig":
        return cls(tuple(point_symbol(i) for i in range(1, n + 1)))

    @classmethod
    def origin(cls) -> "SigmaConfig":
        return cls((ZERO,))

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def phi(self) -> Poly:
        out = Poly.constant(ONE)
        for a in self.points:
            out = out * Poly.linear_factor(a)
        return out

    def difference_inverse(self, i: int, j: int) -> Scalar:
        diff = self.points[i] - self.points[j]
        if diff.is_zero():
            raise GeometryError("points not disjoint")
        return diff.inv()

    def check_disjoint(self) -> None:
        for i in range(self.n):
            for j in range(i + 1, self.n):
                self.difference_inverse(i, j)

    def label(self) -> str:
        return "{" + ", ".join(scalar_text(p) for p in self.points) + "}"


# ---------------------------------------------------------------------------
# K^poly elements


def _trim(cs: list) -> tuple:
    while cs and cs[-1].is_zero():
        cs.pop()
    return tuple(cs)


class KElement:
    """polynomial part + per-point principal parts [c_1, c_2, ...] of (t-a_i)^{-m}."""

    __slots__ = ("cfg", "poly", "principal")

    def __init__(self, cfg: SigmaConfig, poly: Poly | None = None, principal: Sequence[Sequence] | None = None):
        self.cfg = cfg
        self.poly = poly if poly is not None else Poly()
        if principal is None:
            principal = [()] * cfg.n
        if len(principal) != cfg.n:
            raise GeometryError("one principal part per marked point is required")
        self.principal = tuple(_trim([as_scalar(x) for x in pp]) for pp in principal)

    # constructors -----------------------------------------------------------
    @classmethod
    def from_poly(cls, cfg: SigmaConfig, poly: Poly) -> "KElement":
        return cls(cfg, poly)

    @classmethod
    def constant(cls, cfg: SigmaConfig, x) -> "KElement":
        return cls(cfg, Poly.constant(x))

    @classmethod
    def pole(cls, cfg: SigmaConfig, i: int, m: int, coeff=ONE) -> "KElement":
        """coeff * (t - a_i)^{-m}, m >= 1."""
        pp = [()] * cfg.n
        pp[i] = tuple([ZERO] * (m - 1) + [as_scalar(coeff)])
        return cls(cfg, Poly(), pp)

    @classmethod
    def local_power(cls, cfg: SigmaConfig, i: int, m: int) -> "KElement":
        """(t - a_i)^m for any integer m."""
        if m >= 0:
            return cls(cfg, Poly.linear_factor(cfg.points[i]) ** m)
        return cls.pole(cfg, i, -m)

    # structure --------------------------------------------------------------
    def is_zero(self) -> bool:
        return self.poly.is_zero() and not any(self.principal)

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if not isinstance(other, KElement):
            return NotImplemented
        return self.cfg == other.cfg and self.poly == other.poly and self.principal == other.principal

    def __hash__(self):
        return hash((self.cfg, self.poly, self.principal))

    def pole_order(self, i: int) -> int:
        return len(self.principal[i])

    @property
    def max_pole_order(self) -> int:
        return max(len(pp) for pp in self.principal)

    def _check(self, other: "KElement"):
        if self.cfg != other.cfg:
            raise GeometryError("elements live over different point configurations")

    def __add__(self, other):
        if not isinstance(other, KElement):
            return self + KElement.constant(self.cfg, other)
        self._check(other)
        pps = []
        for a, b in zip(self.principal, other.principal):
            if len(a) < len(b):
                a, b = b, a
            pps.append([x + b[i] if i < len(b) else x for i, x in enumerate(a)])
        return KElement(self.cfg, self.poly + other.poly, pps)

    __radd__ = __add__

    def __neg__(self):
        return KElement(self.cfg, -self.poly, [[-x for x in pp] for pp in self.principal])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "KElement":
        s = as_scalar(s)
        return KElement(self.cfg, self.poly * s, [[x * s for x in pp] for pp in self.principal])

    def __mul__(self, other):
        if not isinstance(other, KElement):
            if isinstance(other, Poly):
                other = KElement(self.cfg, other)
            else:
                return self.scale(other)
        self._check(other)
        cfg = self.cfg
        n = cfg.n
        poly = self.poly * other.poly
        pps = [[ZERO] * (len(self.principal[i]) + len(other.principal[i])) for i in range(n)]
        extra_poly = Poly()

        def add_pole_times_poly(i: int, m: int, coeff: Scalar, p: Poly):
            # coeff (t-a_i)^{-m} * p
            nonlocal extra_poly
            if coeff.is_zero() or p.is_zero():
                return
            tay = p.taylor(cfg.points[i])
            for k, c in enumerate(tay):
                if c.is_zero():
                    continue
                if k < m:
                    pps[i][m - k - 1] = pps[i][m - k - 1] + coeff * c
                else:
                    extra_poly = extra_poly + Poly.linear_factor(cfg.points[i]) ** (k - m) * (coeff * c)

        for i in range(n):
            for m, c in enumerate(self.principal[i], start=1):
                add_pole_times_poly(i, m, c, other.poly)
            for m, c in enumerate(other.principal[i], start=1):
                add_pole_times_poly(i, m, c, self.poly)
        for i in range(n):
            for p, x in enumerate(self.principal[i], start=1):
                if x.is_zero():
                    continue
                for j in range(n):
                    for q, y in enumerate(other.principal[j], start=1):
                        if y.is_zero():
                            continue
                        coeff = x * y
                        if i == j:
                            pps[i][p + q - 1] = pps[i][p + q - 1] + coeff
                            continue
                        for r, c in _two_pole_fractions(cfg, i, p, j, q):
                            target = i if r > 0 else j
                            order = abs(r)
                            pps[target][order - 1] = pps[target][order - 1] + coeff * c
        return KElement(cfg, poly + extra_poly, pps)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "KElement":
        if n < 0:
            raise GeometryError("negative powers are taken through phi_basis")
        out = KElement.constant(self.cfg, ONE)
        for _ in range(n):
            out = out * self
        return out

    def deriv(self) -> "KElement":
        pps = []
        for pp in self.principal:
            out = [ZERO] * (len(pp) + 1) if pp else []
            for m, c in enumerate(pp, start=1):
                out[m] = -c * m
            pps.append(out)
        return KElement(self.cfg, self.poly.deriv(), pps)

    def residue(self, i: int) -> Scalar:
        pp = self.principal[i]
        return pp[0] if pp else ZERO

    def total_residue(self) -> Scalar:
        out = ZERO
        for i in range(self.cfg.n):
            out = out + self.residue(i)
        return out

    def map_coeffs(self, fn) -> "KElement":
        return KElement(self.cfg, self.poly.map_coeffs(fn), [[fn(x) for x in pp] for pp in self.principal])

    def substitute(self, bindings) -> "KElement":
        return self.map_coeffs(lambda x: x.substitute(bindings))

    def text(self) -> str:
        body = self.poly.text()
        parts = []
        for i, pp in enumerate(self.principal):
            if pp:
                parts.append(f"a{i + 1}: [" + ", ".join(scalar_text(x) for x in pp) + "]")
        if parts:
            return body + " | " + "; ".join(parts)
        return body

    def compact_text(self) -> str:
        """Human form such as ``t^-1`` or ``2(t-a1)^-2 + t``."""
        terms = []
        for i, pp in enumerate(self.principal):
            a = self.cfg.points[i]
            base = "t" if a.is_zero() else f"(t-{_wrap(scalar_text(a))})"
            for m in range(len(pp), 0, -1):
                c = pp[m - 1]
                if c.is_zero():
                    continue
                terms.append(_coeff_term(c, f"{base}^-{m}"))
        poly = self.poly.text()
        if poly != "0":
            terms.append(poly)
        return join_terms(terms)

    def __repr__(self):
        return f"KElement({self.text()})"


def _two_pole_fractions(cfg: SigmaConfig, i: int, p: int, j: int, q: int):
    """Partial fractions of (t-a_i)^{-p}(t-a_j)^{-q}; yields (+r | -r, coeff) for point i | j."""
    d_ij = cfg.difference_inverse(i, j)  # 1/(a_i - a_j)
    d_ji = -d_ij
    for r in range(1, p + 1):
        s = p - r
        coeff = Scalar((-1) ** s * comb(q + s - 1, s)) * d_ij ** (q + s)
        yield r, coeff
    for r in range(1, q + 1):
        s = q - r
        coeff = Scalar((-1) ** s * comb(p + s - 1, s)) * d_ji ** (p + s)
        yield -r, coeff


def residue_sigma(cfg: SigmaConfig, g: KElement, f: KElement) -> Scalar:
    """Sum over the marked points of the residue of g * df/dt."""
    return (g * f.deriv()).total_residue()


def phi_basis(cfg: SigmaConfig, m: int, i: int) -> KElement:
    """phi^m (t-a_1)...(t-a_i)."""
    if not 0 <= i < cfg.n:
        raise GeometryError("basis index i must lie in 0..n-1")
    newton = Poly.constant(ONE)
    for l in range(i):
        newton = newton * Poly.linear_factor(cfg.points[l])
    if m >= 0:
        return KElement(cfg, cfg.phi**m * newton)
    inv_phi = KElement.constant(cfg, ONE)
    for l in range(cfg.n):
        inv_phi = inv_phi * KElement.pole(cfg, l, 1)
    out = KElement.constant(cfg, ONE)
    for _ in range(-m):
        out = out * inv_phi
    return out * KElement(cfg, newton)


# ---------------------------------------------------------------------------
# truncated series


class TruncatedSeries:
    """c_0 + c_1 z + ... + c_M z^M with every product truncated to the smaller order.

    Coefficients are Scalars by default; any ring element with +, -, * works
    (polynomials in t are used for frame-change series).
    """

    __slots__ = ("var", "coeffs", "order", "zero")

    def __init__(self, coeffs: Sequence, order: int, var: str = "z", zero=ZERO):
        if order < 0:
            raise GeometryError("truncation order exhausted")
        cs = list(coeffs)[: order + 1]
        if isinstance(zero, Scalar):
            cs = [as_scalar(c) for c in cs]
        cs += [zero] * (order + 1 - len(cs))
        self.coeffs = tuple(cs)
        self.order = order
        self.var = var
        self.zero = zero

    @classmethod
    def from_poly(cls, p: Poly, order: int, var: str = "z") -> "TruncatedSeries":
        return cls(list(p.c), order, var)

    def _like(self, coeffs, order=None) -> "TruncatedSeries":
        return TruncatedSeries(coeffs, self.order if order is None else order, self.var, self.zero)

    def __getitem__(self, i: int):
        return self.coeffs[i] if 0 <= i <= self.order else self.zero

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.order == other.order and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.order, self.coeffs))

    def agrees_with(self, other: "TruncatedSeries") -> bool:
        order = min(self.order, other.order)
        return all(self[i] == other[i] for i in range(order + 1))

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise GeometryError("cannot extend a truncated series")
        return self._like(self.coeffs[: order + 1], order)

    def _other(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return other
        return self._like([other])

    def __add__(self, other):
        other = self._other(other)
        order = min(self.order, other.order)
        return self._like([self[i] + other[i] for i in range(order + 1)], order)

    __radd__ = __add__

    def __neg__(self):
        return self._like([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._other(other))

    def __rsub__(self, other):
        return self._other(other) - self

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self._like([c * other for c in self.coeffs])
        order = min(self.order, other.order)
        out = [self.zero] * (order + 1)
        for i in range(order + 1):
            a = self.coeffs[i]
            if _is_zero(a):
                continue
            for j in range(order + 1 - i):
                b = other.coeffs[j]
                if _is_zero(b):
                    continue
                out[i + j] = out[i + j] + a * b
        return self._like(out, order)

    def __rmul__(self, other):
        return self._like([other * c for c in self.coeffs])

    def reciprocal(self) -> "TruncatedSeries":
        c0 = self.coeffs[0]
        try:
            c0_inv = c0.inv()
        except ScalarError as exc:
            raise GeometryError("not a coordinate") from exc
        out = [c0_inv]
        for n in range(1, self.order + 1):
            acc = self.zero
            for i in range(1, n + 1):
                acc = acc + self.coeffs[i] * out[n - i]
            out.append(-(acc * c0_inv))
        return self._like(out)

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.reciprocal()
        return self * as_scalar(other).inv()

    def __pow__(self, n: int) -> "TruncatedSeries":
        if n < 0:
            return self.reciprocal() ** (-n)
        out = self._like([self.one_like()])
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def one_like(self):
        return self.zero + ONE if isinstance(self.zero, Scalar) else self.zero + Poly.constant(ONE)

    def deriv(self) -> "TruncatedSeries":
        if self.order == 0:
            raise GeometryError("truncation order exhausted")
        return self._like([self.coeffs[i] * i for i in range(1, self.order + 1)], self.order - 1)

    def valuation(self) -> int | None:
        for i, c in enumerate(self.coeffs):
            if not _is_zero(c):
                return i
        return None

    def compose(self, inner: "TruncatedSeries") -> "TruncatedSeries":
        """self(inner(z)); inner must have zero constant term."""
        if not _is_zero(inner[0]):
            raise GeometryError("inner series has a nonzero constant term")
        order = min(self.order, inner.order)
        acc = self._like([self.zero], order)
        power = inner._like([inner.one_like()], order)
        inner_t = inner.truncate(order)
        for i in range(order + 1):
            if i:
                power = power * inner_t
            c = self.coeffs[i]
            if not _is_zero(c):
                acc = acc + power * c
        return acc

    def invert(self) -> "TruncatedSeries":
        """Compositional inverse (Newton iteration on the linear coefficient)."""
        if not _is_zero(self[0]):
            raise GeometryError("not a coordinate")
        try:
            lin_inv = self[1].inv()
        except (ScalarError, IndexError) as exc:
            raise GeometryError("not a coordinate") from exc
        order = self.order
        # g(z) = lin_inv * z; then fix coefficients one at a time
        g = [self.zero] * (order + 1)
        if order >= 1:
            g[1] = lin_inv
        for n in range(2, order + 1):
            trial = self.compose(self._like(g, order))
            g[n] = -(trial[n] * lin_inv)
        return self._like(g, order)

    def map_coeffs(self, fn) -> "TruncatedSeries":
        return self._like([fn(c) for c in self.coeffs])

    def text(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if _is_zero(c):
                continue
            mono = "" if i == 0 else (self.var if i == 1 else f"{self.var}^{i}")
            if isinstance(c, Poly):
                body = c.text()
                if not mono:
                    terms.append(body)
                elif body == "1":
                    terms.append(mono)
                else:
                    terms.append(f"({body}){mono}" if len(c.c) > 1 or " " in body else f"{body}{mono}")
            else:
                terms.append(_coeff_term(c, mono))
        return join_terms(terms) + f" + O({self.var}^{self.order + 1})"

    def __repr__(self):
        return f"TruncatedSeries({self.text()})"


def _is_zero(x) -> bool:
    return x.is_zero()


def series_compose(u: TruncatedSeries, v: TruncatedSeries) -> TruncatedSeries:
    return u.compose(v)


def series_invert(v: TruncatedSeries) -> TruncatedSeries:
    return v.invert()


def coordinate_series(p: Poly, order: int, var: str = "s") -> TruncatedSeries:
    return TruncatedSeries(list(p.c), order, var)


def schwarzian(t_of_s: TruncatedSeries) -> TruncatedSeries:
    """{t, s} = t'''/t' - (3/2)(t''/t')^2, three orders below the input."""
    d1 = t_of_s.deriv()
    if _is_zero(d1[0]):
        raise GeometryError("not a coordinate")
    d2 = d1.deriv()
    d3 = d2.deriv()
    inv = d1.truncate(d3.order).reciprocal()
    ratio = d2.truncate(d3.order) * inv
    return d3 * inv - ratio * ratio * Scalar(3) / Scalar(2)


# ---------------------------------------------------------------------------
# expansions at a single point and merging


@dataclass(frozen=True)
class LocalExpansion:
    """principal coefficients [c_1, c_2, ...] of (t-a)^{-m} and the Taylor tail."""

    principal: tuple
    tail: TruncatedSeries

    def coefficient(self, m: int) -> Scalar:
        if m < 0:
            return self.principal[-m - 1] if -m <= len(self.principal) else ZERO
        return self.tail[m]

    def text(self) -> str:
        terms = []
        for m in range(len(self.principal), 0, -1):
            c = self.principal[m - 1]
            if not c.is_zero():
                terms.append(_coeff_term(c, f"u^-{m}"))
        terms.append(self.tail.text())
        return join_terms(terms)


def local_expansion(cfg: SigmaConfig, g: KElement, i: int, order: int = DEFAULT_ORDER) -> LocalExpansion:
    """Laurent expansion of g in u = t - a_i: exact principal part, tail to u^order."""
    if g.cfg != cfg:
        raise GeometryError("element lives over a different configuration")
    a = cfg.points[i]
    tail = [ZERO] * (order + 1)
    for k, c in enumerate(g.poly.taylor(a)[: order + 1]):
        tail[k] = c
    for j in range(cfg.n):
        if j == i or not g.principal[j]:
            continue
        d_inv = cfg.difference_inverse(i, j)  # 1/(a_i - a_j)
        for m, c in enumerate(g.principal[j], start=1):
            if c.is_zero():
                continue
            # (u + (a_i - a_j))^{-m} = sum_n C(-m, n) (a_i - a_j)^{-m-n} u^n
            for nn in range(order + 1):
                binom = Scalar((-1) ** nn * comb(m + nn - 1, nn))
                tail[nn] = tail[nn] + c * binom * d_inv ** (m + nn)
    return LocalExpansion(g.principal[i], TruncatedSeries(tail, order, "u"))


def local_product(x: LocalExpansion, y: LocalExpansion) -> LocalExpansion:
    """Product of two Laurent expansions, valid to the order both tails support."""
    px, py = len(x.principal), len(y.principal)
    order = min(x.tail.order - py, y.tail.order - px)
    lo = -(px + py)
    coeffs = {}
    for m in range(-px, x.tail.order + 1):
        a = x.coefficient(m)
        if a.is_zero():
            continue
        for n in range(-py, y.tail.order + 1):
            if m + n > order:
                break
            b = y.coefficient(n)
            if b.is_zero():
                continue
            coeffs[m + n] = coeffs.get(m + n, ZERO) + a * b
    principal = [coeffs.get(-m, ZERO) for m in range(1, -lo + 1)]
    tail = [coeffs.get(m, ZERO) for m in range(0, max(order, 0) + 1)]
    return LocalExpansion(_trim(principal), TruncatedSeries(tail, max(order, 0), "u"))


def ran_merge(cfg: SigmaConfig, x: KElement, j: int, i: int) -> tuple[SigmaConfig, KElement]:
    """Substitute a_j := a_i and re-expand over the merged configuration.

    The substitution is made on the numerator x * prod (t-a_l)^{m_l}, so partial
    fraction coefficients with poles along a_i = a_j may cancel. Point j must be a
    bare symbol; returns the merged configuration and element.
    """
    names = cfg.points[j].free_symbols()
    if len(names) != 1 or cfg.points[j] != _symbol_of(names):
        raise GeometryError("only a bare symbolic point can be merged")
    bindings = {next(iter(names)): cfg.points[i]}
    new_points = tuple(p.substitute(bindings) for l, p in enumerate(cfg.points) if l != j)
    merged = SigmaConfig(new_points)
    orders = [len(pp) for pp in x.principal]
    denominator = Poly.constant(ONE)
    for l, m in enumerate(orders):
        denominator = denominator * Poly.linear_factor(cfg.points[l]) ** m
    numerator = x * denominator
    if any(numerator.principal):
        raise GeometryError("numerator is not a polynomial")
    try:
        poly = numerator.poly.substitute(bindings)
    except ScalarError as exc:
        raise GeometryError("element has a pole along the merged diagonal") from exc
    target = i if i < j else i - 1
    merged_orders = [m for l, m in enumerate(orders) if l != j]
    merged_orders[target] += orders[j]
    out = KElement(merged, poly)
    for l, m in enumerate(merged_orders):
        if m:
            out = out * KElement.pole(merged, l, m)
    return merged, out


def _symbol_of(names) -> Scalar:
    from .scalar_ring import symbol

    return symbol(next(iter(names)))


# ---------------------------------------------------------------------------
# coordinates in the phi basis


class FunctionBasis:
    """Coordinates of K^poly in the basis phi_j, j = n*m + i <-> phi_{m,i}.

    ``val(j) = m`` is the phi-adic valuation; g tensor phi^N R^poly is spanned by j >= n*N.
    Products, derivatives, the cocycle Res(phi_k d phi_j) and the residue-dual
    basis are memoized.
    """

    def __init__(self, cfg: SigmaConfig):
        self.cfg = cfg
        self.n = cfg.n
        self._elements: dict[int, KElement] = {}
        self._mul: dict[tuple[int, int], dict[int, Scalar]] = {}
        self._deriv: dict[int, dict[int, Scalar]] = {}
        self._cocycle: dict[tuple[int, int], Scalar] = {}
        self._dual: dict[int, dict[int, Scalar]] = {}
        self._newton_cache: dict[int, list[Scalar]] = {}

    def val(self, j: int) -> int:
        return j // self.n

    def element(self, j: int) -> KElement:
        if j not in self._elements:
            m, i = divmod(j, self.n)
            self._elements[j] = phi_basis(self.cfg, m, i)
        return self._elements[j]

    def from_coords(self, coords: dict[int, Scalar]) -> KElement:
        out = KElement(self.cfg)
        for j, c in sorted(coords.items()):
            out = out + self.element(j).scale(c)
        return out

    def _newton_digits(self, r: Poly) -> list[Scalar]:
        """r (deg < n) = sum_i c_i (t-a_1)...(t-a_i)."""
        out = []
        for i in range(self.n):
            a = self.cfg.points[i]
            c = r(a)
            out.append(c)
            r, rem = (r - Poly.constant(c)).divmod(Poly.linear_factor(a))
            if not rem.is_zero():
                raise GeometryError("internal: Newton division left a remainder")
        return out

    def coords(self, g: KElement) -> dict[int, Scalar]:
        if g.cfg != self.cfg:
            raise GeometryError("element lives over a different configuration")
        out: dict[int, Scalar] = {}
        if self.n == 1:
            a = self.cfg.points[0]
            for m, c in enumerate(g.principal[0], start=1):
                if not c.is_zero():
                    out[-m] = c
            for k, c in enumerate(g.poly.taylor(a)):
                if not c.is_zero():
                    out[k] = c
            return out
        shift = g.max_pole_order
        cleared = g * KElement(self.cfg, self.cfg.phi**shift)
        if any(cleared.principal):
            raise GeometryError("internal: clearing denominators failed")
        q = cleared.poly
        digit = 0
        while not q.is_zero():
            q, r = q.divmod(self.cfg.phi)
            for i, c in enumerate(self._newton_digits(r)):
                if not c.is_zero():
                    out[self.n * (digit - shift) + i] = c
            digit += 1
        return out

    def mul(self, j: int, k: int) -> dict[int, Scalar]:
        key = (j, k) if j <= k else (k, j)
        if key not in self._mul:
            if self.n == 1:
                self._mul[key] = {j + k: ONE}
            else:
                self._mul[key] = self.coords(self.element(j) * self.element(k))
        return self._mul[key]

    def deriv(self, j: int) -> dict[int, Scalar]:
        if j not in self._deriv:
            if self.n == 1:
                self._deriv[j] = {j - 1: Scalar(j)} if j else {}
            else:
                self._deriv[j] = self.coords(self.element(j).deriv())
        return self._deriv[j]

    def cocycle(self, j: int, k: int) -> Scalar:
        """Res_Sigma(phi_k d phi_j)."""
        key = (j, k)
        if key not in self._cocycle:
            if self.n == 1:
                self._cocycle[key] = Scalar(j) if j + k == 0 else ZERO
            elif self.val(j) + self.val(k) >= 1:
                self._cocycle[key] = ZERO
            else:
                self._cocycle[key] = residue_sigma(self.cfg, self.element(k), self.element(j))
        return self._cocycle[key]

    def residue_dt(self, coords: dict[int, Scalar]) -> Scalar:
        """Res_Sigma(g dt) for g given in coordinates."""
        out = ZERO
        for j, c in coords.items():
            if j < 0:
                out = out + c * self._res_dt(j)
        return out

    def _res_dt(self, j: int) -> Scalar:
        if self.n == 1:
            return ONE if j == -1 else ZERO
        return self.element(j).total_residue()

    def dual(self, j: int) -> dict[int, Scalar]:
        """Coordinates of the residue-dual phi_j^v (j >= 0): Res(phi_j^v phi_k dt) = delta_jk.

        Read off from 1/(t1-t2) = sum_j phi_j^v(t1) phi_j(t2) via
        (phi(t1)-phi(t2))/(t1-t2) expanded in the Newton basis of t2.
        """
        if j < 0:
            raise GeometryError("dual basis is indexed by regular basis functions")
        if j not in self._dual:
            if self.n == 1:
                self._dual[j] = {-1 - j: ONE}
            else:
                m, i = divmod(j, self.n)
                p_i = self._kernel_polys()[i]
                self._dual[j] = self.coords(KElement(self.cfg, p_i) * self.element(-(m + 1) * self.n))
        return self._dual[j]

    @cached_property
    def _kernel_polys_value(self) -> list[Poly]:
        phi = self.cfg.phi
        n = self.n
        # q_e(t1) = sum_{d > e} phi_d t1^{d-1-e}, coefficient of t2^e
        q = []
        for e in range(n):
            q.append(Poly([phi.coeff(d) for d in range(e + 1, n + 1)]))
        # t2^e in the Newton basis
        nu = [self._newton_digits(Poly.monomial(e)) for e in range(n)]
        out = []
        for i in range(n):
            acc = Poly()
            for e in range(n):
                if not nu[e][i].is_zero():
                    acc = acc + q[e] * nu[e][i]
            out.append(acc)
        return out

    def _kernel_polys(self) -> list[Poly]:
        return self._kernel_polys_value

    def coords_mul(self, x: dict[int, Scalar], y: dict[int, Scalar]) -> dict[int, Scalar]:
        out: dict[int, Scalar] = {}
        for j, a in x.items():
            for k, b in y.items():
                ab = a * b
                for l, c in self.mul(j, k).items():
                    out[l] = out.get(l, ZERO) + ab * c
        return {l: c for l, c in out.items() if not c.is_zero()}

    def coords_deriv(self, x: dict[int, Scalar], times: int = 1) -> dict[int, Scalar]:
        for _ in range(times):
            out: dict[int, Scalar] = {}
            for j, a in x.items():
                for l, c in self.deriv(j).items():
                    out[l] = out.get(l, ZERO) + a * c
            x = {l: c for l, c in out.items() if not c.is_zero()}
        return x

    def basis_text(self, j: int) -> str:
        if self.n == 1:
            a = self.cfg.points[0]
            base = "t" if a.is_zero() else f"(t-{_wrap(scalar_text(a))})"
            if j == 0:
                return "1"
            if j == 1:
                return base
            return f"{base}^{j}"
        m, i = divmod(j, self.n)
        pieces = []
        if m:
            pieces.append("phi" if m == 1 else f"phi^{m}")
        for l in range(i):
            a = self.cfg.points[l]
            pieces.append("t" if a.is_zero() else f"(t-{_wrap(scalar_text(a))})")
        return "*".join(pieces) or "1"


_BASES: dict[SigmaConfig, FunctionBasis] = {}


def function_basis(cfg: SigmaConfig) -> FunctionBasis:
    """Shared memoized basis per configuration."""
    basis = _BASES.get(cfg)
    if basis is None:
        basis = _BASES[cfg] = FunctionBasis(cfg)
    return basis


def taylor_factorials(n: int) -> Scalar:
    return Scalar(factorial(n))


# ---------------------------------------------------------------------------
# parsing


def _sympy_tree(text: str, var: str):
    from sympy import Symbol

    from .scalar_ring import SYMBOL_NAMES, locate_syntax_error, sympy_parse

    pos = locate_syntax_error(text)
    if pos is not None:
        raise GeometryError(f"cannot parse {text!r}: syntax error at position {pos}")
    names = {n: Symbol(n) for n in SYMBOL_NAMES}
    names["eps"] = Symbol("eps")
    names[var] = Symbol(var)
    cleaned = text.strip().replace("^", "**").replace("ε", "eps")
    try:
        expr = sympy_parse(cleaned, names, evaluate=False)
    except Exception as exc:
        raise GeometryError(f"cannot parse {text!r}: {exc}") from exc
    extra = {str(s) for s in expr.free_symbols} - set(names)
    if extra:
        raise GeometryError(f"unknown symbols in {text!r}: {sorted(extra)}")
    return expr, names[var]


def _scalar_of(expr) -> Scalar:
    from .scalar_ring import parse_scalar

    return parse_scalar(str(expr))


def parse_poly(text: str, var: str = "t") -> Poly:
    """Polynomial in ``var`` with Scalar coefficients."""
    from sympy import Poly as SymPoly

    expr, v = _sympy_tree(text, var)
    try:
        sp = SymPoly(expr, v)
    except Exception as exc:
        raise GeometryError(f"not a polynomial in {var}: {text!r}") from exc
    coeffs = [ZERO] * (sp.degree() + 1) if sp.degree() >= 0 else []
    for (e,), c in sp.terms():
        if c != 0:
            coeffs[e] = _scalar_of(c)
    return Poly(coeffs)


def parse_series(text: str, order: int, var: str = "z") -> TruncatedSeries:
    return TruncatedSeries(list(parse_poly(text, var).c), order, var)


def parse_kelement(text: str, cfg: SigmaConfig) -> KElement:
    """Parse expressions such as ``t^-1``, ``(t-a1)^-2 + 3t`` into canonical form.

    Negative powers are allowed only of polynomials whose roots are marked points.
    """
    from sympy import Add, Integer, Mul, Pow

    expr, v = _sympy_tree(text, "t")

    def walk(e) -> KElement:
        if v not in e.free_symbols:
            return KElement.constant(cfg, _scalar_of(e))
        if e == v:
            return KElement(cfg, T_POLY)
        if isinstance(e, Add):
            out = KElement(cfg)
            for a in e.args:
                out = out + walk(a)
            return out
        if isinstance(e, Mul):
            out = KElement.constant(cfg, ONE)
            for a in e.args:
                out = out * walk(a)
            return out
        if isinstance(e, Pow) and isinstance(e.exp, Integer):
            n = int(e.exp)
            base = walk(e.base)
            if n >= 0:
                return base**n
            return _invert_point_product(cfg, base) ** (-n)
        raise GeometryError(f"unsupported expression {e}")

    return walk(expr)


def _invert_point_product(cfg: SigmaConfig, x: KElement) -> KElement:
    if any(x.principal):
        raise GeometryError("only polynomials supported by the marked points can be inverted")
    p = x.poly
    out = KElement.constant(cfg, ONE)
    for i, a in enumerate(cfg.points):
        lin = Poly.linear_factor(a)
        while p.degree >= 1:
            q, r = p.divmod(lin)
            if not r.is_zero():
                break
            p = q
            out = out * KElement.pole(cfg, i, 1)
    if p.degree != 0:
        raise GeometryError("denominator has roots outside the marked points")
    return out.scale(p.c[0].inv())
