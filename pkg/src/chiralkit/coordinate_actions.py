"""Two first-order actions of vector fields f(t) d/dt (f(0) = 0) on the vacuum module.

``l_phi`` deforms each mode by the coordinate-change series
X z^m -> X (z + eps sum_k f^(k+1)(t)/(k+1)! z^(k+1))^m.
``l_psi`` rebuilds every state in the coordinate s = t + eps f(t) from the
expansion of (s(t1) - s(t2))^m in powers of t1 - t2, takes the eps part and
subtracts f'(t). They share only the series and mode-action kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

from .affine_algebra import Word
from .formal_geometry import GeometryError, Poly, T_POLY, TruncatedSeries, join_terms
from .scalar_ring import EPS, ONE, ZERO, Scalar
from .vertex_algebra import VacuumModule, VState, VStateO, word_degree, word_text


class ActionError(ValueError):
    pass


@dataclass(frozen=True)
class DerElement:
    """The vector field f(t) d/dt with f(0) = 0."""

    f: Poly

    def __post_init__(self):
        if not self.f.coeff(0).is_zero():
            raise ActionError("vector field must vanish at the origin")
        if any(c.has_eps() for c in self.f.c):
            raise ActionError("vector field coefficients must be eps-free")

    def text(self) -> str:
        return self.f.text()

    def bracket(self, other: "DerElement") -> "DerElement":
        """[f d, g d] = (f g' - g f') d."""
        return DerElement(self.f * other.f.deriv() - other.f * self.f.deriv())


def _as_o(v) -> VStateO:
    return v if isinstance(v, VStateO) else VStateO.from_state(v)


def _eps_part(p: Poly) -> Poly:
    return p.map_coeffs(lambda c: c.eps)


def _act_o(V: VacuumModule, a: int, m: int, v: VStateO) -> VStateO:
    """x^a_(m) acting on the V factor of V (x) O."""
    out: dict[Word, Poly] = {}
    for w, p in v.terms.items():
        for u, c in V.alg.left_mul_mode((m, a), w, 0).items():
            q = p * c
            out[u] = out[u] + q if u in out else q
    return VStateO(V.g, out)


def _eval_word(V: VacuumModule, word: Word) -> dict[Word, Scalar]:
    return V.alg.left_mul_word(word, {(): ONE}, 0)


# ---------------------------------------------------------------------------
# the torsor-side action


class PhiAction:
    """Memoized l_phi for a fixed vector field."""

    def __init__(self, V: VacuumModule, f: DerElement):
        self.V = V
        self.f = f
        self._modes: dict[int, dict[int, Poly]] = {}

    def mode_image(self, m: int) -> dict[int, Poly]:
        """eps part of X (z + eps g(z))^m as {l: coefficient of X z^l}."""
        if m not in self._modes:
            f = self.f.f
            top = max(f.degree - 1, 0)
            # h(z) = g(z)/z = sum_k f^(k+1)(t)/(k+1)! z^k
            h = [f.deriv(k + 1) * (Scalar(1) / Scalar(factorial(k + 1))) for k in range(top + 1)]
            coeffs = [Poly.constant(ONE) + h[0] * EPS] + [hk * EPS for hk in h[1:]]
            series = TruncatedSeries(coeffs, top, "z", zero=Poly())
            power = series**m
            out = {}
            for k in range(top + 1):
                e = _eps_part(power[k])
                if not e.is_zero():
                    out[m + k] = e
            self._modes[m] = out
        return self._modes[m]

    def __call__(self, v) -> VStateO:
        v = _as_o(v)
        out: dict[Word, Poly] = {}
        for w, p in v.terms.items():
            for pos, (m, a) in enumerate(w):
                for l, q in self.mode_image(m).items():
                    new = w[:pos] + ((l, a),) + w[pos + 1 :]
                    pq = p * q
                    for u, c in _eval_word(self.V, new).items():
                        term = pq * c
                        out[u] = out[u] + term if u in out else term
        return VStateO(self.V.g, out)


def l_phi(V: VacuumModule, f: DerElement, v) -> VStateO:
    return PhiAction(V, f)(v)


# ---------------------------------------------------------------------------
# the field-side action


def difference_power(s: Poly, m: int, order: int) -> TruncatedSeries:
    """(s(t+u) - s(t))^m / u^m as a series in u with polynomial-in-t coefficients."""
    top = max(s.degree, 1)
    q = [s.deriv(k) * (Scalar(1) / Scalar(factorial(k))) for k in range(1, top + 1)]
    series = TruncatedSeries(q, order, "u", zero=Poly())
    if series[0].is_zero():
        raise GeometryError("not a coordinate")
    return series**m


def difference_expansion(s: Poly, m: int, order: int) -> dict[int, Poly]:
    """{l: c_l(t)} with (s(t+u) - s(t))^m = sum_l c_l(t) u^l, for l - m <= order."""
    power = difference_power(s, m, order)
    return {m + i: power[i] for i in range(order + 1) if not power[i].is_zero()}


class CoordinateTransport:
    """Rebuild states in the coordinate s(t): |0> -> |0> (x) s', x_(m) B -> sum_l c_l x_(l) B."""

    def __init__(self, V: VacuumModule, s: Poly):
        self.V = V
        self.s = s
        self.ds = s.deriv()
        if self.ds.coeff(0).real.is_zero():
            raise GeometryError("not a coordinate")
        self._memo: dict[Word, VStateO] = {}
        self._exp: dict[tuple[int, int], dict[int, Poly]] = {}

    def _coeffs(self, m: int, order: int) -> dict[int, Poly]:
        key = (m, order)
        if key not in self._exp:
            self._exp[key] = difference_expansion(self.s, m, order)
        return self._exp[key]

    def word(self, w: Word) -> VStateO:
        hit = self._memo.get(w)
        if hit is None:
            if not w:
                hit = VStateO(self.V.g, {(): self.ds})
            else:
                (m, a), rest = w[0], w[1:]
                inner = self.word(rest)
                # x_(l) kills states of degree below l
                order = word_degree(rest) - m
                hit = VStateO(self.V.g)
                for l, c in self._coeffs(m, order).items():
                    hit = hit + _act_o(self.V, a, l, inner).scale(c)
            self._memo[w] = hit
        return hit

    def __call__(self, v) -> VStateO:
        v = _as_o(v)
        out = VStateO(self.V.g)
        for w, p in v.terms.items():
            out = out + self.word(w).scale(p)
        return out


class PsiAction:
    def __init__(self, V: VacuumModule, f: DerElement):
        self.V = V
        self.f = f
        self.transport = CoordinateTransport(V, T_POLY + f.f * EPS)
        self.df = f.f.deriv()

    def __call__(self, v) -> VStateO:
        v = _as_o(v)
        moved = self.transport(v).map_polys(_eps_part)
        return moved - v.scale(self.df)


def l_psi(V: VacuumModule, f: DerElement, v) -> VStateO:
    return PsiAction(V, f)(v)


def transport_state(V: VacuumModule, s: Poly, v) -> VStateO:
    """The state v rebuilt in the coordinate s, divided by the vacuum factor s'."""
    ds = s.deriv()
    if ds.degree != 0:
        raise ActionError("only affine coordinate changes have a constant vacuum factor")
    moved = CoordinateTransport(V, s)(v)
    return moved.scale(Poly.constant(ds.c[0].inv()))


# ---------------------------------------------------------------------------
# consistency checks


def commutator_formula(V: VacuumModule, f: DerElement, a: int, m: int, v) -> VStateO:
    """m sum_k 1/(k+1)! f^(k+1)(t) x^a_(m+k) v."""
    v = _as_o(v)
    out = VStateO(V.g)
    for k in range(max(f.f.degree, 0)):
        coeff = f.f.deriv(k + 1) * (Scalar(m) / Scalar(factorial(k + 1)))
        if coeff.is_zero():
            continue
        out = out + _act_o(V, a, m + k, v).scale(coeff)
    return out


def action_commutator(V: VacuumModule, action, a: int, m: int, v) -> VStateO:
    """[L, x^a_(m)] v = L(x_(m) v) - x_(m) L(v)."""
    v = _as_o(v)
    return action(_act_o(V, a, m, v)) - _act_o(V, a, m, action(v))


def extended_action(action, f: DerElement, v) -> VStateO:
    """L~_f(v (x) p) = L_f(v) p + v (x) f p'."""
    v = _as_o(v)
    return action(v) + v.map_polys(lambda p: f.f * p.deriv())


def representation_defect(V: VacuumModule, make_action, f: DerElement, g: DerElement, v) -> VStateO:
    """[L~_f, L~_g] v - L~_{[f,g]} v, composing the first-order operators."""
    Lf, Lg, Lfg = make_action(V, f), make_action(V, g), make_action(V, f.bracket(g))
    v = _as_o(v)
    left = extended_action(Lf, f, extended_action(Lg, g, v)) - extended_action(Lg, g, extended_action(Lf, f, v))
    return left - extended_action(Lfg, f.bracket(g), v)


# ---------------------------------------------------------------------------
# the canonical connection


class SeriesState:
    """{word: TruncatedSeries in t}."""

    def __init__(self, g, terms: dict[Word, TruncatedSeries]):
        self.g = g
        self.terms = {w: s for w, s in terms.items() if s.valuation() is not None}

    def order(self) -> int | None:
        return min((s.order for s in self.terms.values()), default=None)

    def agrees_with(self, other: "SeriesState", order: int) -> bool:
        for w in set(self.terms) | set(other.terms):
            a = self.terms.get(w)
            b = other.terms.get(w)
            for i in range(order + 1):
                x = a[i] if a is not None else ZERO
                y = b[i] if b is not None else ZERO
                if x != y:
                    return False
        return True

    def text(self) -> str:
        if not self.terms:
            return "0"
        return join_terms(f"({s.text()})·{word_text(self.g, w)}" for w, s in sorted(self.terms.items()))


def _series_add(acc: dict, w: Word, s: TruncatedSeries) -> None:
    acc[w] = acc[w] + s if w in acc else s


class FrameChange:
    """phi_{t,s}: x_(m) -> x (rho(z))^m with rho(z) = sum_{k>=1} s^(k)(t)/k! z^k.

    s is an exact polynomial; coefficients that need 1/s' are series in t to order M.
    """

    def __init__(self, V: VacuumModule, s: Poly, order: int):
        self.V = V
        self.s = s
        self.order = order
        if s.deriv().coeff(0).is_zero():
            raise GeometryError("not a coordinate")
        top = max(s.degree, 1)
        self._q = [
            TruncatedSeries(list((s.deriv(k) * (Scalar(1) / Scalar(factorial(k)))).c), order, "t")
            for k in range(1, top + 1)
        ]
        self._lead_inv = self._q[0].reciprocal()
        self._memo: dict[Word, dict[Word, TruncatedSeries]] = {}
        self._powers: dict[tuple[int, int], list[TruncatedSeries]] = {}

    def rho_power(self, m: int, terms: int) -> list[TruncatedSeries]:
        """First ``terms + 1`` coefficients of (rho(z)/z)^m, by the power recurrence
        n q_0 P_n = sum_i ((m+1) i - n) q_i P_{n-i}."""
        key = (m, terms)
        if key not in self._powers:
            q = self._q
            zero = TruncatedSeries([], self.order, "t")
            out = [q[0] ** m]
            for n in range(1, terms + 1):
                acc = zero
                for i in range(1, min(n, len(q) - 1) + 1):
                    coeff = (m + 1) * i - n
                    if coeff:
                        acc = acc + q[i] * out[n - i] * Scalar(coeff)
                out.append(acc * self._lead_inv * (Scalar(1) / Scalar(n)))
            self._powers[key] = out
        return self._powers[key]

    def word(self, w: Word) -> dict[Word, TruncatedSeries]:
        hit = self._memo.get(w)
        if hit is None:
            if not w:
                hit = {(): _series_one(self.order)}
            else:
                (m, a), rest = w[0], w[1:]
                inner = self.word(rest)
                powers = self.rho_power(m, word_degree(rest) - m)
                hit = {}
                for i, c in enumerate(powers):
                    for u, su in inner.items():
                        for r, x in self.V.alg.left_mul_mode((m + i, a), u, 0).items():
                            _series_add(hit, r, c * su * x)
            self._memo[w] = hit
        return hit

    def __call__(self, v: dict[Word, TruncatedSeries]) -> SeriesState:
        acc: dict[Word, TruncatedSeries] = {}
        for w, p in v.items():
            for u, s in self.word(w).items():
                _series_add(acc, u, s * p)
        return SeriesState(self.V.g, acc)


def _series_one(order: int) -> TruncatedSeries:
    return TruncatedSeries([ONE], order, "t")


def connection_check(V: VacuumModule, v, s: Poly | TruncatedSeries, order: int = 8) -> tuple[bool, SeriesState, SeriesState]:
    """phi_{t,s} o ((d_t s) T + d_t) == (T + d_t) o phi_{t,s} on v, modulo t^order.

    A TruncatedSeries s is read as the polynomial it represents.
    """
    if isinstance(s, TruncatedSeries):
        order = s.order
        s = Poly(s.coeffs)
    v = _as_o(v)
    phi = FrameChange(V, s, order)
    ds = TruncatedSeries(list(s.deriv().c), order, "t")

    def series(p: Poly) -> TruncatedSeries:
        return TruncatedSeries(list(p.c), order, "t")

    def t_derivative(x: TruncatedSeries) -> TruncatedSeries:
        # d/dt of a series known mod t^(order+1), padded back to the working order
        return TruncatedSeries(list(x.deriv().coeffs), order, "t")

    first: dict[Word, TruncatedSeries] = {}
    for w, p in v.terms.items():
        for u, c in V._translate_word(w).items():
            _series_add(first, u, ds * series(p) * c)
        _series_add(first, w, series(p.deriv()))
    left = phi(first)
    mid = phi({w: series(p) for w, p in v.terms.items()})
    second: dict[Word, TruncatedSeries] = {}
    for w, x in mid.terms.items():
        for u, c in V._translate_word(w).items():
            _series_add(second, u, x * c)
        _series_add(second, w, t_derivative(x))
    right = SeriesState(V.g, second)
    # differentiating loses the top coefficient
    return left.agrees_with(right, order - 1), left, right


def action_report(V: VacuumModule, fs: list[DerElement], max_degree: int) -> list[dict]:
    rows = []
    for f in fs:
        phi, psi = PhiAction(V, f), PsiAction(V, f)
        for d in range(max_degree + 1):
            for w in V.basis(d):
                v = VState.monomial(V.g, w)
                a, b = phi(v), psi(v)
                rows.append({"f": f.text(), "state": v.text(), "l_phi": a.text(), "l_psi": b.text(), "equal": a == b})
    return rows
