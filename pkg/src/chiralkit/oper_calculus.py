"""Opers on the disk in canonical form, their coordinate transforms, the frame-change
series and the pairing that produces functions on opers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial
from typing import Mapping, Sequence

from .formal_geometry import (
    GeometryError,
    KElement,
    Poly,
    SigmaConfig,
    TruncatedSeries,
    join_terms,
    parse_poly,
    schwarzian,
)
from .scalar_ring import ONE, ZERO, Scalar, parse_scalar, scalar_text


class OperError(ValueError):
    pass


@dataclass(frozen=True)
class OperFrame:
    """Canonical form d + (p_{-1} + sum_i omega_i(t) p_i) dt, omega_i stored as truncated series."""

    coordinate: str
    exponents: tuple[int, ...]
    components: tuple[TruncatedSeries, ...]

    def __post_init__(self):
        if len(self.exponents) != len(self.components):
            raise OperError("one component per exponent is required")

    @property
    def order(self) -> int:
        return min(c.order for c in self.components)

    def agrees_with(self, other: "OperFrame") -> bool:
        return self.exponents == other.exponents and all(
            a.agrees_with(b) for a, b in zip(self.components, other.components)
        )

    def to_json(self) -> dict:
        return {
            "coordinate": self.coordinate,
            "exponents": list(self.exponents),
            "order": self.order,
            "components": [[scalar_text(x) for x in c.coeffs] for c in self.components],
        }

    @classmethod
    def from_json(cls, data: Mapping | str) -> "OperFrame":
        """Accepts {"coordinate", "exponents", "order", "components"} where a component is a
        coefficient list or a polynomial string in the coordinate."""
        if isinstance(data, str):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise OperError(f"invalid oper JSON at position {exc.pos}: {exc.msg}") from exc
        try:
            var = data.get("coordinate", "t")
            exps = tuple(int(d) for d in data.get("exponents", [1]))
            order = int(data.get("order", 12))
            raw = data["components"]
        except (KeyError, TypeError, ValueError) as exc:
            raise OperError(f"invalid oper description: {exc}") from exc
        comps = []
        for item in raw:
            if isinstance(item, str):
                comps.append(TruncatedSeries(list(parse_poly(item, var).c), order, var))
            else:
                comps.append(TruncatedSeries([parse_scalar(str(x)) for x in item], order, var))
        return cls(var, exps, tuple(comps))

    def text(self) -> str:
        return "; ".join(f"w{i + 1} = {c.text()}" for i, c in enumerate(self.components))


def _rename(x: TruncatedSeries, var: str) -> TruncatedSeries:
    return TruncatedSeries(x.coeffs, x.order, var)


def oper_transform(omega: OperFrame, t_of_s: TruncatedSeries) -> OperFrame:
    """Components in the new coordinate s, given the old coordinate t as a series in s.

    w^s_1 = (t')^2 w^t_1(t(s)) - (1/2){t, s},  w^s_j = (t')^(d_j+1) w^t_j(t(s)).
    The series t(s) must fix the origin: t(0) = 0.
    """
    if not t_of_s[0].is_zero():
        raise GeometryError("coordinate change must fix the origin")
    if t_of_s.order < 1 or t_of_s[1].is_zero():
        raise GeometryError("not a coordinate")
    var = t_of_s.var
    dt = t_of_s.deriv()
    comps = []
    for i, (d, w) in enumerate(zip(omega.exponents, omega.components)):
        pulled = _rename(w, var).compose(t_of_s)
        new = pulled * dt ** (d + 1)
        if i == 0:
            new = new - schwarzian(t_of_s) * (Scalar(1) / Scalar(2))
        comps.append(new)
    return OperFrame(var, omega.exponents, tuple(comps))


def frame_change_series(s: Poly, order: int | None = None, var: str = "z") -> TruncatedSeries:
    """sum_{k>=1} (1/k!) s^(k)(t) z^k, coefficients polynomials in t (exact when order >= deg s)."""
    order = max(s.degree, 1) if order is None else order
    coeffs = [Poly()]
    for k in range(1, order + 1):
        coeffs.append(s.deriv(k) * (Scalar(1) / Scalar(factorial(k))))
    return TruncatedSeries(coeffs, order, var, zero=Poly())


def substitute_coordinate(series: TruncatedSeries, s_of_t: Poly, order: int) -> TruncatedSeries:
    """Replace t by s(t) inside every polynomial coefficient, keeping the z-truncation."""
    return series.map_coeffs(lambda p: _truncate_poly(p.compose(s_of_t), order))


def _truncate_poly(p: Poly, order: int) -> Poly:
    return Poly(p.c[: order + 1])


def compose_frame_changes(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """outer(inner(z)) for series in z with polynomial-in-t coefficients."""
    return outer.compose(inner)


def frame_change_cocycle(s_of_t: Poly, u_of_s: Poly, order: int = 8) -> tuple[bool, TruncatedSeries, TruncatedSeries]:
    """rho_{t,u} == rho_{s,u}|_{s = s(t)} o rho_{t,s} up to z^order."""
    u_of_t = u_of_s.compose(s_of_t)
    direct = frame_change_series(u_of_t, order)
    first = frame_change_series(s_of_t, order)
    second = frame_change_series(u_of_s, order)
    # evaluate the coefficients of rho_{s,u} at s = s(t)
    second_at_t = second.map_coeffs(lambda p: p.compose(s_of_t))
    composite = second_at_t.compose(first)
    ok = all(direct[i] == composite[i] for i in range(order + 1))
    return ok, direct, composite


# ---------------------------------------------------------------------------
# functions on opers


@dataclass(frozen=True)
class OpFunction:
    """Polynomial in commuting generators v_{i,m}; monomials are sorted tuples of (i, m)."""

    terms: tuple  # ((monomial, Scalar), ...)

    @classmethod
    def one(cls) -> "OpFunction":
        return cls((((), ONE),))

    @classmethod
    def generator(cls, i: int, m: int) -> "OpFunction":
        return cls(((((i, m),), ONE),))

    def __mul__(self, other: "OpFunction") -> "OpFunction":
        acc: dict[tuple, Scalar] = {}
        for ma, ca in self.terms:
            for mb, cb in other.terms:
                key = tuple(sorted(ma + mb))
                acc[key] = acc.get(key, ZERO) + ca * cb
        return OpFunction(tuple(sorted((k, v) for k, v in acc.items() if not v.is_zero())))

    def __add__(self, other: "OpFunction") -> "OpFunction":
        acc = dict(self.terms)
        for k, v in other.terms:
            acc[k] = acc.get(k, ZERO) + v
        return OpFunction(tuple(sorted((k, v) for k, v in acc.items() if not v.is_zero())))

    def degree(self, exponents: Sequence[int]) -> int | None:
        degs = {sum(exponents[i] - m for i, m in mono) for mono, _ in self.terms}
        return degs.pop() if len(degs) == 1 else None

    def text(self) -> str:
        parts = []
        for mono, c in self.terms:
            body = "*".join(f"v[{i + 1},{m}]" for i, m in mono) or "1"
            ct = scalar_text(c)
            parts.append(body if ct == "1" else f"({ct})*{body}")
        return join_terms(parts)


def gamma_pairing(h: int, omega: KElement, point: Mapping[int, KElement], cfg: SigmaConfig) -> Scalar:
    """h(v) Res(f omega) for v (x) f: the h-th coordinate of the point, paired with omega dt."""
    f = point.get(h)
    if f is None:
        return ZERO
    return (f * omega).total_residue()


def generator_form(cfg: SigmaConfig, m: int) -> KElement:
    """omega = t^m dt for the generator v_{i,m} (single point at the origin)."""
    if cfg.n != 1 or not cfg.points[0].is_zero():
        raise OperError("generators are indexed on the disk at the origin")
    return KElement.local_power(cfg, 0, m)


def op_function_eval(F: OpFunction, point: Mapping[int, KElement], cfg: SigmaConfig | None = None) -> Scalar:
    cfg = cfg or SigmaConfig.origin()
    total = ZERO
    for mono, c in F.terms:
        val = c
        for i, m in mono:
            val = val * gamma_pairing(i, generator_form(cfg, m), point, cfg)
            if val.is_zero():
                break
        total = total + val
    return total


def pairing_matrix(N: int, cfg: SigmaConfig | None = None) -> list[list[Scalar]]:
    """Rows: forms t^m dt (-N <= m <= N); columns: points x_1 (x) t^(-1-m) in the dual window."""
    cfg = cfg or SigmaConfig.origin()
    rows = []
    for m in range(-N, N + 1):
        form = generator_form(cfg, m)
        row = []
        for m2 in range(-N, N + 1):
            f = KElement.local_power(cfg, 0, -1 - m2)
            row.append(gamma_pairing(0, form, {0: f}, cfg))
        rows.append(row)
    return rows


def is_permutation_matrix(rows: list[list[Scalar]]) -> bool:
    n = len(rows)
    seen = set()
    for row in rows:
        nz = [j for j, x in enumerate(row) if not x.is_zero()]
        if len(nz) != 1 or row[nz[0]] != ONE:
            return False
        seen.add(nz[0])
    return len(seen) == n


def op_monomials(exponents: Sequence[int], degree: int) -> list[tuple]:
    """Monomials in v_{i,m} (m <= -1, weight d_i - m) of the given total weight."""
    gens = []
    for i, d in enumerate(exponents):
        for w in range(d + 1, degree + 1):
            gens.append((i, d - w))  # m = d - w <= -1
    out = []

    def rec(start: int, remaining: int, acc: list):
        if remaining == 0:
            out.append(tuple(acc))
            return
        for idx in range(start, len(gens)):
            i, m = gens[idx]
            w = exponents[i] - m
            if w <= remaining:
                acc.append((i, m))
                rec(idx, remaining - w, acc)
                acc.pop()

    rec(0, degree, [])
    return out
