"""Sparse exact row reduction over Scalar, keyed by arbitrary hashable columns."""

from __future__ import annotations

from typing import Hashable, Mapping, Sequence

from .scalar_ring import ONE, ZERO, Scalar

Vector = dict


def _axpy(target: dict, src: Mapping, c: Scalar) -> None:
    for k, v in src.items():
        x = target.get(k, ZERO) - c * v
        if x.is_zero():
            target.pop(k, None)
        else:
            target[k] = x


def echelon_rows(rows: Sequence[tuple[Mapping, Mapping]], order: Mapping[Hashable, int]):
    """Reduced row echelon form of (vector, tag) pairs; tags follow the same row operations.

    Columns are ranked by ``order`` (smaller rank pivots first). Returns
    ``([(pivot, (vector, tag)), ...], order)`` with every pivot absent from the other rows.
    """
    pivots: dict[Hashable, tuple[dict, dict]] = {}
    for vec, tag in rows:
        v, t = dict(vec), dict(tag)
        for piv in sorted(set(v) & set(pivots), key=order.__getitem__):
            c = v.get(piv)
            if c is None:
                continue
            pv, pt = pivots[piv]
            _axpy(v, pv, c)
            _axpy(t, pt, c)
        if not v:
            continue
        piv = min(v, key=order.__getitem__)
        inv = v[piv].inv()
        v = {k: x * inv for k, x in v.items()}
        t = {k: x * inv for k, x in t.items()}
        for other, (ov, ot) in pivots.items():
            c = ov.get(piv)
            if c is not None:
                _axpy(ov, v, c)
                _axpy(ot, t, c)
        pivots[piv] = (v, t)
    ordered = sorted(pivots.items(), key=lambda kv: order[kv[0]])
    return ordered, order


def nullspace(columns: Sequence[Mapping], order: Mapping[Hashable, int] | None = None) -> list[dict[int, Scalar]]:
    """Kernel of the matrix whose i-th column is ``columns[i]`` (a sparse row-keyed dict).

    Returns basis vectors {column index: Scalar} in reduced form, free variables set to 1.
    """
    rows: dict[Hashable, dict[int, Scalar]] = {}
    for i, col in enumerate(columns):
        for r, x in col.items():
            if not x.is_zero():
                rows.setdefault(r, {})[i] = x
    col_order = {i: i for i in range(len(columns))}
    ech, _ = echelon_rows([(row, {}) for row in rows.values()], col_order)
    pivot_cols = {p for p, _ in ech}
    out = []
    for free in range(len(columns)):
        if free in pivot_cols:
            continue
        vec = {free: ONE}
        for p, (row, _) in ech:
            c = row.get(free)
            if c is not None:
                vec[p] = -c
        out.append(vec)
    return out
