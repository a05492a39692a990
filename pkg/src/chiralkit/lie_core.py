"""Finite simple Lie algebras by structure constants, with the Killing form."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

from .scalar_ring import ONE, ZERO, Scalar, level_symbol, scalar_text


class LieError(ValueError):
    pass


@dataclass(frozen=True)
class LiePresentation:
    """Basis labels, brackets [x_i, x_j] = sum_k c[i][j][k] x_k, invariant form and oper data.

    ``killing`` is computed from ad-traces; ``exponents`` are the d_i with
    generators of the oper side in weights d_i + 1.
    """

    name: str
    labels: tuple[str, ...]
    structure: tuple  # structure[i][j] = tuple of (k, coeff)
    exponents: tuple[int, ...]
    level: Scalar = field(default_factory=level_symbol)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LieError(f"unknown basis element {label!r}") from None

    def bracket_basis(self, i: int, j: int) -> tuple:
        return self.structure[i][j]

    def bracket(self, x: dict[int, Scalar], y: dict[int, Scalar]) -> dict[int, Scalar]:
        out: dict[int, Scalar] = {}
        for i, a in x.items():
            for j, b in y.items():
                for k, c in self.structure[i][j]:
                    out[k] = out.get(k, ZERO) + a * b * c
        return {k: c for k, c in out.items() if not c.is_zero()}

    def ad_matrix(self, i: int) -> list[list[Scalar]]:
        m = [[ZERO] * self.dim for _ in range(self.dim)]
        for j in range(self.dim):
            for k, c in self.structure[i][j]:
                m[k][j] = c
        return m

    @cached_property
    def killing(self) -> tuple[tuple[Scalar, ...], ...]:
        ads = [self.ad_matrix(i) for i in range(self.dim)]
        rows = []
        for i in range(self.dim):
            row = []
            for j in range(self.dim):
                tr = ZERO
                for a in range(self.dim):
                    for b in range(self.dim):
                        x = ads[i][a][b]
                        if not x.is_zero():
                            tr = tr + x * ads[j][b][a]
                row.append(tr)
            rows.append(tuple(row))
        return tuple(rows)

    def form(self, i: int, j: int) -> Scalar:
        """kappa(x_i, x_j) = k * Killing(x_i, x_j)."""
        return self.level * self.killing[i][j]

    def with_level(self, level) -> "LiePresentation":
        from .scalar_ring import as_scalar

        return LiePresentation(self.name, self.labels, self.structure, self.exponents, as_scalar(level))

    def jacobi_defects(self) -> list[tuple[int, int, int]]:
        bad = []
        for i, j, k in product(range(self.dim), repeat=3):
            xi, xj, xk = {i: ONE}, {j: ONE}, {k: ONE}
            total: dict[int, Scalar] = {}
            for a, b, c in ((xi, xj, xk), (xj, xk, xi), (xk, xi, xj)):
                for l, v in self.bracket(a, self.bracket(b, c)).items():
                    total[l] = total.get(l, ZERO) + v
            if any(not v.is_zero() for v in total.values()):
                bad.append((i, j, k))
        return bad

    def is_antisymmetric(self) -> bool:
        for i, j in product(range(self.dim), repeat=2):
            a = dict(self.structure[i][j])
            b = dict(self.structure[j][i])
            keys = set(a) | set(b)
            if any(not (a.get(k, ZERO) + b.get(k, ZERO)).is_zero() for k in keys):
                return False
        return True

    def form_invariance_defects(self) -> list[tuple[int, int, int]]:
        bad = []
        kil = self.killing
        for i, j, k in product(range(self.dim), repeat=3):
            total = ZERO
            for l, c in self.structure[i][j]:
                total = total + c * kil[l][k]
            for l, c in self.structure[i][k]:
                total = total + c * kil[j][l]
            if not total.is_zero():
                bad.append((i, j, k))
        return bad

    def describe(self) -> dict:
        return {
            "name": self.name,
            "basis": list(self.labels),
            "killing": [[scalar_text(x) for x in row] for row in self.killing],
            "exponents": list(self.exponents),
            "level": scalar_text(self.level),
        }


def _from_table(name, labels, table, exponents) -> LiePresentation:
    n = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    struct = [[() for _ in range(n)] for _ in range(n)]
    for (x, y), rhs in table.items():
        i, j = idx[x], idx[y]
        terms = tuple(sorted((idx[z], Scalar(c)) for z, c in rhs.items()))
        struct[i][j] = terms
        struct[j][i] = tuple((k, -c) for k, c in terms)
    return LiePresentation(name, tuple(labels), tuple(tuple(r) for r in struct), tuple(exponents))


def build_sl2() -> LiePresentation:
    table = {
        ("h", "e"): {"e": 2},
        ("h", "f"): {"f": -2},
        ("e", "f"): {"h": 1},
    }
    return _from_table("sl2", ("e", "h", "f"), table, (1,))


def build_sl3() -> LiePresentation:
    """sl3 in the elementary-matrix basis E_ij (i != j), H1, H2."""
    labels = ("E12", "E13", "E23", "H1", "H2", "E21", "E31", "E32")
    # matrices as dicts (r, c) -> coeff
    mats = {
        "E12": {(0, 1): 1},
        "E13": {(0, 2): 1},
        "E23": {(1, 2): 1},
        "E21": {(1, 0): 1},
        "E31": {(2, 0): 1},
        "E32": {(2, 1): 1},
        "H1": {(0, 0): 1, (1, 1): -1},
        "H2": {(1, 1): 1, (2, 2): -1},
    }

    def mul(a, b):
        out = {}
        for (i, j), x in a.items():
            for (k, l), y in b.items():
                if j == k:
                    out[(i, l)] = out.get((i, l), 0) + x * y
        return out

    def decompose(m):
        out = {}
        for (i, j), c in m.items():
            if c and i != j:
                out[f"E{i + 1}{j + 1}"] = c
        # diagonal d0, d1, d2 with trace 0: d0 H1 + (d0 + d1) H2
        d = [m.get((i, i), 0) for i in range(3)]
        if d[0]:
            out["H1"] = d[0]
        if d[0] + d[1]:
            out["H2"] = d[0] + d[1]
        return out

    table = {}
    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            x, y = labels[a], labels[b]
            comm = mul(mats[x], mats[y])
            for key, c in mul(mats[y], mats[x]).items():
                comm[key] = comm.get(key, 0) - c
            rhs = {k: c for k, c in decompose(comm).items() if c}
            if rhs:
                table[(x, y)] = rhs
    return _from_table("sl3", labels, table, (1, 2))


ALGEBRAS = {"sl2": build_sl2, "sl3": build_sl3}


def build_algebra(name: str) -> LiePresentation:
    try:
        return ALGEBRAS[name]()
    except KeyError:
        raise LieError(f"unknown algebra {name!r}") from None


def critical_level(g: LiePresentation) -> Scalar:
    """The level at which the degree-2 center of the vacuum module is nonzero.

    Found as the root of the obstruction polynomial of the symbolic nullspace.
    """
    from .center_lab import critical_levels

    roots = critical_levels(g, degree=2)
    if len(roots) != 1:
        raise LieError(f"expected a single critical level, found {len(roots)}")
    return roots[0]
