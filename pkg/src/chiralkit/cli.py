"""Command line driver: verification suites, one-shot computations and JSON export."""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .scalar_ring import ScalarError, as_scalar, level_symbol, parse_scalar, rational, scalar_text

RNG_ALGORITHM = "python-random-mt19937"
SUITES = ("lie", "formal", "affine", "vertex", "center", "der-actions", "oper", "factorization")
COMMANDS = ("bracket", "nth-product", "field", "schwarzian", "oper-transform", "center-basis", "residue")
MAX_DEGREE = 6
MAX_TRUNC = 16
MAX_POINTS = 3


class UsageError(ValueError):
    pass


@dataclass
class SuiteConfig:
    suite: str
    algebra: str = "sl2"
    level: str = "symbolic"
    degree: int = 3
    trunc: int = 8
    points: int = 1
    seed: int = 0
    output: str | None = None

    def validate(self) -> None:
        if self.suite not in SUITES + ("all",):
            raise UsageError(f"unknown suite {self.suite!r}")
        if not 0 <= self.degree <= MAX_DEGREE:
            raise UsageError(f"degree must lie in 0..{MAX_DEGREE}")
        if not 1 <= self.trunc <= MAX_TRUNC:
            raise UsageError(f"truncation must lie in 1..{MAX_TRUNC}")
        if not 1 <= self.points <= MAX_POINTS:
            raise UsageError(f"point count must lie in 1..{MAX_POINTS}")
        parse_level(self.level)

    def report_config(self) -> dict:
        out = asdict(self)
        out.pop("output")
        out["rng"] = RNG_ALGORITHM
        return out


@dataclass
class Check:
    id: str
    paper_anchor: str
    status: str
    lhs: str
    rhs: str


@dataclass
class CheckList:
    checks: list[Check] = field(default_factory=list)

    def add(self, ident: str, anchor: str, ok: bool, lhs, rhs) -> None:
        self.checks.append(Check(ident, anchor, "pass" if ok else "fail", _show(lhs), _show(rhs)))

    def equal(self, ident: str, anchor: str, lhs, rhs) -> None:
        self.add(ident, anchor, lhs == rhs, lhs, rhs)


def _show(x) -> str:
    if isinstance(x, str):
        return x
    if hasattr(x, "text"):
        return x.text()
    if isinstance(x, (list, tuple)):
        return "(" + ", ".join(_show(y) for y in x) + ")"
    try:
        return scalar_text(x)
    except Exception:
        return str(x)


def parse_level(text: str):
    if text == "symbolic":
        return level_symbol()
    try:
        level = parse_scalar(text)
    except ScalarError as exc:
        raise UsageError(str(exc)) from exc
    if not level.is_rational():
        raise UsageError("level must be rational or 'symbolic'")
    return level


# ---------------------------------------------------------------------------
# suites


def _algebra(cfg: SuiteConfig):
    from .lie_core import LieError, build_algebra

    try:
        g = build_algebra(cfg.algebra)
    except LieError as exc:
        raise UsageError(str(exc)) from exc
    return g.with_level(parse_level(cfg.level))


def _critical(g):
    from .center_lab import critical_levels

    roots = critical_levels(g)
    if not roots:
        raise UsageError(f"no critical level found for {g.name}")
    return roots[0]


def _roles(g) -> tuple[str, str, str]:
    """Labels playing the parts of e, f, h: a root vector, its partner under the form,
    and a Cartan element."""
    kil = g.killing
    x = g.labels[0]
    y = next(g.labels[b] for b in range(g.dim) if not kil[0][b].is_zero())
    h = next(g.labels[c] for c in range(g.dim) if not kil[c][c].is_zero())
    return x, y, h


def suite_lie(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    g = _algebra(cfg)
    out.add("lie/antisymmetry", "antisymmetry of the bracket", g.is_antisymmetric(), "antisymmetric", "antisymmetric")
    out.equal("lie/jacobi", "Jacobi identity on basis triples", str(g.jacobi_defects()), "[]")
    out.equal("lie/form-invariance", "invariance of the bilinear form", str(g.form_invariance_defects()), "[]")
    kil = g.killing
    out.add("lie/form-symmetric", "symmetry of the bilinear form",
            all(kil[i][j] == kil[j][i] for i in range(g.dim) for j in range(g.dim)), "symmetric", "symmetric")


def _random_coordinate(rng: random.Random, var: str, degree: int = 4):
    from .formal_geometry import Poly

    coeffs = [0, rng.choice([1, 2, -1, 3, -2])] + [rng.randint(-3, 3) for _ in range(degree - 1)]
    return Poly([as_scalar(c) for c in coeffs])


def suite_formal(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .factorization_harness import distinct_points, random_function
    from .formal_geometry import TruncatedSeries, coordinate_series, function_basis, schwarzian

    order = max(cfg.trunc, 4) + 4
    for i in range(20):
        t_of_s = coordinate_series(_random_coordinate(rng, "s"), order, "s")
        s_of_u = coordinate_series(_random_coordinate(rng, "s"), order, "s")
        t_of_u = t_of_s.compose(s_of_u)
        lhs = schwarzian(t_of_u)
        rhs = schwarzian(t_of_s).compose(s_of_u) * s_of_u.deriv() ** 2 + schwarzian(s_of_u)
        out.add(f"formal/schwarzian-cocycle/{i:02d}", "Schwarzian chain rule", lhs.agrees_with(rhs), lhs, rhs)
        back = t_of_s.invert().compose(t_of_s)
        ident = TruncatedSeries([0, 1], order, "s")
        out.add(f"formal/series-inverse/{i:02d}", "compositional inverse", back.agrees_with(ident), back, ident)
    for c in (1, 2, -3):
        # t = s / (1 - c s) is a fractional linear change
        mob = TruncatedSeries([0] + [c ** (k - 1) for k in range(1, 10)], 9, "s")
        sw = schwarzian(mob)
        out.add(f"formal/moebius/{c}", "Schwarzian of a fractional linear map", sw.valuation() is None, sw, "0")
    n = max(cfg.points, 1)
    for i in range(10):
        sigma = distinct_points(rng, n)
        basis = function_basis(sigma)
        f = random_function(rng, sigma)
        back = basis.from_coords(basis.coords(f))
        out.add(f"formal/phi-coordinates/{i:02d}", "expansion in the phi basis", back == f, back, f)
    sigma = distinct_points(rng, n)
    basis = function_basis(sigma)
    for j in range(0, 3 * n):
        for k in range(0, 3 * n):
            pairing = basis.residue_dt(basis.coords_mul({j: as_scalar(1)}, basis.dual(k)))
            expected = as_scalar(1 if j == k else 0)
            out.equal(f"formal/dual-basis/{j:+d}/{k:+d}", "residue duality of the phi basis", pairing, expected)


def _mode_sample(rng: random.Random, g, n: int):
    return rng.randrange(g.dim), rng.randint(-2 * n, 2 * n)


def suite_affine(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .affine_algebra import AffineAlgebra
    from .factorization_harness import distinct_points
    from .formal_geometry import SigmaConfig

    g = _algebra(cfg)
    sigma = SigmaConfig.origin() if cfg.points == 1 else distinct_points(rng, cfg.points)
    alg = AffineAlgebra(g, sigma)
    if cfg.points == 1 and cfg.level == "symbolic" and g.name == "sl2":
        x, y = alg.parse_mode("e[t]"), alg.parse_mode("f[t^-1]")
        out.equal("affine/example-bracket", "bracket with central term", x.commutator(y).text(), "h[1] + 4k·1")
    for i in range(20):
        xs = [alg.mode(*_mode_sample(rng, g, cfg.points)) for _ in range(3)]
        x, y, z = xs
        jac = x.commutator(y.commutator(z)) + y.commutator(z.commutator(x)) + z.commutator(x.commutator(y))
        out.add(f"affine/jacobi/{i:02d}", "Jacobi identity for modes", jac.is_zero(), jac, "0")
        anti = x.commutator(y) + y.commutator(x)
        out.add(f"affine/antisymmetry/{i:02d}", "antisymmetry for modes", anti.is_zero(), anti, "0")
        assoc_l = (x * y) * z
        assoc_r = x * (y * z)
        out.equal(f"affine/associativity/{i:02d}", "associativity of normal ordering", assoc_l, assoc_r)


def suite_vertex(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .affine_algebra import apply_to_vacuum
    from .center_lab import vacuum_module
    from .formal_geometry import KElement, SigmaConfig
    from .vertex_algebra import ModeSpace, VState, borcherds_sides, field_of

    g = _algebra(cfg)
    V = vacuum_module(g)
    origin = SigmaConfig.origin()
    inv_t = KElement.local_power(origin, 0, -1)
    for w in V.basis_up_to(cfg.degree):
        v = VState.monomial(g, w)
        back = apply_to_vacuum(field_of(v, origin, 0)(inv_t))
        out.equal(f"vertex/evaluation/{v.text()}", "field at t^-1 applied to the vacuum", back, v)
    x, y, h = _roles(g)
    e, f, vac = V.parse(f"{x}(-1)|0>"), V.parse(f"{y}(-1)|0>"), V.parse("|0>")
    for name, a, b, expected in (("e-f", e, f, 2), ("e-e", e, e, 0), ("vacuum-e", vac, e, 0)):
        order = V.locality_order(a, b)
        out.equal(f"vertex/locality/{name}", "mutual locality order of currents", str(order), str(expected))
    tests = [VState.monomial(g, w) for w in V.basis_up_to(min(cfg.degree, 2))]
    for A in (e, V.parse(f"{h}(-2)|0>")):
        for B in (f,):
            for C in tests:
                for m in range(-2, 3):
                    for n in range(-2, 3):
                        lhs, rhs = borcherds_sides(V, A, B, C, m, n)
                        ident = f"vertex/borcherds/{A.text()}/{B.text()}/{C.text()}/{m:+d}/{n:+d}"
                        out.equal(ident, "commutator formula for n-th products", lhs, rhs)
    space = ModeSpace(V, origin)
    states = V.basis_up_to(2)[1:]
    for i in range(20):
        def sample():
            w = states[rng.randrange(len(states))]
            return space.symbol(VState.monomial(g, w), {rng.randint(-2, 2): as_scalar(rng.randint(1, 3))})

        x, y = sample(), sample()
        lhs = space.beta(space.bracket(x, y), 6)
        rhs = space.beta_commutator(x, y, 6)
        out.equal(f"vertex/beta-morphism/{i:02d}", "mode map preserves brackets", lhs, rhs)


def suite_center(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .center_lab import center_basis, is_central, obstruction, op_graded_dimension, sugawara_vector, vacuum_module

    g = _algebra(cfg)
    if cfg.level == "symbolic":
        ob = obstruction(g, 2, seed=rng.randrange(2**31))
        expected_roots = "(-1/2)" if g.name == "sl2" else None
        if expected_roots is not None:
            out.equal("center/obstruction-roots", "critical level from the degree-2 obstruction",
                      _show(list(ob.roots)), expected_roots)
        out.add("center/obstruction-generic", "generic degree-2 center is trivial", ob.generic_dim == 0,
                str(ob.generic_dim), "0")
        level = ob.roots[0] if ob.roots else _critical(g)
    else:
        level = parse_level(cfg.level)
    critical = level == _critical(g)
    dims = [center_basis(g, level, d).dim for d in range(cfg.degree + 1)]
    expected = op_graded_dimension(g, cfg.degree) if critical else [1] + [0] * cfg.degree
    out.equal(f"center/graded-dimension/k={scalar_text(level)}",
              "center dimensions against functions on opers" if critical else "center at a noncritical level",
              str(dims), str(expected))
    if critical and g.name == "sl2":
        V = vacuum_module(g, level)
        S = sugawara_vector(g.with_level(level))
        for a in range(g.dim):
            for m in range(4):
                img = V.act(a, m, S)
                out.add(f"center/sugawara/{g.labels[a]}({m})", "Sugawara vector is annihilated", img.is_zero(), img, "0")
        out.add("center/sugawara-central", "Sugawara vector is central", is_central(V, S), S, "central")


def suite_der_actions(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .center_lab import vacuum_module
    from .coordinate_actions import (
        DerElement,
        PhiAction,
        PsiAction,
        action_commutator,
        commutator_formula,
        representation_defect,
        transport_state,
    )
    from .formal_geometry import T_POLY, parse_poly
    from .scalar_ring import point_symbol
    from .vertex_algebra import VState, VStateO

    g = _algebra(cfg)
    V = vacuum_module(g)
    fs = [DerElement(parse_poly(p)) for p in ("t^2", "t^3", "t^2 + 2t^3", "3t^4")]
    states = [VState.monomial(g, w) for w in V.basis_up_to(cfg.degree)]
    for f in fs:
        P, Q = PhiAction(V, f), PsiAction(V, f)
        for v in states:
            out.equal(f"der-actions/phi-psi/{f.text()}/{v.text()}", "two constructions of the coordinate action", P(v), Q(v))
    small = [VState.monomial(g, w) for w in V.basis_up_to(min(cfg.degree, 2))]
    for f in fs[:2]:
        for label, make in (("phi", PhiAction), ("psi", PsiAction)):
            action = make(V, f)
            for a in range(g.dim):
                for m in range(-2, 3):
                    for v in small:
                        lhs = action_commutator(V, action, a, m, v)
                        rhs = commutator_formula(V, f, a, m, v)
                        ident = f"der-actions/commutator/{label}/{f.text()}/{g.labels[a]}({m})/{v.text()}"
                        out.equal(ident, "commutator of the action with a mode", lhs, rhs)
    vac = VState.vacuum(g)
    for f in fs:
        for label, make in (("phi", PhiAction), ("psi", PsiAction)):
            img = make(V, f)(vac)
            out.add(f"der-actions/vacuum/{label}/{f.text()}", "vacuum is invariant", img.is_zero(), img, "0")
    shift = T_POLY + parse_poly("1").map_coeffs(lambda c: c * point_symbol(1))
    for v in small:
        moved = transport_state(V, shift, v)
        out.equal(f"der-actions/translation/{v.text()}", "translations act trivially", moved, VStateO.from_state(v))
    for label, make in (("phi", PhiAction), ("psi", PsiAction)):
        for v in small:
            d = representation_defect(V, make, fs[0], fs[1], v)
            out.add(f"der-actions/representation/{label}/{v.text()}", "the action is a representation", d.is_zero(), d, "0")


def suite_oper(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .formal_geometry import TruncatedSeries, coordinate_series, parse_poly
    from .oper_calculus import (
        OperFrame,
        OpFunction,
        frame_change_cocycle,
        frame_change_series,
        is_permutation_matrix,
        oper_transform,
        op_function_eval,
        pairing_matrix,
    )
    from .formal_geometry import KElement, SigmaConfig

    g = _algebra(cfg)
    order = 12
    for i in range(20):
        t_of_s = coordinate_series(_random_coordinate(rng, "s"), order, "s")
        s_of_u = coordinate_series(_random_coordinate(rng, "u"), order, "u")
        comps = tuple(TruncatedSeries([rng.randint(-3, 3) for _ in range(5)], order, "t") for _ in g.exponents)
        omega = OperFrame("t", g.exponents, comps)
        two = oper_transform(oper_transform(omega, t_of_s), s_of_u)
        t_of_u = TruncatedSeries(t_of_s.coeffs, order, "u").compose(s_of_u)
        direct = oper_transform(omega, t_of_u)
        out.add(f"oper/transform-cocycle/{i:02d}", "composition law for oper coordinate changes",
                two.agrees_with(direct), two, direct)
    for i in range(10):
        s = _random_coordinate(rng, "t", 3)
        u = _random_coordinate(rng, "t", 3)
        ok, lhs, rhs = frame_change_cocycle(s, u, cfg.trunc)
        out.add(f"oper/frame-change-cocycle/{i:02d}", "frame change series composes", ok, lhs, rhs)
    out.equal("oper/frame-change-example", "frame change series of t^2",
              frame_change_series(parse_poly("t^2")).text(), "(2t)z + z^2 + O(z^3)")
    ident = OperFrame("t", g.exponents, tuple(TruncatedSeries([2, 1], order, "t") for _ in g.exponents))
    same = oper_transform(ident, TruncatedSeries([0, 1], order, "s"))
    out.add("oper/identity-change", "identity coordinate change", same.agrees_with(
        OperFrame("s", g.exponents, tuple(TruncatedSeries([2, 1], order, "s") for _ in g.exponents))), same, ident)
    out.add("oper/pairing-window", "nondegeneracy of the residue pairing",
            is_permutation_matrix(pairing_matrix(cfg.trunc)), f"window {cfg.trunc}", "permutation")
    origin = SigmaConfig.origin()
    sq = OpFunction.generator(0, 0) * OpFunction.generator(0, 0)
    val = op_function_eval(sq, {0: KElement.local_power(origin, 0, -1)})
    out.equal("oper/function-eval", "evaluation of functions on opers", val, as_scalar(1))


def suite_factorization(cfg: SuiteConfig, rng: random.Random, out: CheckList) -> None:
    from .center_lab import sugawara_vector, vacuum_module
    from .factorization_harness import (
        check_center_fact,
        check_expand_merge,
        check_merge_paths,
        check_y_fact,
        check_y_ran,
        distinct_points,
        random_function,
        sample_reports,
    )
    from .formal_geometry import KElement, SigmaConfig

    g = _algebra(cfg)
    V = vacuum_module(g)
    for i, rep in enumerate(sample_reports(g, rng)):
        kind = rep.operation.replace(" ", "-")
        out.add(f"factorization/{kind}/{i:03d}", rep.operation, rep.equal, rep.lhs, rep.rhs)
    n = max(cfg.points, 2)
    N = min(cfg.trunc, 6)
    sigma = distinct_points(rng, n)
    x, y, hh = _roles(g)
    states = [V.parse(s) for s in ("|0>", f"{x}(-1)|0>", f"{hh}(-1){x}(-1)|0>", f"{x}(-2)|0>")]
    for v in states:
        for j, h in enumerate((KElement.pole(sigma, 0, 1), KElement.pole(sigma, n - 1, 2), random_function(rng, sigma))):
            rep = check_y_fact(v, sigma, h, N)
            out.add(f"factorization/field-fact/{v.text()}/{j}", "field map splits over separated points",
                    rep.equal, rep.lhs, rep.rhs)
        for l in (-2, 0, 1):
            rep = check_y_ran(v, 2, l)
            out.add(f"factorization/field-ran/{v.text()}/{l:+d}", "field map restricts to the diagonal",
                    rep.equal, rep.lhs, rep.rhs)
    crit = _critical(g)
    S = sugawara_vector(g.with_level(crit))
    two = distinct_points(rng, 2)
    probes = ((f"{x}(-1)|0>", KElement.pole(two, 1, 1)), (f"{y}(-1)|0>", KElement.local_power(two, 1, 1)), ("|0>", KElement.pole(two, 1, 1)))
    for name, h in probes:
        rep = check_center_fact(g, two, crit, S, KElement.pole(two, 0, 2), V.parse(name), h, 6)
        out.add(f"factorization/center-fact/critical/{name}", "cross-point centrality of the Sugawara field",
                rep.equal, rep.lhs, rep.rhs)
    rep = check_center_fact(g, two, rational(0, 1), S, KElement.pole(two, 0, 2), V.parse(f"{x}(-1)|0>"), KElement.pole(two, 1, 1), 6)
    out.add("factorization/center-fact/noncritical", "centrality fails away from the critical level",
            not rep.equal, rep.lhs, "nonzero")
    sym = SigmaConfig.symbolic(3)
    for i in range(5):
        x = random_function(rng, sym, 4)
        rep = check_merge_paths(sym, x)
        out.add(f"factorization/merge-paths/{i}", "merging along different surjections", rep.equal, rep.lhs, rep.rhs)
        rep = check_expand_merge(sym, x)
        out.add(f"factorization/expand-merge/{i}", "expansion commutes with merging elsewhere", rep.equal, rep.lhs, rep.rhs)


SUITE_RUNNERS: dict[str, Callable] = {
    "lie": suite_lie,
    "formal": suite_formal,
    "affine": suite_affine,
    "vertex": suite_vertex,
    "center": suite_center,
    "der-actions": suite_der_actions,
    "oper": suite_oper,
    "factorization": suite_factorization,
}


def run_suite(cfg: SuiteConfig) -> tuple[int, dict]:
    """Run one suite (or all) and return (exit status, report)."""
    cfg.validate()
    names = SUITES if cfg.suite == "all" else (cfg.suite,)
    out = CheckList()
    for name in names:
        # every suite draws from its own stream so reports do not depend on suite order
        rng = random.Random(f"{cfg.seed}:{name}")
        SUITE_RUNNERS[name](cfg, rng, out)
    checks = sorted(out.checks, key=lambda c: c.id)
    ids = [c.id for c in checks]
    if len(set(ids)) != len(ids):
        raise RuntimeError("duplicate check identifiers")
    report = {"suite": cfg.suite, "config": cfg.report_config(), "checks": [asdict(c) for c in checks]}
    status = 0 if all(c.status == "pass" for c in checks) else 1
    return status, report


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def report_text(report: dict) -> str:
    lines = []
    for c in report["checks"]:
        lines.append(f"{c['status'].upper():4}  {c['id']}")
        if c["status"] != "pass":
            lines.append(f"      lhs: {c['lhs']}")
            lines.append(f"      rhs: {c['rhs']}")
    passed = sum(c["status"] == "pass" for c in report["checks"])
    lines.append(f"{passed}/{len(report['checks'])} checks passed")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# computations


def _sigma(points: int):
    from .formal_geometry import SigmaConfig

    return SigmaConfig.origin() if points == 1 else SigmaConfig.symbolic(points)


def compute(command: str, args: argparse.Namespace) -> dict:
    """Run one computation; the result is a dict with a textual 'result' field."""
    from .center_lab import center_basis, vacuum_module
    from .formal_geometry import coordinate_series, parse_kelement, parse_poly, residue_sigma, schwarzian

    if command == "bracket":
        from .affine_algebra import AffineAlgebra

        alg = AffineAlgebra(_algebra(args), _sigma(args.points))
        x, y = alg.parse_mode(args.x), alg.parse_mode(args.y)
        return {"result": x.commutator(y).text()}
    if command == "nth-product":
        V = vacuum_module(_algebra(args))
        return {"result": V.nth_product(V.parse(args.a), V.parse(args.b), args.n).text()}
    if command == "field":
        from .vertex_algebra import field_of

        g = _algebra(args)
        V = vacuum_module(g)
        sigma = _sigma(args.points)
        fld = field_of(V.parse(args.state), sigma, args.trunc)
        if args.at is not None:
            return {"result": fld(parse_kelement(args.at, sigma)).text()}
        return {"result": fld.to_json(-2 * sigma.n, sigma.n * args.trunc)}
    if command == "schwarzian":
        series = coordinate_series(parse_poly(args.poly, args.var), args.trunc + 3, args.var)
        return {"result": schwarzian(series).text()}
    if command == "oper-transform":
        from .oper_calculus import OperFrame, oper_transform

        omega = OperFrame.from_json(args.omega)
        change = coordinate_series(parse_poly(args.change, args.var), omega.order + 3, args.var)
        frame = oper_transform(omega, change)
        return {"result": frame.text(), "frame": frame.to_json()}
    if command == "center-basis":
        g = _algebra(args)
        if args.level == "symbolic":
            raise UsageError("center-basis needs a rational --level")
        basis = center_basis(g, parse_level(args.level), args.degree)
        return {"result": basis.texts(), "dim": basis.dim}
    if command == "residue":
        sigma = _sigma(args.points)
        return {"result": scalar_text(residue_sigma(sigma, parse_kelement(args.g, sigma), parse_kelement(args.f, sigma)))}
    raise UsageError(f"unknown command {command!r}")


# ---------------------------------------------------------------------------
# argument parsing


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--algebra", default="sl2", choices=("sl2", "sl3"))
    parser.add_argument("--level", default="symbolic", help="rational level or 'symbolic'")
    parser.add_argument("--degree", type=int, default=3)
    parser.add_argument("--trunc", type=int, default=8)
    parser.add_argument("--points", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", default="text", choices=("json", "text"))


def _oper_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--omega", required=True, help="oper frame as JSON")
    parser.add_argument("--change", required=True, help="old coordinate as a polynomial in the new one")
    parser.add_argument("--var", default="s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralkit", description="Exact checks for affine vertex algebras and opers.")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run a verification suite")
    verify.add_argument("--suite", required=True, choices=SUITES + ("all",))
    verify.add_argument("--output", default=None, help="also write the JSON report here")
    _common(verify)

    comp = sub.add_parser("compute", help="run one computation")
    csub = comp.add_subparsers(dest="what", required=True)
    p = csub.add_parser("bracket")
    p.add_argument("x")
    p.add_argument("y")
    p = csub.add_parser("nth-product")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--n", type=int, default=0)
    p = csub.add_parser("field")
    p.add_argument("state")
    p.add_argument("--at", default=None, help="evaluate at this function instead of tabulating")
    p = csub.add_parser("schwarzian")
    p.add_argument("poly")
    p.add_argument("--var", default="s")
    p = csub.add_parser("oper-transform")
    _oper_args(p)
    p = csub.add_parser("center-basis")
    p = csub.add_parser("residue")
    p.add_argument("g")
    p.add_argument("f")
    for name, sp in csub.choices.items():
        _common(sp)

    op = sub.add_parser("oper-transform", help="transform an oper frame to a new coordinate")
    _oper_args(op)
    _common(op)
    return parser


def _emit(text: str, output: str | None = None) -> None:
    sys.stdout.write(text)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _glue_negative_values(argv: Sequence[str]) -> list[str]:
    """argparse reads "-1/2" as an option; attach such values to their flag."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in ("--level", "--change"):
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-"):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_glue_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            cfg = SuiteConfig(args.suite, args.algebra, args.level, args.degree, args.trunc, args.points, args.seed, args.output)
            status, report = run_suite(cfg)
            if args.format == "json":
                _emit(dump_report(report), args.output)
            else:
                sys.stdout.write(report_text(report))
                if args.output:
                    with open(args.output, "w", encoding="utf-8") as fh:
                        fh.write(dump_report(report))
            return status
        what = args.what if args.command == "compute" else "oper-transform"
        if args.points < 1 or args.points > MAX_POINTS:
            raise UsageError(f"point count must lie in 1..{MAX_POINTS}")
        if args.degree < 0 or args.degree > MAX_DEGREE:
            raise UsageError(f"degree must lie in 0..{MAX_DEGREE}")
        result = compute(what, args)
    except UsageError as exc:
        sys.stderr.write(f"chiralkit: error: {exc}\n")
        return 2
    except (ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"chiralkit: error: {exc}\n")
        return 2
    if args.format == "json":
        config = {k: getattr(args, k) for k in ("algebra", "level", "degree", "trunc", "points")}
        payload = {"command": what, "config": config, **result}
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    else:
        res = result["result"]
        if isinstance(res, dict):
            text = "\n".join(f"{k}: {v}" for k, v in res.items())
        elif isinstance(res, list):
            text = "\n".join(res) if res else "(empty)"
        else:
            text = res
        sys.stdout.write(text + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
