"""Command-line front end: one verb per construction, exact-rational
reports, and a scriptable exit-code contract (0 success / verdict true,
1 verdict false with witness, 2 error)."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import approx as ap
from . import concentration as cc
from . import io as mio
from . import katetov as kt
from . import metric as mt
from . import ramsey as rs
from .freegroup import word_str


def _rational(text: str) -> Fraction:
    try:
        return mt.frac(text)
    except (ValueError, TypeError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _strategy(text: str):
    if text in ("auto", "ball"):
        return text
    if text.startswith("search:"):
        parts = text[len("search:"):].split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError("expected search:degree,attempts")
        return ("random_search", int(parts[0]), int(parts[1]))
    raise argparse.ArgumentTypeError(f"unknown strategy {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metriclab",
                                description="exact finite metric geometry workbench")
    p.add_argument("--out", type=Path, default=None, help="report path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallelism degree hint; results do not depend on it")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the timestamp field from the report")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("validate", help="check the metric axioms of a .ums file")
    q.add_argument("space", type=Path)

    q = sub.add_parser("glue", help="amalgamate two epsilon-isometric spaces")
    q.add_argument("--a", type=Path, required=True)
    q.add_argument("--b", type=Path, required=True)
    q.add_argument("--epsilon", type=_rational, required=True)

    q = sub.add_parser("embed", help="enumerate isometric embeddings of F into X")
    q.add_argument("--f", type=Path, required=True)
    q.add_argument("--x", type=Path, required=True)

    q = sub.add_parser("iso-group", help="the full isometry group of a space")
    q.add_argument("space", type=Path)

    q = sub.add_parser("katetov", help="admissibility / controlled extension of a profile")
    q.add_argument("--x", type=Path, required=True)
    q.add_argument("--values", type=str, required=True,
                   help="comma-separated rationals, one per support point")
    q.add_argument("--support", type=_int_list, default=None,
                   help="support point indices (default: all points)")
    q.add_argument("--extend", action="store_true",
                   help="also emit the one-point extension as an inline space")

    q = sub.add_parser("grow", help="saturate grid one-point extensions")
    q.add_argument("--seed-space", type=Path, required=True)
    q.add_argument("--grid", type=str, required=True, help="comma-separated rationals")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--rounds", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--budget", type=int, default=10_000)
    q.add_argument("--out-space", type=Path, default=None)
    q.add_argument("--out-isometries", type=Path, default=None)

    q = sub.add_parser("approx", help="certified finite approximation of isometries")
    q.add_argument("--space", type=Path, required=True)
    q.add_argument("--isometries", type=Path, default=None,
                   help="permutation file, one per line (default: none)")
    q.add_argument("--points", type=_int_list, required=True)
    q.add_argument("--epsilon", type=_rational, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--strategy", type=_strategy, default="auto")
    q.add_argument("--budget", type=int, default=10_000, help="fragment point budget")
    q.add_argument("--best-effort", action="store_true")

    q = sub.add_parser("ramsey", help="check the finite Ramsey property R(F,G,m,eps)")
    q.add_argument("--x", type=Path, required=True)
    q.add_argument("--f", type=Path, required=True)
    q.add_argument("--g", type=Path, required=True)
    q.add_argument("--colors", type=int, required=True)
    q.add_argument("--epsilon", type=_rational, required=True)
    q.add_argument("--mode", choices=("embeddings", "subspaces"), default="embeddings")
    q.add_argument("--search", type=str, default="exhaustive",
                   help="exhaustive or adversarial:seed,iterations")
    q.add_argument("--bound", type=int, default=2 ** 25)

    q = sub.add_parser("flip", help="the flip coloring on ordered pair embeddings")
    q.add_argument("--x", type=Path, required=True)
    q.add_argument("--f", type=Path, required=True)
    q.add_argument("--epsilon", type=_rational, default=None)

    q = sub.add_parser("rdm", help="finite cover Ramsey-Dvoretzky-Milman check")
    q.add_argument("--x", type=Path, required=True)
    q.add_argument("--cover", type=str, required=True,
                   help="semicolon-separated point lists, e.g. '0,1;2,3'")
    q.add_argument("--k", type=_int_list, required=True)
    q.add_argument("--epsilon", type=_rational, required=True)
    q.add_argument("--isometries", type=Path, default=None,
                   help="group generators (default: full isometry group)")

    q = sub.add_parser("melambda", help="convergence-in-measure distance of step functions")
    q.add_argument("--space", type=Path, required=True)
    q.add_argument("--f", type=Path, required=True)
    q.add_argument("--g", type=Path, required=True)
    q.add_argument("--lam", type=_rational, default=Fraction(1))

    q = sub.add_parser("concentrate", help="Hamming concentration of a threshold event")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--threshold", type=int, required=True)
    q.add_argument("--epsilon", type=_rational, required=True)
    q.add_argument("--weights", type=str, default="1/2,1/2")
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--seed", type=int, default=0)

    q = sub.add_parser("sphere", help="sphere/Euclidean embeddability from squared distances")
    q.add_argument("matrix", type=Path)
    q.add_argument("--mode", choices=("sphere", "euclidean"), default="sphere")

    return p


def _identity_family(space: mt.MetricSpace) -> mt.IndexedFamily:
    return mt.IndexedFamily(space, {i: i for i in range(space.n)})


def _cmd_validate(ns):
    rows = mio.parse_space_text(Path(ns.space).read_text()).rows
    violations = mt.metric_violations(rows)
    if violations:
        return 1, {"command": "validate", "valid": False,
                   "violations": [{"kind": v.kind, "where": list(v.where),
                                   "detail": v.detail} for v in violations]}
    return 0, {"command": "validate", "valid": True, "points": len(rows)}


def _cmd_glue(ns):
    a = mio.parse_space_file(ns.a)
    b = mio.parse_space_file(ns.b)
    if a.n != b.n:
        raise ValueError("glue expects spaces indexed by the same point count")
    fa, fb = _identity_family(a), _identity_family(b)
    res = mt.glue_indexed(fa, fb, ns.epsilon)
    bridges = {str(i): res.space.d(res.into_a[fa.point(i)], res.into_b[fb.point(i)])
               for i in fa.indices}
    return 0, {"command": "glue", "epsilon": ns.epsilon,
               "space": res.space, "bridge_distances": bridges,
               "collapsed": [list(c) for c in res.collapsed]}


def _cmd_embed(ns):
    f = mio.parse_space_file(ns.f)
    x = mio.parse_space_file(ns.x)
    embs = mt.enumerate_embeddings(f, x)
    code = 0 if embs else 1
    return code, {"command": "embed", "count": len(embs),
                  "embeddings": [list(e.images) for e in embs]}


def _cmd_iso_group(ns):
    x = mio.parse_space_file(ns.space)
    group = mt.isometry_group(x)
    return 0, {"command": "iso-group", "order": len(group),
               "permutations": [list(g.images) for g in group]}


def _cmd_katetov(ns):
    x = mio.parse_space_file(ns.x)
    values = [mt.frac(t) for t in ns.values.split(",")]
    support = ns.support if ns.support is not None else list(range(x.n))
    report = {"command": "katetov", "support": support}
    try:
        kf = kt.controlled_extension(x, support, values)
    except ValueError as e:
        sub = x.restrict(support)
        adm = kt.is_admissible(sub, values)
        report.update({"admissible": False,
                       "violation": None if adm.ok else
                       {"pair": [support[adm.pair[0]], support[adm.pair[1]]],
                        "detail": adm.detail},
                       "error": str(e)})
        return 1, report
    report.update({"admissible": True, "extension": list(kf.values)})
    if ns.extend:
        report["extended_space"] = kt.one_point_extend(x, kf)
    return 0, report


def _cmd_grow(ns):
    seed_space = mio.parse_space_file(ns.seed_space)
    grid = [mt.frac(t) for t in ns.grid.split(",")]
    frag = kt.grow_fragment(seed_space, grid, ns.k, ns.rounds, ns.seed, budget=ns.budget)
    if ns.out_space:
        mio.write_space(frag.space, ns.out_space)
    if ns.out_isometries:
        Path(ns.out_isometries).write_text(mio.format_partial_isometries(frag))
    code = 0 if frag.complete else 1
    return code, {"command": "grow", "points_before": seed_space.n,
                  "points_after": frag.space.n, "complete": frag.complete,
                  "space": frag.space}


def _cmd_approx(ns):
    x = mio.parse_space_file(ns.space)
    gens = []
    if ns.isometries:
        for images in mio.parse_permutations(Path(ns.isometries).read_text()):
            gens.append(mt.PermutationIsometry(x, images))
    budgets = ap.Budgets(fragment_points=ns.budget)
    try:
        res = ap.approximate_isometries(x, gens, ns.points, ns.epsilon,
                                        strategy=ns.strategy, seed=ns.seed,
                                        budgets=budgets, best_effort=ns.best_effort)
    except ap.CertificateError as e:
        return 1, {"command": "approx", "success": False, "error": str(e),
                   "epsilon_requested": ns.epsilon,
                   "epsilon_achieved": e.achieved}
    report = {"command": "approx"}
    report.update(res.report())
    report["family_space"] = res.family.target
    if res.space is not None:
        report["space"] = res.space
        report["generators"] = [list(t.images) for t in res.translations or []]
    return (0 if res.success else 1), report


def _cmd_ramsey(ns):
    x = mio.parse_space_file(ns.x)
    f = mio.parse_space_file(ns.f)
    g = mio.parse_space_file(ns.g)
    if ns.search == "exhaustive":
        verdict = rs.check_R(f, g, x, ns.colors, ns.epsilon, ns.mode,
                             "exhaustive", exhaustive_bound=ns.bound)
    elif ns.search.startswith("adversarial"):
        parts = ns.search.split(":", 1)
        seed, iters = (0, 300)
        if len(parts) == 2:
            seed, iters = (int(t) for t in parts[1].split(","))
        verdict = rs.check_R(f, g, x, ns.colors, ns.epsilon, ns.mode,
                             "adversarial", seed=seed, iterations=iters)
    else:
        raise ValueError(f"unknown search {ns.search!r}")
    report = {"command": "ramsey", "mode": ns.mode, "colors": ns.colors,
              "epsilon": ns.epsilon, "verdict": verdict.verdict,
              "conclusive": verdict.conclusive,
              "colorings_examined": verdict.colorings_examined,
              "note": verdict.note}
    if verdict.witness_coloring is not None:
        report["witness_coloring"] = list(verdict.witness_coloring.colors)
    if verdict.witness_embedding is not None:
        report["witness_embedding"] = list(verdict.witness_embedding.images)
    return (0 if verdict.verdict else 1), report


def _cmd_flip(ns):
    x = mio.parse_space_file(ns.x)
    f = mio.parse_space_file(ns.f)
    fc = rs.flip_coloring_witness(x, f, ns.epsilon)
    report = {"command": "flip", "embeddings": len(fc.space),
              "coloring": list(fc.coloring.colors),
              "eps0": fc.eps0, "refutes": fc.refutes}
    code = 0 if fc.refutes in (True, None) else 1
    return code, report


def _cmd_rdm(ns):
    x = mio.parse_space_file(ns.x)
    cover = [_int_list(part) for part in ns.cover.split(";")]
    if ns.isometries:
        group = [mt.PermutationIsometry(x, im)
                 for im in mio.parse_permutations(Path(ns.isometries).read_text())]
    else:
        group = mt.isometry_group(x)
    res = rs.rdm_finite_check(x, group, cover, ns.epsilon, ns.k)
    report = {"command": "rdm", "verdict": res.ok}
    if res.ok:
        report["witness_isometry"] = list(res.witness_isometry.images)
        report["witness_cover_index"] = res.witness_cover_index
    return (0 if res.ok else 1), report


def _cmd_melambda(ns):
    space = mio.parse_space_file(ns.space)
    f = mio.parse_step_function_text(Path(ns.f).read_text(), space)
    g = mio.parse_step_function_text(Path(ns.g).read_text(), space)
    val = cc.me_lambda(f, g, ns.lam)
    return 0, {"command": "melambda", "lambda": ns.lam, "value": val}


def _cmd_concentrate(ns):
    weights = tuple(mt.frac(t) for t in ns.weights.split(","))
    hs = cc.HammingSample(ns.n, weights, ns.seed)
    rep = cc.hamming_concentration(hs, ns.threshold, ns.epsilon, ns.samples)
    return 0, {"command": "concentrate", "n": rep.n, "eps": rep.epsilon,
               "threshold": rep.threshold, "shift": rep.shift,
               "samples": rep.samples, "seed": ns.seed,
               "mu_A": rep.mu_a_estimate, "mu_A_eps": rep.mu_a_eps_estimate,
               "exact": None if rep.exact_mu_a is None else
               {"mu_A": rep.exact_mu_a, "mu_A_eps": rep.exact_mu_a_eps},
               "oracle_bound": rep.oracle_bound}


def _cmd_sphere(ns):
    pm = mio.parse_matrix_file(ns.matrix)
    if pm.kind != "squared":
        raise ValueError("sphere expects a squared-distance file (header 'squared')")
    res = mt.embeddability_test(pm.rows, ns.mode)
    report = {"command": "sphere", "mode": ns.mode, "embeddable": res.embeddable,
              "pivots": [[i, v] for i, v in res.pivots]}
    if res.witness is not None:
        report["witness_vector"] = list(res.witness)
        report["witness_value"] = res.witness_value()
    return (0 if res.embeddable else 1), report


_HANDLERS = {
    "validate": _cmd_validate,
    "glue": _cmd_glue,
    "embed": _cmd_embed,
    "iso-group": _cmd_iso_group,
    "katetov": _cmd_katetov,
    "grow": _cmd_grow,
    "approx": _cmd_approx,
    "ramsey": _cmd_ramsey,
    "flip": _cmd_flip,
    "rdm": _cmd_rdm,
    "melambda": _cmd_melambda,
    "concentrate": _cmd_concentrate,
    "sphere": _cmd_sphere,
}


def run_scenario(ns) -> tuple[int, str]:
    """Dispatch a parsed scenario; returns (exit code, report text).

    Reports are emitted for codes 0 and 1; errors surface as code 2 with
    the failing stage named.
    """
    handler = _HANDLERS[ns.command]
    try:
        code, report = handler(ns)
    except (mt.MetricValidationError, mio.FormatError, ValueError, KeyError,
            ap.QuotientSearchError, ap.QuotientCapError,
            kt.FragmentBudgetError, OSError) as e:
        msg = f"{ns.command}: {e}"
        print(msg, file=sys.stderr)
        return 2, ""
    text = mio.emit_report(report, ns.out, timestamp=not ns.no_timestamp)
    return code, text


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    code, text = run_scenario(ns)
    if text and ns.out is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
