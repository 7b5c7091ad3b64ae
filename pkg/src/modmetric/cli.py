"""Command-line entry point.

Exit codes: 0 success, 1 failed check or experiment, 2 input error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path as FsPath

import numpy as np

from . import analysis, experiments
from .essential import (MetricMatrix, NoConnectionError, Params, essential_metric,
                        essential_row)
from .graph import EdgeLengthMap, GraphError, distance_matrix
from .io import density_svg, graph_to_json, load_graph, parse_generator
from .modulus import FamilySpec, ModulusNotConverged, p_modulus
from .nodesets import parse_node_set
from .pullback import (edge_length_map_from_json, edge_length_map_to_json, factorization_check,
                       path_pullback_metric, pullback_essential_metric, quotient_space)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("modmetric")


class InputError(Exception):
    pass


def parse_p(text: str) -> float:
    try:
        p = math.inf if text.strip().lower() in ("inf", "infinity") else float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid p {text!r}") from None
    if not 1.0 <= p <= math.inf:
        raise argparse.ArgumentTypeError("p must lie in [1, inf]")
    return p


def positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("value must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--graph", help="graph JSON file")
    src.add_argument("--gen", help="generator spec, e.g. grid_square:n=8")
    common.add_argument("--p", type=parse_p, default=2.0, help="exponent in [1, inf]")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--svg", action="store_true", help="also write SVG figures")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for pair solves")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=positive, default=1e-6, help="relative duality gap")
    common.add_argument("--tol-lam", type=positive, help="essential-length bisection width")
    common.add_argument("--tol-c", type=positive, default=1e-3, help="quasiconvexity bisection width")
    common.add_argument("--tol-quot", type=positive, help="quotient identification threshold")
    common.add_argument("--eps-mod", type=positive, help="modulus positivity threshold")
    common.add_argument("--set-e", help="node set: ids:1,2 | ball:x=ID,r=VAL | rect:x0,y0,x1,y1")
    common.add_argument("--set-f", help="second node set, same grammar")
    common.add_argument("--nodes", help="node sample for metric matrices, same grammar")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="modmetric", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("modulus", parents=[common], help="p-modulus of a curve family")
    m.add_argument("--cap", type=positive, help="uniform cap on path length")
    m.add_argument("--cap-factor", type=float, help="per-pair cap C * d(s, t)")

    e = sub.add_parser("essmetric", parents=[common], help="essential metric d_p")
    e.add_argument("--delta", default="0", help="comma-separated ball radii, largest first")

    pb = sub.add_parser("pullback", parents=[common], help="essential and path pull-backs")
    pb.add_argument("--lu", help="edge length map JSON (generators may supply one)")

    t = sub.add_parser("thickness", parents=[common], help="refinement thickness profile")
    t.add_argument("--levels", type=int, default=4)
    t.add_argument("--C", type=float, default=2.0, dest="C")
    t.add_argument("--critical-p", type=float)
    t.add_argument("--rel-change", type=positive, default=0.25)
    t.add_argument("--min-exponent", type=float, default=-0.1)

    sub.add_parser("quasiconvexity", parents=[common], help="least thick quasiconvexity constant")

    s = sub.add_parser("sobcheck", parents=[common], help="Sobolev-to-Lipschitz check of d_p(x0, .)")
    s.add_argument("--x0", type=int, default=0)
    s.add_argument("--function", help="JSON {values: [...], gradient: number | [...]}")

    x = sub.add_parser("experiment", parents=[common], help="run a reference experiment")
    x.add_argument("name", choices=sorted(experiments.EXPERIMENTS))
    x.add_argument("--n", type=int, help="resolution override")
    return ap


# -- helpers ---------------------------------------------------------------------

def _load(args):
    if args.graph:
        return load_graph(args.graph), None
    if args.gen:
        return parse_generator(args.gen)
    raise InputError("one of --graph or --gen is required")


def _sets(args, g, need=("set_e", "set_f")):
    out = []
    for name in need:
        spec = getattr(args, name)
        if not spec:
            raise InputError(f"--{name.replace('_', '-')} is required")
        out.append(parse_node_set(spec, g))
    return out


def _nodes(args, g):
    if args.nodes:
        return sorted(parse_node_set(args.nodes, g))
    return list(range(g.n_nodes))


def _params(args, delta="0") -> Params:
    try:
        sched = tuple(float(t) for t in delta.split(","))
    except ValueError:
        raise InputError(f"bad --delta {delta!r}") from None
    return Params(eps_mod=args.eps_mod, tol_lam=args.tol_lam, tol=args.tol, delta_schedule=sched)


def _write(out: FsPath, name: str, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, sort_keys=True)
    (out / name).write_text(text if text.endswith("\n") else text + "\n")


def _matrix_files(out, stem, mm: MetricMatrix):
    _write(out, f"{stem}.csv", mm.to_csv())
    _write(out, f"{stem}.json", mm.to_dict())


# -- commands ---------------------------------------------------------------------

def cmd_modulus(args, out):
    g, _ = _load(args)
    E, F = _sets(args, g)
    fam = FamilySpec(E, F, cap_value=args.cap or math.inf, cap_factor=args.cap_factor)
    res = p_modulus(g, fam, args.p, tol=args.tol)
    _write(out, "modulus.json", res.to_dict())
    if args.svg and g.pos is not None:
        _write(out, "rho.svg", density_svg(g, res.rho, f"optimal density, p={args.p:g}"))
    print(f"modulus {res.value:.10g} ({res.flag}, {res.iters} iterations)")
    return EXIT_OK


def cmd_essmetric(args, out):
    g, _ = _load(args)
    nodes = _nodes(args, g)
    params = _params(args, args.delta)
    em = essential_metric(g, args.p, nodes, params, jobs=args.jobs)
    _matrix_files(out, "essential_metric", em.metric)
    _write(out, "predistance.csv", MetricMatrix(nodes, em.pre).to_csv())
    _write(out, "profiles.json", {f"{a}-{b}": prof for (a, b), prof in sorted(em.profiles.items())})
    d = distance_matrix(g, nodes)
    print(f"{len(nodes)} nodes; max d_p/d = {_max_ratio(em.metric.values, d):.6g}; "
          f"triangle repair {em.discrepancy:.3g}")
    return EXIT_OK


def _max_ratio(A, B):
    mask = B > 0
    return float((A[mask] / B[mask]).max()) if mask.any() else 1.0


def cmd_pullback(args, out):
    g, lu = _load(args)
    if args.lu:
        lu = edge_length_map_from_json(FsPath(args.lu).read_text(), g)
    if lu is None:
        raise InputError("--lu is required for this graph")
    nodes = _nodes(args, g)
    params = _params(args)
    em = pullback_essential_metric(g, lu, args.p, nodes, params, jobs=args.jobs)
    pm = path_pullback_metric(g, lu, nodes)
    tol_quot = args.tol_quot or params.resolved(g, args.p).tol_lam
    _matrix_files(out, "pullback_essential", em.metric)
    _matrix_files(out, "pullback_path", pm)
    _write(out, "edge_length_map.json", edge_length_map_to_json(lu))
    _write(out, "quotient_essential.json", quotient_space(em.metric, tol_quot).to_dict())
    _write(out, "quotient_path.json", quotient_space(pm, tol_quot).to_dict())
    rep = factorization_check(pm, em.metric, 2 * tol_quot)
    _write(out, "factorization.json", rep.to_dict())
    print(f"factorization {'passed' if rep.passed else 'FAILED'} "
          f"(max violation {rep.max_violation:.3g})")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_thickness(args, out):
    g, _ = _load(args)
    if not g.recipe:
        raise InputError("thickness profiles need a generated graph (--gen)")
    if args.levels < 3:
        raise InputError("--levels must be >= 3")
    _sets(args, g)  # validate before computing

    def sampler(spec):
        return lambda h: parse_node_set(spec, h)

    prof = analysis.thickness_profile(g, args.levels, args.p, args.C, sampler(args.set_e),
                                      sampler(args.set_f), rel_change=args.rel_change,
                                      min_exponent=args.min_exponent,
                                      critical_p=args.critical_p)
    _write(out, "thickness.json", prof.to_dict())
    print(f"verdict {prof.verdict} (exponent {prof.exponent:.3g})")
    return EXIT_OK


def cmd_quasiconvexity(args, out):
    g, _ = _load(args)
    E, F = _sets(args, g)
    res = analysis.quasiconvexity_constant(g, args.p, E, F, args.eps_mod, args.tol_c, args.tol)
    _write(out, "quasiconvexity.json", res.to_dict())
    print(f"C* = {res.value:.6g} in [{res.lo:.6g}, {res.hi:.6g}]")
    return EXIT_OK


def cmd_sobcheck(args, out):
    g, _ = _load(args)
    if not 0 <= args.x0 < g.n_nodes:
        raise InputError("--x0 out of range")
    params = _params(args)
    nodes = sorted(set(_nodes(args, g)) | {args.x0})
    if args.function:
        doc = json.loads(FsPath(args.function).read_text())
        try:
            f = analysis.DiscreteFunction(doc["values"], doc.get("gradient", 1.0))
            f.gradient_on(g)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad function file: {exc}") from None
        if len(f.values) != g.n_nodes:
            raise InputError("function must have one value per node")
    else:
        f = analysis.DiscreteFunction(essential_row(g, args.x0, args.p, params, jobs=args.jobs))
    dp = essential_metric(g, args.p, nodes, params, jobs=args.jobs).metric
    tol = 2 * params.resolved(g, args.p).tol_lam
    try:
        rep = analysis.sobolev_to_lipschitz_check(g, dp, f, tol)
    except analysis.PreconditionError as exc:
        _write(out, "sobcheck.json", {"precondition": exc.report.to_dict(), "passed": False})
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(out, "sobcheck.json", rep.to_dict())
    print(f"Lipschitz constant w.r.t. d_p: {rep.constant:.6g} "
          f"({'pass' if rep.passed else 'FAIL'})")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_experiment(args, out):
    kw = {}
    if args.name == "grid-identity":
        kw = {"n": args.n or 16, "p": args.p, "seed": args.seed, "jobs": args.jobs,
              "params": _params(args)}
    elif args.name == "collapsed-disc":
        kw = {"n": args.n or 64, "p": args.p, "seed": args.seed, "jobs": args.jobs}
        if args.eps_mod:
            kw["eps_mod"] = args.eps_mod
    elif args.n:
        kw = {"levels": tuple(args.n * 2 ** k for k in range(4))}
    rep = experiments.EXPERIMENTS[args.name](**kw)
    _write(out, "report.json", rep.to_dict())
    _experiment_artifacts(args, out, rep)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} (bound {c.bound:.6g})")
    if not rep.passed:
        print(f"experiment {args.name} failed: {', '.join(rep.failed())}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _experiment_artifacts(args, out, rep):
    a = rep.artifacts
    if rep.experiment == "grid-identity":
        _matrix_files(out, "essential_metric", a["essential"].metric)
        _matrix_files(out, "graph_metric", a["distance"])
    elif rep.experiment == "cusp-threshold":
        _write(out, "profiles.json", {k: v.to_dict() if hasattr(v, "to_dict") else v
                                      for k, v in sorted(a.items())})
    else:
        _matrix_files(out, "pullback_essential", a["essential"].metric)
        _matrix_files(out, "pullback_path", a["path"])
        _write(out, "quotient_essential.json", a["quotient_essential"].to_dict())
        _write(out, "quotient_path.json", a["quotient_path"].to_dict())
        _write(out, "factorization.json", a["factorization"].to_dict())
        _write(out, "graph.json", graph_to_json(a["graph"]))
        if args.svg:
            lu: EdgeLengthMap = a["lu"]
            _write(out, "collapsed_edges.svg",
                   density_svg(a["graph"], (lu.values == 0).astype(float), "collapsed edges"))


COMMANDS = {"modulus": cmd_modulus, "essmetric": cmd_essmetric, "pullback": cmd_pullback,
            "thickness": cmd_thickness, "quasiconvexity": cmd_quasiconvexity,
            "sobcheck": cmd_sobcheck, "experiment": cmd_experiment}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    out = FsPath(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (InputError, GraphError, NoConnectionError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ModulusNotConverged as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
