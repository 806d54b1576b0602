"""Command-line front end.

Subcommands mirror the library: parse/norm/weights/stable/spoke on single
graph strings, verdict on a pair, qt for the quadratic-tangles obstruction,
classify for weed enumeration (JSON lines, optionally with rendered
figures), and eval for closed diagram expressions.

Output is JSON lines, one object per result; --table adds a readable
summary.  Exit codes: 0 success, 1 domain error, 2 resource limit,
64 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import codec
from .classify import Weed, classify_weed
from .errors import DomainError, PgkitError, ResourceError
from .graphs import GraphPair
from .obstructions import is_spoke, is_stable_at, jellyfish_verdict, qt_obstruction
from .spectral import fp_weights, graph_norm

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_RESOURCE = 2
EXIT_USAGE = 64


def _emit(obj, out):
    out.write(json.dumps(obj) + "\n")


def cmd(argv, out=None):
    """Run one CLI invocation; returns the exit code."""
    out = out or sys.stdout
    parser = argparse.ArgumentParser(prog="pgkit", add_help=True)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("parse", help="parse a graph string and report its shape")
    p.add_argument("graph")

    p = sub.add_parser("norm", help="graph norm of a graph string")
    p.add_argument("graph")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("weights", help="Frobenius-Perron weights")
    p.add_argument("graph")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("stable", help="stability at a depth")
    p.add_argument("graph")
    p.add_argument("--depth", type=int, required=True)

    p = sub.add_parser("spoke", help="spoke-graph check")
    p.add_argument("graph")

    p = sub.add_parser("verdict", help="jellyfish existence verdict for a pair")
    p.add_argument("principal")
    p.add_argument("dual")

    p = sub.add_parser("qt", help="quadratic tangles obstruction")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--r", type=float, required=True)

    p = sub.add_parser("classify", help="enumerate and prune a weed")
    p.add_argument("weed", help="weed description file (JSON)")
    p.add_argument("--figures", help="directory for rendered survivor figures")
    p.add_argument("--table", action="store_true", help="append a readable summary")

    p = sub.add_parser("eval", help="evaluate a closed diagram expression")
    p.add_argument("expr", help="s-expression file, or - for stdin")
    p.add_argument("--system", required=True, help="generator system file (JSON)")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage()
        return EXIT_USAGE

    try:
        return _dispatch(args, out)
    except ResourceError as e:
        _emit({"error": str(e), "kind": "resource"}, out)
        return EXIT_RESOURCE
    except (DomainError, PgkitError) as e:
        _emit({"error": str(e), "kind": type(e).__name__}, out)
        return EXIT_DOMAIN


def _dispatch(args, out):
    if args.command == "parse":
        g = codec.parse(args.graph)
        _emit(
            {
                "depths": list(g.depth_sizes),
                "vertices": g.num_vertices(),
                "edges": g.num_edges(),
                "supertransitivity": __import__(
                    "pgkit.graphs", fromlist=["supertransitivity"]
                ).supertransitivity(g),
                "canonical": codec.serialize(g),
                "has_duals": g.duals is not None,
            },
            out,
        )
        return EXIT_OK

    if args.command == "norm":
        g = codec.parse(args.graph)
        norm = graph_norm(g, args.tol)
        _emit({"norm": norm, "norm_squared": norm * norm}, out)
        return EXIT_OK

    if args.command == "weights":
        g = codec.parse(args.graph)
        w = fp_weights(g, args.tol)
        _emit(
            {
                "delta": w.eigenvalue,
                "weights": [
                    {"depth": d, "index": i, "weight": w[(d, i)]}
                    for d, i in g.vertices()
                ],
            },
            out,
        )
        return EXIT_OK

    if args.command == "stable":
        g = codec.parse(args.graph)
        _emit({"depth": args.depth, "stable": is_stable_at(g, args.depth)}, out)
        return EXIT_OK

    if args.command == "spoke":
        g = codec.parse(args.graph)
        ok, center = is_spoke(g)
        _emit({"spoke": ok, "center_depth": center}, out)
        return EXIT_OK

    if args.command == "verdict":
        pair = GraphPair(codec.parse(args.principal), codec.parse(args.dual))
        v = jellyfish_verdict(pair)
        _emit(
            {
                "n": v.n,
                "one_strand": v.one_strand,
                "two_strand_plus": v.two_strand_plus,
                "two_strand_minus": v.two_strand_minus,
            },
            out,
        )
        return EXIT_OK

    if args.command == "qt":
        verdict, omega = qt_obstruction(args.n, args.delta, args.r)
        _emit(
            {
                "status": verdict.status,
                "rule": verdict.rule,
                "note": verdict.note,
                "omega_plus_inverse": omega,
            },
            out,
        )
        return EXIT_OK

    if args.command == "classify":
        with open(args.weed) as fh:
            weed = Weed.from_dict(json.load(fh))
        reports = classify_weed(weed)
        figdir = args.figures
        if figdir:
            os.makedirs(figdir, exist_ok=True)
        fignum = 0
        for rep in reports:
            obj = rep.to_dict()
            if figdir and rep.status in ("survives", "needs_external"):
                from .plotting import save_pair_figure

                fignum += 1
                path = os.path.join(figdir, f"candidate_{fignum:04d}.png")
                pair = GraphPair(codec.parse(rep.pair[0]), codec.parse(rep.pair[1]))
                save_pair_figure(pair, path, caption=rep.status)
                obj["figure"] = path
            _emit(obj, out)
        if args.table:
            counts = {}
            for rep in reports:
                counts[rep.status] = counts.get(rep.status, 0) + 1
            out.write("status      count\n")
            for k in sorted(counts):
                out.write(f"{k:<11s} {counts[k]}\n")
        return EXIT_OK

    if args.command == "eval":
        from .jellyfish import derive_generator_system, evaluate, parse_sexp
        from .tl import TLDiagram, TLElement

        text = (
            sys.stdin.read()
            if args.expr == "-"
            else open(args.expr).read()
        )
        with open(args.system) as fh:
            spec = json.load(fh)
        delta = spec.get("delta")
        elements = []
        labels = []
        for label, terms in spec["generators"].items():
            labels.append(label)
            elem = None
            for coeff, pairing in terms:
                pairs = []
                for bit in pairing.split(","):
                    a, b = bit.split("-")
                    pairs.append((int(a) - 1, int(b) - 1))
                k = len(pairs)
                d = TLDiagram.from_disk_pairs(k, k, pairs)
                t = TLElement.from_diagram(d, delta, coeff)
                elem = t if elem is None else elem + t
            elements.append(elem)
        sys_ = derive_generator_system(elements, delta=delta, labels=labels)
        expr = parse_sexp(text)
        value = evaluate(expr, sys_)
        shown = value if isinstance(value, (int, float, complex)) else repr(value)
        _emit({"value": shown}, out)
        return EXIT_OK

    return EXIT_USAGE


def main():
    sys.exit(cmd(sys.argv[1:]))


if __name__ == "__main__":
    main()
