"""Command-line front end.

Subcommands:

* ``compute``      -- certified lower bound for a model/space pair.
* ``spectral``     -- one spectral-radius evaluation at fixed parameters.
* ``transitions``  -- dump one state's matrix row, symbolic or evaluated.
* ``oracle``       -- exact reachability, Monte Carlo survival, or the
                      brute-force child table.
* ``tables``       -- reproduce a results table (main, comparison,
                      inhomogeneous, three-d), with optional size caps.
* ``cache``        -- write or read the binary matrix cache.

Output formats: text (default), json (schema "perc-bound/1"), csv.
Exit codes: 0 success, 2 usage error, 3 spectral non-convergence,
4 matrix memory budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .errors import (
    BudgetError,
    MemoryBudgetError,
    NonConvergenceError,
    PercBoundError,
    UsageError,
)
from .models import Lattice, get_model, tag_from_letter
from .oracle import brute_force_children, exact_reach_probability, mc_survival
from .search import DEFAULT_BISECT_TOL, lower_bound, reproduce_tables
from .spaces import SpaceSpec, enumerate_space
from .spectral import (
    DEFAULT_MARGIN,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    evaluate,
    spectral_radius,
)
from .transition import build_matrix
from . import cache as cache_mod

SCHEMA = "perc-bound/1"


def _fmt(x) -> str:
    return format(x, ".12g")


def _round_floats(obj):
    """Normalize every float to 12 significant digits."""
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _emit(args, payload: dict, text_lines, csv_rows=None):
    """Write the result in the selected format."""
    if args.format == "json":
        doc = {"schema": SCHEMA, "command": payload.pop("_command")}
        doc.update(_round_floats(payload))
        out = json.dumps(doc, indent=2) + "\n"
    elif args.format == "csv":
        if csv_rows is None:
            payload.pop("_command", None)
            flat = _round_floats(payload)
            lines = ["key,value"] + [f"{k},{v}" for k, v in flat.items()]
            out = "\n".join(lines) + "\n"
        else:
            header, rows = csv_rows
            lines = [",".join(header)]
            for row in rows:
                lines.append(",".join(str(c) for c in row))
            out = "\n".join(lines) + "\n"
    else:
        out = "\n".join(text_lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _parse_space(model, text: str) -> SpaceSpec:
    try:
        parts = [int(t) for t in text.replace("x", ",").split(",")]
    except ValueError:
        raise UsageError(f"cannot parse space {text!r}") from None
    is3d = model.lattice is Lattice.VL3
    if len(parts) == 1:
        if is3d:
            return SpaceSpec.triangle(model, parts[0])
        return SpaceSpec.plain(model, parts[0])
    if len(parts) == 2:
        if not is3d:
            raise UsageError("two space values (L,focus) need a 3d model")
        return SpaceSpec.triangle(model, parts[0], parts[1])
    if len(parts) == 3:
        if is3d:
            raise UsageError("k,i,j spaces need a 2d model")
        return SpaceSpec.truncated(model, *parts)
    raise UsageError(f"space {text!r} must have 1, 2 or 3 components")


def _default_threads() -> int:
    env = os.environ.get("PERC_BOUND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _params(model, p: float, p2: Optional[float]):
    if model.arity == 1:
        return (p,)
    if p2 is None:
        raise UsageError(f"model {model.ident} needs --p2")
    return (p, p2)


def _add_common(sub, space=True, spectral=False):
    sub.add_argument("--model", required=True, help="model identifier")
    if space:
        sub.add_argument("--space", required=True,
                         help="k | k,i,j | L,focus (per model lattice)")
    sub.add_argument("--p2", type=float, default=None,
                     help="fixed second parameter for arity-2 models")
    if spectral:
        sub.add_argument("--spectral-tol", type=float, default=DEFAULT_TOL)
        sub.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
        sub.add_argument("--margin", type=float, default=DEFAULT_MARGIN)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="perc-bound",
        description="Certified lower bounds for oriented percolation thresholds",
    )
    ap.add_argument("--format", choices=("text", "json", "csv"), default="text")
    ap.add_argument("--output", default=None, help="write output to a file")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: PERC_BOUND_THREADS or 1)")
    ap.add_argument("--max-entries", type=int, default=None,
                    help="abort the matrix build past this many entries")
    sp = ap.add_subparsers(dest="command", required=True)

    c = sp.add_parser("compute", help="certified lower bound via dichotomy")
    _add_common(c, spectral=True)
    c.add_argument("--bisect-tol", type=float, default=DEFAULT_BISECT_TOL)
    c.add_argument("--verbose", action="store_true",
                   help="also print a 21-point radius grid scan")

    s = sp.add_parser("spectral", help="spectral radius at fixed parameters")
    _add_common(s, spectral=True)
    s.add_argument("--p", type=float, required=True)

    t = sp.add_parser("transitions", help="dump one state's matrix row")
    _add_common(t)
    t.add_argument("--state", required=True, help="window bit pattern, e.g. 1100")
    t.add_argument("--tag", default=None, help="variant tag letter (a-d)")
    t.add_argument("--p", type=float, default=None,
                   help="evaluate the row at this parameter value")

    o = sp.add_parser("oracle", help="independent verification oracles")
    osub = o.add_subparsers(dest="oracle_command", required=True)
    oe = osub.add_parser("exact", help="exact reach probability by subset DP")
    oe.add_argument("--model", required=True)
    oe.add_argument("--n", type=int, required=True)
    oe.add_argument("--p", type=float, required=True)
    oe.add_argument("--p2", type=float, default=None)
    om = osub.add_parser("mc", help="Monte Carlo survival estimate")
    om.add_argument("--model", required=True)
    om.add_argument("--p", type=float, required=True)
    om.add_argument("--p2", type=float, default=None)
    om.add_argument("--depth", type=int, default=400)
    om.add_argument("--trials", type=int, default=10000)
    om.add_argument("--seed", type=int, default=0)
    oc = osub.add_parser("children", help="brute-force child expectation table")
    _add_common(oc)
    oc.add_argument("--state", required=True)
    oc.add_argument("--tag", default=None)
    oc.add_argument("--p", type=float, default=None)

    tb = sp.add_parser("tables", help="reproduce a results table")
    tb.add_argument("selector",
                    choices=("main", "comparison", "inhomogeneous", "three-d"))
    tb.add_argument("--k", type=int, default=None,
                    help="cap 2d window sizes for desk-scale runs")
    tb.add_argument("--bisect-tol", type=float, default=DEFAULT_BISECT_TOL)

    ca = sp.add_parser("cache", help="binary matrix cache")
    casub = ca.add_subparsers(dest="cache_command", required=True)
    cw = casub.add_parser("write", help="build a matrix and write the cache")
    _add_common(cw)
    cw.add_argument("--out", required=True)
    cr = casub.add_parser("read", help="read a cache and summarize it")
    cr.add_argument("--in", dest="infile", required=True)
    cr.add_argument("--dump", action="store_true",
                    help="print the textual dump (small spaces only)")
    return ap


def _cmd_compute(args) -> int:
    model = get_model(args.model)
    spec = _parse_space(model, args.space)
    result = lower_bound(
        model, spec, p2=args.p2, bisect_tol=args.bisect_tol,
        margin=args.margin, spectral_tol=args.spectral_tol,
        max_iter=args.max_iter, threads=args.threads,
        max_entries=args.max_entries, verbose=args.verbose,
    )
    payload = {"_command": "compute"}
    payload.update(result.to_json())
    text = [
        f"model: {result.model_id}",
        f"space: {spec.label()}  ({result.state_count} states, "
        f"{result.distinct_poly_count} polynomials)",
        *( [f"p2: {_fmt(result.p2)}"] if result.p2 is not None else [] ),
        f"bound: {_fmt(result.bound)}",
        f"radius at bound: {_fmt(result.lambda_at_bound)}",
        f"bisection iterations: {result.bisection_iterations}",
        f"wall time: {_fmt(result.wall_time)} s",
    ]
    csv_rows = (
        ["model", "space", "p2", "bound", "lambda", "states", "polys", "seconds"],
        [[result.model_id, spec.label(),
          "" if result.p2 is None else _fmt(result.p2),
          _fmt(result.bound), _fmt(result.lambda_at_bound),
          result.state_count, result.distinct_poly_count,
          _fmt(result.wall_time)]],
    )
    _emit(args, payload, text, csv_rows)
    return 0


def _cmd_spectral(args) -> int:
    model = get_model(args.model)
    spec = _parse_space(model, args.space)
    space = enumerate_space(spec)
    matrix = build_matrix(model, space, threads=args.threads,
                          max_entries=args.max_entries)
    numeric = evaluate(matrix, _params(model, args.p, args.p2))
    report = spectral_radius(numeric, tol=args.spectral_tol,
                             max_iter=args.max_iter)
    payload = {"_command": "spectral", "model": model.ident,
               "space": spec.to_json(), "p": args.p, "p2": args.p2}
    payload.update(report.to_json())
    text = [
        f"model: {model.ident}  space: {spec.label()}  p={_fmt(args.p)}"
        + (f" p2={_fmt(args.p2)}" if args.p2 is not None else ""),
        f"radius: {_fmt(report.radius_estimate)}",
        f"iterations: {report.iterations}  converged: {report.converged}",
        f"residual: {_fmt(report.residual)}",
    ]
    _emit(args, payload, text)
    return 0 if report.converged else 3


def _cmd_transitions(args) -> int:
    model = get_model(args.model)
    spec = _parse_space(model, args.space)
    space = enumerate_space(spec)
    matrix = build_matrix(model, space, threads=args.threads,
                          max_entries=args.max_entries)
    bits = space.parse_bits(args.state)
    tag = tag_from_letter(model, args.tag) if args.tag else None
    ordinal = space.ordinal(bits, tag)
    entries = []
    for col, pid in matrix.row(ordinal):
        poly = matrix.pool[pid]
        entry = {"child": space.render_state(col), "poly": poly.render()}
        if args.p is not None:
            entry["value"] = poly.eval(_params(model, args.p, args.p2))
        entries.append(entry)
    payload = {"_command": "transitions", "model": model.ident,
               "space": spec.to_json(), "state": space.render_state(ordinal),
               "row": entries}
    text = [f"row of {space.render_state(ordinal)} ({len(entries)} children):"]
    for e in entries:
        line = f"  -> {e['child']} : {e['poly']}"
        if "value" in e:
            line += f" = {_fmt(e['value'])}"
        text.append(line)
    _emit(args, payload, text)
    return 0


def _cmd_oracle(args) -> int:
    model = get_model(args.model)
    if args.oracle_command == "exact":
        value = exact_reach_probability(model, args.n, _params(model, args.p, args.p2))
        payload = {"_command": "oracle-exact", "model": model.ident,
                   "n": args.n, "p": args.p, "p2": args.p2,
                   "probability": value}
        _emit(args, payload, [f"P(O -> level {args.n}) = {_fmt(value)}"])
        return 0
    if args.oracle_command == "mc":
        result = mc_survival(model, _params(model, args.p, args.p2),
                             depth=args.depth, trials=args.trials,
                             seed=args.seed, threads=args.threads)
        payload = {"_command": "oracle-mc", "model": model.ident,
                   "p": args.p, "p2": args.p2}
        payload.update(result.to_json())
        _emit(args, payload, [
            f"survival to depth {result.depth}: {_fmt(result.estimate)}"
            f"  (99% CI [{_fmt(result.ci_low)}, {_fmt(result.ci_high)}],"
            f" {result.survivors}/{result.trials} trials, seed {result.seed})",
        ])
        return 0
    # children
    spec = _parse_space(model, args.space)
    space = enumerate_space(spec)
    bits = space.parse_bits(args.state)
    tag = tag_from_letter(model, args.tag) if args.tag else None
    table = brute_force_children(model, space, bits, tag)
    entries = []
    for ordinal, poly in table.items():
        entry = {"child": space.render_state(ordinal), "poly": poly.render()}
        if args.p is not None:
            entry["value"] = poly.eval(_params(model, args.p, args.p2))
        entries.append(entry)
    payload = {"_command": "oracle-children", "model": model.ident,
               "space": spec.to_json(), "state": args.state, "children": entries}
    text = [f"brute-force children of {args.state} ({len(entries)} types):"]
    for e in entries:
        line = f"  -> {e['child']} : {e['poly']}"
        if "value" in e:
            line += f" = {_fmt(e['value'])}"
        text.append(line)
    _emit(args, payload, text)
    return 0


def _cmd_tables(args) -> int:
    results = reproduce_tables(args.selector, k=args.k, threads=args.threads,
                               bisect_tol=args.bisect_tol,
                               max_entries=args.max_entries)
    payload = {"_command": "tables", "selector": args.selector,
               "rows": [r.to_json() for r in results]}
    header = ["model", "space", "p2", "bound", "lambda", "states", "polys",
              "seconds"]
    rows = [
        [r.model_id, r.space.label(), "" if r.p2 is None else _fmt(r.p2),
         _fmt(r.bound), _fmt(r.lambda_at_bound), r.state_count,
         r.distinct_poly_count, _fmt(r.wall_time)]
        for r in results
    ]
    text = ["  ".join(header)]
    for row in rows:
        text.append("  ".join(str(c) for c in row))
    _emit(args, payload, text, (header, rows))
    return 0


def _cmd_cache(args) -> int:
    if args.cache_command == "write":
        model = get_model(args.model)
        spec = _parse_space(model, args.space)
        space = enumerate_space(spec)
        matrix = build_matrix(model, space, threads=args.threads,
                              max_entries=args.max_entries)
        with open(args.out, "wb") as fh:
            cache_mod.write_cache(matrix, fh)
        payload = {"_command": "cache-write", "model": model.ident,
                   "space": spec.to_json(), "states": matrix.dimension,
                   "entries": matrix.nnz, "polys": len(matrix.pool),
                   "path": args.out}
        _emit(args, payload, [
            f"wrote {args.out}: {matrix.dimension} states, {matrix.nnz} entries, "
            f"{len(matrix.pool)} polynomials",
        ])
        return 0
    with open(args.infile, "rb") as fh:
        matrix = cache_mod.read_cache(fh)
    payload = {"_command": "cache-read", "model": matrix.model.ident,
               "space": matrix.space.spec.to_json(),
               "states": matrix.dimension, "entries": matrix.nnz,
               "polys": len(matrix.pool)}
    text = [
        f"{args.infile}: {matrix.model.ident} {matrix.space.spec.label()} "
        f"states={matrix.dimension} entries={matrix.nnz} polys={len(matrix.pool)}",
    ]
    if args.dump:
        text.append(cache_mod.dump_text(matrix).rstrip("\n"))
    _emit(args, payload, text)
    return 0


_HANDLERS = {
    "compute": _cmd_compute,
    "spectral": _cmd_spectral,
    "transitions": _cmd_transitions,
    "oracle": _cmd_oracle,
    "tables": _cmd_tables,
    "cache": _cmd_cache,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if args.threads is None:
        args.threads = _default_threads()
    try:
        return _HANDLERS[args.command](args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MemoryBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (UsageError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PercBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
