"""Command line: ``python -m liftedve {query,bench,plot-data}``."""

import argparse
import csv
import sys

from . import bench
from .core import parse_ground_atom
from .engine import run_query
from .errors import InputError, LiftedError, SizeError
from .ground import CAP_ENV, default_cap, ground_model, ve_marginal
from .modelio import parse_evidence, parse_model

EXIT_CODES = {"input": 2, "parse": 2, "size": 3, "precondition": 4, "structural": 4, "numeric": 5}


def _read(path):
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _floats(text, what):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad {what} list {text!r}") from None


def cmd_query(args):
    model = parse_model(_read(args.model))
    evidence = parse_evidence(_read(args.evidence), model) if args.evidence else {}
    query = parse_ground_atom(args.query, model)
    res = run_query(model, query, evidence, log_space=True if args.log_space else None, trace=args.trace)
    if args.trace:
        for line in res.trace:
            print(line)
    print(res)
    print(f"opCount={res.op_count} rowsCreated={res.rows_created} wallTimeMs={res.wall_time * 1000:.3f}")
    if args.oracle:
        cap = default_cap()
        try:
            ref = ve_marginal(ground_model(model, evidence, cap), query, cap)
        except SizeError as e:
            print(f"oracle: skipped:size-cap ({e})")
        else:
            body = ", ".join(f"{v}: {p:.10g}" for v, p in ref.items())
            print(f"oracle = {{{body}}}")
            print(f"maxRelError={bench.max_rel_error(ref, res.distribution):.3e}")
    return 0


def cmd_bench(args):
    rows = []
    for k in range(args.repeat):
        spec = bench.BenchmarkSpec(
            args.family, args.n, m=args.m, M=args.workshops, evidence_frac=args.evidence_frac, seed=args.seed + k
        )
        rows.append(bench.run_bench(spec, oracle=args.oracle, log_space=not args.linear))
    bench.write_rows(rows, args.csv)
    return 0


def cmd_plot_data(args):
    sizes = [int(x) for x in _floats(args.sizes, "size")]
    fracs = _floats(args.evidence_fracs, "evidence fraction")
    rows = bench.plot_data(args.family, sizes, fracs, seeds=range(args.seeds), m=args.m)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=bench.PLOT_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.csv:
            out.close()
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="liftedve", description="Lifted variable elimination with constraint trees.")
    p.epilog = f"The ground oracle's size cap (binary randvars per table) can be set with {CAP_ENV}."
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("query", help="compute P(query | evidence) for a model file")
    q.add_argument("--model", required=True)
    q.add_argument("--evidence")
    q.add_argument("--query", required=True, help='ground atom, e.g. "Attends(ann)"')
    q.add_argument("--oracle", action="store_true", help="also run ground VE and report the error")
    q.add_argument("--log-space", action="store_true", help="keep potentials as logs from the start")
    q.add_argument("--trace", action="store_true", help="print one line per operator application")
    q.set_defaults(fn=cmd_query)

    b = sub.add_parser("bench", help="run a synthetic benchmark and emit CSV rows")
    b.add_argument("--family", required=True, choices=bench.FAMILIES)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--m", type=int, default=2, help="attribute count (workshop-attrs)")
    b.add_argument("--workshops", type=int, default=None, help="workshop count (competing); defaults to N")
    b.add_argument("--evidence-frac", type=float, default=0.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repeat", type=int, default=1, help="rows with seeds seed, seed+1, ...")
    b.add_argument("--oracle", action="store_true")
    b.add_argument("--linear", action="store_true", help="start in linear space (falls back to logs)")
    b.add_argument("--csv")
    b.set_defaults(fn=cmd_bench)

    d = sub.add_parser("plot-data", help="runtime series per domain size for log-scale plots")
    d.add_argument("--family", required=True, choices=bench.FAMILIES)
    d.add_argument("--sizes", default="50,100,200,500,1000")
    d.add_argument("--evidence-fracs", default="0.2")
    d.add_argument("--seeds", type=int, default=1)
    d.add_argument("--m", type=int, default=2)
    d.add_argument("--csv")
    d.set_defaults(fn=cmd_plot_data)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except LiftedError as e:
        print(f"error [{e.category}]: {e}", file=sys.stderr)
        return EXIT_CODES.get(e.category, 1)
    except RuntimeError as e:
        print(f"error [internal]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
