"""Command-line entry point: ``flexaq {kb build,query,bench,fixture}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .engine import (RunConfig, benchmark, fixture_tables, generate_fixture, load_tables,
                     prefix_tables, run_approximate, run_exact, write_report)
from .errors import ExecutionError, FlexaqError, QueryValidationError, ValidationError
from .fca import DEFAULT_ALPHA, MAX_CELLS
from .kb import AttributeSpec, build_kb, load_kb, save_kb
from .query import IntervalKind, parse, rewrite_to_approximate

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _csv_list(conv):
    def parse_list(text):
        try:
            return [conv(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse_list


def _interval(text):
    try:
        return IntervalKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexaq", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    kb = sub.add_parser("kb", help="knowledge base tools")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    build = kb_sub.add_parser("build", help="derive linguistic terms from CSV data")
    build.add_argument("--data", required=True, type=Path)
    build.add_argument("--out", required=True, type=Path)
    build.add_argument("--k", type=int, default=3, help="terms per attribute")
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--attr", action="append", default=[],
                       help="Table.column, Table.column:K or Table.column=name1,name2,... "
                            "(repeatable; default: every numeric non-key column)")

    query = sub.add_parser("query", help="run a flexible query")
    _common_query_args(query)
    query.add_argument("--mode", choices=("exact", "approx"), default="approx")
    query.add_argument("--fraction", type=float, default=0.1)
    query.add_argument("--export-lattice", type=Path, metavar="OUT.dot")

    bench = sub.add_parser("bench", help="time exact vs approximate evaluation")
    _common_query_args(bench, data_required=False)
    bench.add_argument("--sizes", type=_csv_list(int), required=True)
    bench.add_argument("--fractions", type=_csv_list(float), default=[0.1])
    bench.add_argument("--reps", type=int, default=5)
    bench.add_argument("--out", type=Path, required=True)

    fixture = sub.add_parser("fixture", help="write the synthetic Patient/Death tables")
    fixture.add_argument("--rows", type=int, required=True)
    fixture.add_argument("--seed", type=int, default=0)
    fixture.add_argument("--out", type=Path, required=True)
    return p


def _common_query_args(p, data_required=True):
    p.add_argument("--data", type=Path, required=data_required,
                   help="directory of CSV files" + ("" if data_required else
                                                    "; omitted: synthetic fixture per size"))
    p.add_argument("--kb", type=Path, required=True)
    p.add_argument("--sql", required=True)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--interval", type=_interval, default=IntervalKind.LARGE_SAMPLE,
                   help="conservative or clt")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--driving", help="table to sample (default: first in FROM)")
    p.add_argument("--max-cells", type=int, default=MAX_CELLS)


def cmd_kb_build(args) -> int:
    tables = load_tables(args.data)
    if args.attr:
        specs = [AttributeSpec.parse(a, args.k) for a in args.attr]
    else:
        specs = [AttributeSpec(t.name, c, args.k) for t in tables.values()
                 for c, typ in t.columns
                 if typ == "numeric" and not c.lower().endswith("id")]
    kb = build_kb(tables.values(), specs, args.seed)
    save_kb(kb, args.out)
    for attr in kb.attributes:
        print(f"{attr.qualified}: " + ", ".join(t.name for t in attr.terms))
    return EXIT_OK


def cmd_query(args) -> int:
    tables = load_tables(args.data)
    kb = load_kb(args.kb)
    q = parse(args.sql)
    if args.mode == "exact":
        result = run_exact(q, tables, kb, args.alpha, args.driving)
        if args.export_lattice:
            logging.warning("--export-lattice ignored in exact mode")
    else:
        aq = rewrite_to_approximate(q, args.confidence, args.interval, args.fraction)
        cfg = RunConfig(args.data, args.kb, args.fraction, args.confidence, args.interval,
                        args.alpha, args.seed, "approx", args.driving, args.max_cells)
        result = run_approximate(aq, tables, kb, cfg)
        if args.export_lattice:
            args.export_lattice.write_text(result.lattice.to_dot(), encoding="utf-8")
    print(result.render())
    return EXIT_OK


def cmd_bench(args) -> int:
    kb = load_kb(args.kb)
    q = parse(args.sql)
    if args.data is None:
        def make_tables(size):
            return fixture_tables(size, args.seed)
    else:
        tables = load_tables(args.data)
        driving = args.driving or q.tables[0].name
        driving = next((t for t in tables if t.lower() == driving.lower()), driving)
        make_tables = prefix_tables(tables, driving)
    report = benchmark(q, make_tables, kb, args.fractions, args.sizes, args.reps,
                       seed=args.seed, confidence=args.confidence,
                       interval_kind=args.interval, alpha=args.alpha, driving=args.driving)
    write_report(report, args.out)
    for row in report:
        print(f"{row.rows:>8} {row.mode:<6} {row.fraction:<5} {row.median_ms:9.1f} ms  "
              f"max rel err {row.max_rel_error:.4f}")
    return EXIT_OK


def cmd_fixture(args) -> int:
    for path in generate_fixture(args.rows, args.seed, args.out):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"query": cmd_query, "bench": cmd_bench, "fixture": cmd_fixture,
               "kb": cmd_kb_build}[args.command]
    try:
        return handler(args)
    except QueryValidationError as exc:
        for d in exc.diagnostics:
            print(d.render(), file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, ValueError) as exc:
        print(f"ERROR {type(exc).__name__} {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ExecutionError, FlexaqError, OSError) as exc:
        print(f"ERROR {type(exc).__name__} {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
