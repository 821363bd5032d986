"""Approximate evaluation of flexible (fuzzy-predicate) aggregate queries."""

from .engine import (RunConfig, ResultTable, benchmark, fixture_tables, generate_fixture,
                     ingest_csv, load_tables, run_approximate, run_exact)
from .fca import FormalContext, build_lattice, common_attributes, common_objects
from .kb import KnowledgeBase, TrapezoidalTerm, build_partition, load_kb, membership, save_kb
from .query import (ApproximateQuery, FlexibleQuery, IntervalKind, parse, pretty_print,
                    rewrite_to_approximate, validate)

__version__ = "0.1.0"

__all__ = [
    "ApproximateQuery", "FlexibleQuery", "FormalContext", "IntervalKind", "KnowledgeBase",
    "ResultTable", "RunConfig", "TrapezoidalTerm", "benchmark", "build_lattice",
    "build_partition", "common_attributes", "common_objects", "fixture_tables",
    "generate_fixture", "ingest_csv", "load_kb", "load_tables", "membership", "parse",
    "pretty_print", "rewrite_to_approximate", "run_approximate", "run_exact", "save_kb",
    "validate",
]
