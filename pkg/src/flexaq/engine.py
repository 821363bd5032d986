"""Query execution: CSV ingest, exact oracle, approximate pipeline, benchmark."""

from __future__ import annotations

import csv
import logging
import math
import random
import re
import statistics
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import estimator as est
from .errors import ContextTooLarge, EmptyFile, QueryValidationError, RaggedRow
from .fca import DEFAULT_ALPHA, MAX_CELLS, build_lattice, group_extents, scale
from .kb import AttributeSpec, KnowledgeBase
from .query import (ApproximateQuery, Diagnostic, FlexibleQuery, IntervalKind,
                    Resolver, validate)
from .sampler import NUMERIC, TEXT, JoinSample, Table, full_join, join_sample

log = logging.getLogger(__name__)

EXACT = "EXACT"
APPROXIMATE = "APPROXIMATE"

_INT_RE = re.compile(r"[-+]?\d+\Z")
_DEC_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?\Z")


# --- ingest ---------------------------------------------------------------

def ingest_csv(path, name: str | None = None) -> Table:
    """Read a headed CSV file; a column is numeric when every non-empty cell
    parses as a decimal number, text otherwise. Empty cells become None."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise EmptyFile(f"{path}: no header line")
        raw = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(path, reader.line_num, len(header), len(row))
            raw.append(row)

    header = [h.strip() for h in header]
    types = []
    for j in range(len(header)):
        cells = [r[j].strip() for r in raw if r[j].strip()]
        types.append(NUMERIC if all(_DEC_RE.match(c) for c in cells) else TEXT)

    convs = [_to_number if t == NUMERIC else _to_text for t in types]
    rows = [tuple(conv(cell) for conv, cell in zip(convs, r)) for r in raw]
    return Table(name or path.stem, tuple(zip(header, types)), rows)


def _to_number(cell: str):
    cell = cell.strip()
    if not cell:
        return None
    return int(cell) if _INT_RE.match(cell) else float(cell)


def _to_text(cell: str):
    return cell if cell.strip() else None


def load_tables(data_dir) -> dict[str, Table]:
    tables = {}
    for path in sorted(Path(data_dir).glob("*.csv")):
        table = ingest_csv(path)
        tables[table.name] = table
    return tables


def schema_of(tables: Mapping[str, Table]) -> dict:
    return {name: t.columns for name, t in tables.items()}


# --- synthetic fixture ----------------------------------------------------

DEATH_RATIO = 0.3
YEARS = tuple(range(2015, 2020))
CAUSES = ("cardiac", "stroke", "other")
# (share, low, high, relative death risk)
ALCOHOL_CLASSES = ((0.35, 0.0, 1.0, 2 / 3), (0.35, 3.0, 8.0, 1.0), (0.30, 14.0, 24.0, 4 / 3))
EDUCATION_CLASSES = ((0.55, 8, 11), (0.30, 13, 15), (0.15, 17, 20))

FIXTURE_KB = (
    AttributeSpec("Patient", "age", 3, ("young", "middle_aged", "old")),
    AttributeSpec("Patient", "education_years", 3, ("school", "college", "university")),
    AttributeSpec("Patient", "alcohol_units_per_week", 3,
                  ("never", "occasionally", "regularly")),
)

DEATHS_QUERY = (
    "SELECT COUNT(*) FROM Death, Patient "
    "WHERE Patient.alcohol_units_per_week IS regularly "
    "AND Patient.education_years IS school "
    "AND Death.pid = Patient.pid GROUP BY Death.year"
)


def _pick(rng, classes):
    u = rng.random()
    for cls in classes:
        u -= cls[0]
        if u < 0:
            return cls
    return classes[-1]


def fixture_tables(rows: int, seed: int = 0) -> dict[str, Table]:
    """Synthetic patient cohort; Death references Patient by pid."""
    if rows < 1:
        raise ValueError("rows must be >= 1")
    rng = random.Random(seed)
    mean_risk = sum(c[0] * c[3] for c in ALCOHOL_CLASSES)
    patients, deaths = [], []
    for pid in range(1, rows + 1):
        age = min(95, max(30, round(rng.gauss(62, 12))))
        _, lo, hi = _pick(rng, EDUCATION_CLASSES)
        education = rng.randint(lo, hi)
        _, lo, hi, risk = _pick(rng, ALCOHOL_CLASSES)
        alcohol = round(rng.uniform(lo, hi), 1)
        patients.append((pid, age, education, alcohol))
        if rng.random() < DEATH_RATIO * risk / mean_risk:
            deaths.append((len(deaths) + 1, pid, rng.choice(YEARS), rng.choice(CAUSES)))
    return {
        "Patient": Table("Patient", (("pid", NUMERIC), ("age", NUMERIC),
                                     ("education_years", NUMERIC),
                                     ("alcohol_units_per_week", NUMERIC)), patients),
        "Death": Table("Death", (("did", NUMERIC), ("pid", NUMERIC), ("year", NUMERIC),
                                 ("cause", TEXT)), deaths),
    }


def write_table(table: Table, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([c for c, _ in table.columns])
        for row in table.rows:
            writer.writerow(["" if v is None else v for v in row])


def generate_fixture(rows: int, seed: int, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in fixture_tables(rows, seed).items():
        path = out / f"{name}.csv"
        write_table(table, path)
        paths.append(path)
    return paths


# --- results --------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    group: tuple
    estimates: tuple[float, ...]
    satisfaction: float
    confidence: float
    half_widths: tuple[float, ...] | None   # None for exact rows
    n_g: int


@dataclass
class ResultTable:
    header: list[str]
    rows: list[ResultRow]
    mode: str
    elapsed_ms: float
    n: int
    N: int
    seed: int | None
    aggregates: tuple[str, ...] = ()
    lattice: object = field(default=None, repr=False, compare=False)

    def by_group(self) -> dict[tuple, ResultRow]:
        return {r.group: r for r in self.rows}

    def render(self) -> str:
        lines = [" | ".join(self.header)]
        for r in self.rows:
            cells = [_fmt_group(r.group)]
            cells += [_fmt(e) for e in r.estimates]
            cells += [_fmt(r.satisfaction), _fmt(r.confidence)]
            if r.half_widths is None:
                cells += [_fmt(e) for e in r.estimates]
            else:
                cells += [f"{_fmt(e)} ± {'n/a' if math.isinf(h) else _fmt(h)}"
                          for e, h in zip(r.estimates, r.half_widths)]
            lines.append(" | ".join(cells))
        lines.append(f"-- {self.mode.lower()}: {len(self.rows)} groups, n={self.n}, "
                     f"N={self.N}, seed={self.seed}, {self.elapsed_ms:.1f} ms")
        return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if x.is_integer() and abs(x) < 1e15:
            return str(int(x))
        return f"{x:.4f}"
    return str(x)


def _fmt_group(key: tuple) -> str:
    if not key:
        return "(all)"
    return ", ".join("NULL" if v is None else _fmt(v) for v in key)


def _sort_key(key: tuple):
    return tuple((2, "") if v is None else (0, v) if isinstance(v, (int, float)) else (1, str(v))
                 for v in key)


def _header(q: FlexibleQuery) -> list[str]:
    group = ", ".join(map(str, q.group_by)) or "group"
    aggs = [str(a) for a in q.aggregates]
    return [group, *aggs, "satisfaction", "confidence", *(f"{a} interval" for a in aggs)]


# --- execution ------------------------------------------------------------

@dataclass
class RunConfig:
    data_dir: Path | None = None
    kb_path: Path | None = None
    sample_fraction: float = 0.1
    confidence: float = 0.95
    interval_kind: IntervalKind = IntervalKind.LARGE_SAMPLE
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    mode: str = "approx"
    driving: str | None = None
    max_cells: int = MAX_CELLS

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must be in (0, 1]")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.mode not in ("exact", "approx"):
            raise ValueError("mode must be 'exact' or 'approx'")


@dataclass
class _Prepared:
    q: FlexibleQuery
    tables: dict[str, Table]
    resolver: Resolver
    edges: list
    driving: str
    agg_cols: list = field(default_factory=list)   # resolved (table, column) or None


def prepare(q: FlexibleQuery, tables: Mapping[str, Table], kb: KnowledgeBase,
            driving: str | None = None) -> _Prepared:
    diags = validate(q, kb, schema_of(tables))
    if diags:
        raise QueryValidationError(diags)
    resolver = Resolver(schema_of(tables), q.table_names)
    used = {name: tables[name] for name in resolver.tables}
    edges = [(resolver.resolve(j.left), resolver.resolve(j.right)) for j in q.joins]
    if driving is None:
        driving = resolver.tables[0]
    else:
        driving = resolver.table(driving) or driving
        if driving not in used:
            raise QueryValidationError(
                [Diagnostic("UnknownTable", f"driving table {driving!r} is not in FROM")])
    agg_cols = [resolver.resolve(a.argument) if a.argument is not None else None
                for a in q.aggregates]
    return _Prepared(q, used, resolver, edges, driving, agg_cols)


def _argument_positions(prep: _Prepared, sample: JoinSample):
    return [None if col is None else sample.layout.position(*col) for col in prep.agg_cols]


def run_exact(q: FlexibleQuery, tables: Mapping[str, Table], kb: KnowledgeBase,
              alpha: float = DEFAULT_ALPHA, driving: str | None = None) -> ResultTable:
    """Full join and scan; tuples qualify when every fuzzy degree reaches
    ``alpha`` and every crisp predicate holds, and weigh in by their degree."""
    t0 = time.perf_counter()
    q = q.base if isinstance(q, ApproximateQuery) else q
    prep = prepare(q, tables, kb, driving)
    sample = full_join(prep.tables, prep.edges, prep.driving)
    preds = est.bind_predicates(q, prep.resolver, sample.layout, kb)
    group_pos = [sample.layout.position(*prep.resolver.resolve(c)) for c in q.group_by]
    arg_pos = _argument_positions(prep, sample)

    degrees = defaultdict(list)
    values = defaultdict(lambda: [[] for _ in arg_pos])
    for row in sample.tuples:
        if not preds.crisp_ok(row):
            continue
        mem = preds.memberships(row)
        if any(mu < alpha for mu in mem):
            continue
        d = min(mem, default=1.0)
        key = tuple(row[p] for p in group_pos)
        degrees[key].append(d)
        vals = values[key]
        for k, pos in enumerate(arg_pos):
            if pos is not None and row[pos] is not None:
                vals[k].append((d, row[pos]))

    N = sample.N
    rows = []
    for key in sorted(degrees, key=_sort_key):
        ds = degrees[key]
        estimates = tuple(_point(a.kind, ds, values[key][k], N, N)
                          for k, a in enumerate(q.aggregates))
        rows.append(ResultRow(key, estimates, math.fsum(ds) / len(ds), 1.0, None, len(ds)))
    elapsed = (time.perf_counter() - t0) * 1000
    return ResultTable(_header(q), rows, EXACT, elapsed, N, N, None,
                       tuple(map(str, q.aggregates)))


def _point(kind, degrees, pairs, n, N):
    if kind == est.COUNT:
        return est.estimate_count(degrees, n, N)
    if kind == est.SUM:
        return est.estimate_sum(pairs, n, N)
    return est.estimate_avg(pairs) if pairs else math.nan


def sample_size(fraction: float, N: int) -> int:
    if N == 0:
        return 0
    return min(N, max(1, round(fraction * N)))


def run_approximate(aq: ApproximateQuery, tables: Mapping[str, Table], kb: KnowledgeBase,
                    config: RunConfig | None = None) -> ResultTable:
    config = config or RunConfig(sample_fraction=aq.sample_fraction,
                                 confidence=aq.confidence, interval_kind=aq.interval_kind)
    t0 = time.perf_counter()
    q = aq.base
    prep = prepare(q, tables, kb, config.driving)
    N = len(prep.tables[prep.driving])
    n = sample_size(aq.sample_fraction, N)
    sample = join_sample(prep.tables, prep.edges, prep.driving, n, config.seed)
    scaled = scale(sample, q, kb, config.alpha)
    try:
        lattice = build_lattice(scaled.context, config.max_cells)
    except ContextTooLarge as exc:
        raise ContextTooLarge(f"{exc} (hint: lower --fraction below {aq.sample_fraction})") \
            from None
    extents = group_extents(lattice, scaled)

    arg_pos = _argument_positions(prep, sample)
    fanout = max(_fanouts(sample.origins), default=1)
    interval = "conservative" if aq.interval_kind is IntervalKind.CONSERVATIVE else "clt"
    ranges = [None if col is None else sample.layout.bounds(*col) for col in prep.agg_cols]
    origins, tuples, degrees = sample.origins, sample.tuples, scaled.degrees

    rows = []
    for key in sorted(extents, key=_sort_key):
        objs = extents[key]
        estimates, halves = [], []
        ds = [degrees[i] for i in objs]
        for k, agg in enumerate(q.aggregates):
            pos = arg_pos[k]
            if pos is None:
                contribs = [est.Contribution(origins[i], degrees[i]) for i in objs]
            else:
                contribs = [est.Contribution(origins[i], degrees[i], tuples[i][pos])
                            for i in objs if tuples[i][pos] is not None]
            if agg.kind == est.AVG and not contribs:
                estimates.append(math.nan)
                halves.append(math.inf)
                continue
            g = est.estimate_group(key, agg.kind, contribs, n, N, aq.confidence, interval,
                                   ranges[k], fanout)
            estimates.append(g.estimate)
            halves.append(g.half_width)
        rows.append(ResultRow(key, tuple(estimates), math.fsum(ds) / len(ds),
                              aq.confidence, tuple(halves), len(objs)))
    elapsed = (time.perf_counter() - t0) * 1000
    return ResultTable(_header(q), rows, APPROXIMATE, elapsed, n, N, config.seed,
                       tuple(map(str, q.aggregates)), lattice)


def _fanouts(origins):
    counts = defaultdict(int)
    for o in origins:
        counts[o] += 1
    return counts.values()


# --- benchmark ------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    rows: int
    mode: str
    fraction: float
    median_ms: float
    max_rel_error: float
    median_rel_error: float


BENCH_FIELDS = ("rows", "mode", "fraction", "median_ms", "max_rel_error", "median_rel_error")


def relative_errors(approx: ResultTable, exact: ResultTable) -> list[float]:
    """|approx - exact| / |exact| per (group, aggregate); groups missing from
    the approximate answer count as error 1."""
    got = approx.by_group()
    errs = []
    for row in exact.rows:
        other = got.get(row.group)
        for k, truth in enumerate(row.estimates):
            if truth == 0 or math.isnan(truth):
                continue
            if other is None or math.isnan(other.estimates[k]):
                errs.append(1.0)
            else:
                errs.append(abs(other.estimates[k] - truth) / abs(truth))
    return errs


def benchmark(q: FlexibleQuery, make_tables: Callable[[int], Mapping[str, Table]],
              kb: KnowledgeBase, fractions: Sequence[float], sizes: Sequence[int],
              repetitions: int = 5, seed: int = 0, confidence: float = 0.95,
              interval_kind: IntervalKind = IntervalKind.LARGE_SAMPLE,
              alpha: float = DEFAULT_ALPHA, driving: str | None = None) -> list[BenchRow]:
    """Exact vs approximate timings per data size, run sequentially.

    A first untimed exact run warms the hash indexes and provides the
    reference answer for the error columns.
    """
    if not sizes or not fractions:
        raise ValueError("need at least one size and one fraction")
    report = []
    for size in sizes:
        tables = make_tables(size)
        reference = run_exact(q, tables, kb, alpha, driving)
        times = [run_exact(q, tables, kb, alpha, driving).elapsed_ms
                 for _ in range(repetitions)]
        report.append(BenchRow(size, "exact", 1.0, statistics.median(times), 0.0, 0.0))
        for fraction in fractions:
            aq = ApproximateQuery(q, confidence, interval_kind, fraction)
            times, worst, typical = [], [], []
            for r in range(repetitions):
                cfg = RunConfig(sample_fraction=fraction, confidence=confidence,
                                interval_kind=interval_kind, alpha=alpha, seed=seed + r,
                                driving=driving)
                res = run_approximate(aq, tables, kb, cfg)
                times.append(res.elapsed_ms)
                errs = relative_errors(res, reference) or [0.0]
                worst.append(max(errs))
                typical.append(statistics.median(errs))
            report.append(BenchRow(size, "approx", fraction, statistics.median(times),
                                   statistics.median(worst), statistics.median(typical)))
            log.info("size=%d fraction=%s median=%.1fms", size, fraction, report[-1].median_ms)
    return report


def write_report(report: Sequence[BenchRow], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_FIELDS)
        for r in report:
            writer.writerow([r.rows, r.mode, r.fraction, f"{r.median_ms:.3f}",
                             f"{r.max_rel_error:.6f}", f"{r.median_rel_error:.6f}"])


def prefix_tables(tables: Mapping[str, Table], driving: str) -> Callable[[int], dict]:
    """Size function for on-disk data: keep the first ``size`` driving rows."""
    def make(size: int) -> dict:
        out = dict(tables)
        if size > len(tables[driving]):
            log.warning("size %d exceeds %d rows of %s", size, len(tables[driving]), driving)
        out[driving] = tables[driving].head(size)
        return out
    return make
