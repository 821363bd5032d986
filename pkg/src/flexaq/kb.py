"""Fuzzy knowledge base: trapezoidal linguistic terms on relaxable columns.

Terms are derived from the data by a seeded 1-D k-means; each cluster becomes
a trapezoid whose plateau is ``mean +/- stddev`` clipped to the cluster and
whose ramps reach the neighbouring plateaus; the outermost plateaus stretch
to the observed extremes. Every observed value therefore has positive
membership in at least one term.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InsufficientDistinctValues, InvariantViolation, ParseError

MAX_ITER = 50
RESTARTS = 3

_DEFAULT_NAMES = {
    1: ("all",),
    2: ("low", "high"),
    3: ("low", "medium", "high"),
    4: ("very_low", "low", "high", "very_high"),
    5: ("very_low", "low", "medium", "high", "very_high"),
}


@dataclass(frozen=True)
class TrapezoidalTerm:
    name: str
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise InvariantViolation(
                f"term {self.name!r} breaks a <= b <= c <= d: "
                f"({self.a}, {self.b}, {self.c}, {self.d})"
            )

    def __call__(self, x):
        return membership(self, x)


def membership(term: TrapezoidalTerm, x: float) -> float:
    """Degree of ``x`` in ``term``; exact at the four breakpoints."""
    a, b, c, d = term.a, term.b, term.c, term.d
    if b <= x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


@dataclass(frozen=True)
class RelaxableAttribute:
    table: str
    column: str
    terms: tuple[TrapezoidalTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        names = [t.name for t in self.terms]
        if len(set(names)) != len(names):
            raise InvariantViolation("duplicate term names", self.qualified)
        if any(t1.b > t2.b for t1, t2 in zip(self.terms, self.terms[1:])):
            raise InvariantViolation("terms not sorted by plateau start", self.qualified)

    @property
    def qualified(self) -> str:
        return f"{self.table}.{self.column}"

    def term(self, name: str) -> TrapezoidalTerm | None:
        for t in self.terms:
            if t.name == name:
                return t
        return None

    def covers(self, values: Iterable[float]) -> bool:
        return all(any(membership(t, v) > 0 for t in self.terms) for v in values)


@dataclass(frozen=True)
class KnowledgeBase:
    attributes: tuple[RelaxableAttribute, ...] = ()
    fingerprint: str = ""
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        attrs = tuple(sorted(self.attributes, key=lambda a: (a.table, a.column)))
        object.__setattr__(self, "attributes", attrs)
        lookup = {}
        for attr in attrs:
            key = (attr.table.lower(), attr.column.lower())
            if key in lookup:
                raise InvariantViolation("declared twice", attr.qualified)
            lookup[key] = attr
        object.__setattr__(self, "_lookup", lookup)

    def get(self, table: str, column: str) -> RelaxableAttribute | None:
        return self._lookup.get((table.lower(), column.lower()))

    def __len__(self):
        return len(self.attributes)


def default_term_names(k: int) -> tuple[str, ...]:
    return _DEFAULT_NAMES.get(k) or tuple(f"t{i + 1}" for i in range(k))


def kmeans_1d(values: Sequence[float], k: int, seed: int = 0,
              max_iter: int = MAX_ITER, restarts: int = RESTARTS) -> list[list[float]]:
    """Lloyd's k-means on 1-D data, best of several starts by within-cluster SSE.

    Starts are the data quantiles, the distinct-value quantiles and
    ``restarts`` seeded random picks. On sorted data with sorted centroids
    every cluster is a contiguous run cut at the midpoints between
    centroids, so an iteration is k bisections plus prefix-sum means.
    Returns ``k`` non-empty clusters in ascending order.
    """
    data = sorted(values)
    distinct = sorted(set(data))
    if k < 1:
        raise ValueError("k must be positive")
    if len(distinct) < k:
        raise InsufficientDistinctValues(
            f"{len(distinct)} distinct values, need at least {k}")
    rng = random.Random(seed)
    prefix = [0.0, *itertools.accumulate(data)]
    prefix_sq = [0.0, *itertools.accumulate(v * v for v in data)]

    def cuts_for(cents):
        inner = [bisect.bisect_right(data, (c1 + c2) / 2) for c1, c2 in zip(cents, cents[1:])]
        return [0, *inner, len(data)]

    def lloyd(centroids):
        centroids = sorted(centroids)
        cuts = None
        for _ in range(max_iter):
            new_cuts = cuts_for(centroids)
            if new_cuts == cuts:
                break
            cuts = new_cuts
            for i in range(k):
                lo, hi = cuts[i], cuts[i + 1]
                if hi > lo:
                    centroids[i] = (prefix[hi] - prefix[lo]) / (hi - lo)
                else:
                    taken = set(centroids)
                    centroids[i] = rng.choice([v for v in distinct if v not in taken])
            centroids.sort()
        return cuts_for(centroids)

    def sse(cuts):
        total = 0.0
        for lo, hi in zip(cuts, cuts[1:]):
            if hi > lo:
                s1 = prefix[hi] - prefix[lo]
                total += (prefix_sq[hi] - prefix_sq[lo]) - s1 * s1 / (hi - lo)
        return total

    starts = [[data[int((i + 0.5) * len(data) / k)] for i in range(k)],
              [distinct[int((i + 0.5) * len(distinct) / k)] for i in range(k)]]
    starts += [rng.sample(distinct, k) for _ in range(restarts)]
    best = None
    for start in starts:
        if len(set(start)) < k:
            continue
        cuts = lloyd(start)
        if all(hi > lo for lo, hi in zip(cuts, cuts[1:])):
            score = sse(cuts)
            if best is None or score < best[0] - 1e-12 * abs(best[0]):
                best = (score, cuts)

    if best is None:
        # every start collapsed; split the data evenly over the distinct values
        return _split_to_k([data], k)
    cuts = best[1]
    return [data[cuts[i]:cuts[i + 1]] for i in range(k)]


def _split_to_k(clusters, k):
    clusters = [list(cl) for cl in clusters]
    while len(clusters) < k:
        i = max(range(len(clusters)), key=lambda j: len(set(clusters[j])))
        cl = clusters[i]
        cut = sorted(set(cl))[len(set(cl)) // 2]
        clusters[i:i + 1] = [[v for v in cl if v < cut], [v for v in cl if v >= cut]]
    return clusters


def terms_from_clusters(clusters: Sequence[Sequence[float]],
                        names: Sequence[str]) -> list[TrapezoidalTerm]:
    lo = min(clusters[0])
    hi = max(clusters[-1])
    span = hi - lo
    plateaus = []
    for cl in clusters:
        mean = math.fsum(cl) / len(cl)
        sd = statistics.pstdev(cl)
        b = max(mean - sd, min(cl))
        c = min(mean + sd, max(cl))
        plateaus.append((b, c, sd == 0))

    # outermost terms are shoulders: a ramp ending exactly at the observed
    # extreme would give that value membership 0
    plateaus[0] = (lo, *plateaus[0][1:])
    plateaus[-1] = (plateaus[-1][0], hi, plateaus[-1][2])

    terms = []
    for i, (b, c, degenerate) in enumerate(plateaus):
        if degenerate:
            width = max(math.ulp(b), 0.01 * span)
            a, d = b - width, c + width
        else:
            a = plateaus[i - 1][1] if i > 0 else lo
            d = plateaus[i + 1][0] if i + 1 < len(plateaus) else hi
        terms.append(TrapezoidalTerm(names[i], float(a), float(b), float(c), float(d)))
    return terms


def build_partition(values: Iterable[float], k: int, seed: int = 0,
                    names: Sequence[str] | None = None) -> list[TrapezoidalTerm]:
    values = list(values)
    if not values:
        raise InsufficientDistinctValues("no values")
    names = tuple(names) if names else default_term_names(k)
    if len(names) != k:
        raise ValueError(f"{len(names)} names given for {k} terms")
    return terms_from_clusters(kmeans_1d(values, k, seed), names)


def fingerprint(tables) -> str:
    h = hashlib.sha256()
    for t in sorted(tables, key=lambda t: t.name):
        h.update(t.name.encode())
        h.update(repr(t.columns).encode())
        for row in t.rows:
            h.update(repr(row).encode())
    return h.hexdigest()[:16]


@dataclass
class AttributeSpec:
    table: str
    column: str
    k: int = 3
    names: tuple[str, ...] | None = None

    @classmethod
    def parse(cls, text: str, default_k: int = 3) -> "AttributeSpec":
        """``Table.column``, ``Table.column:K`` or ``Table.column=n1,n2,...``."""
        names = None
        k = default_k
        if "=" in text:
            text, raw = text.split("=", 1)
            names = tuple(n.strip() for n in raw.split(",") if n.strip())
            k = len(names)
        elif ":" in text:
            text, raw = text.split(":", 1)
            k = int(raw)
        table, _, column = text.partition(".")
        if not column:
            raise ValueError(f"expected Table.column, got {text!r}")
        return cls(table, column, k, names)


def build_kb(tables, specs: Sequence[AttributeSpec], seed: int = 0) -> KnowledgeBase:
    by_name = {t.name.lower(): t for t in tables}
    attrs = []
    for spec in specs:
        table = by_name.get(spec.table.lower())
        if table is None:
            raise InvariantViolation("unknown table", f"{spec.table}.{spec.column}")
        values = [v for v in table.column_values(spec.column) if v is not None]
        terms = build_partition(values, spec.k, seed, spec.names)
        attrs.append(RelaxableAttribute(table.name, table.column_name(spec.column), terms))
    return KnowledgeBase(tuple(attrs), fingerprint(tables))


def dumps(kb: KnowledgeBase) -> str:
    lines = ["kb v1"]
    if kb.fingerprint:
        lines.append(f"source {kb.fingerprint}")
    for attr in kb.attributes:
        lines.append("")
        lines.append(f"attr {attr.qualified}")
        for t in attr.terms:
            lines.append(f"term {t.name} {t.a!r} {t.b!r} {t.c!r} {t.d!r}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> KnowledgeBase:
    attrs: list[RelaxableAttribute] = []
    source = ""
    current = None  # (table, column, [terms], line)
    seen_header = False

    def flush():
        if current is not None:
            table, column, terms, _ = current
            try:
                attrs.append(RelaxableAttribute(table, column, tuple(terms)))
            except InvariantViolation as exc:
                raise InvariantViolation(str(exc).split(": ", 1)[-1],
                                         f"{table}.{column}") from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if not seen_header:
            if parts != ["kb", "v1"]:
                raise ParseError("expected header 'kb v1'", lineno)
            seen_header = True
            continue
        head = parts[0]
        if head == "source" and len(parts) == 2:
            source = parts[1]
        elif head == "attr" and len(parts) == 2:
            flush()
            table, dot, column = parts[1].partition(".")
            if not dot or not table or not column:
                raise ParseError(f"expected attr <table>.<column>, got {parts[1]!r}", lineno)
            current = (table, column, [], lineno)
        elif head == "term" and len(parts) == 6:
            if current is None:
                raise ParseError("term outside of an attr block", lineno)
            try:
                a, b, c, d = (float(p) for p in parts[2:])
            except ValueError:
                raise ParseError(f"bad number in {line!r}", lineno) from None
            try:
                current[2].append(TrapezoidalTerm(parts[1], a, b, c, d))
            except InvariantViolation as exc:
                raise InvariantViolation(str(exc), f"{current[0]}.{current[1]}") from None
        else:
            raise ParseError(f"unrecognised line {line!r}", lineno)
    flush()
    return KnowledgeBase(tuple(attrs), source)


def load_kb(path) -> KnowledgeBase:
    return loads(Path(path).read_text(encoding="utf-8"))


def save_kb(kb: KnowledgeBase, path) -> None:
    Path(path).write_text(dumps(kb), encoding="utf-8")
