"""Tables and seeded join sampling.

Only the driving (fact) table is sampled; every other table is joined in
full through a hash index on its join key. Each sampled driving row thus
carries all of its join partners, and ``N/n`` scale-up of any per-row sum is
unbiased.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import DisconnectedJoinGraph, InvariantViolation, SampleTooLarge

NUMERIC = "numeric"
TEXT = "text"

# ((table, column), (table, column))
JoinEdge = tuple[tuple[str, str], tuple[str, str]]


@dataclass(eq=False)
class Table:
    name: str
    columns: tuple[tuple[str, str], ...]
    rows: list[tuple]
    _indexes: dict = field(default_factory=dict, init=False, repr=False)
    _positions: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.columns = tuple((c, t) for c, t in self.columns)
        names = [c.lower() for c, _ in self.columns]
        if len(set(names)) != len(names):
            raise InvariantViolation("duplicate column names", self.name)
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise InvariantViolation(f"row {i} has {len(row)} cells, expected {width}",
                                         self.name)
        self._positions = {c.lower(): i for i, (c, _) in enumerate(self.columns)}

    def __len__(self):
        return len(self.rows)

    def position(self, column: str) -> int:
        try:
            return self._positions[column.lower()]
        except KeyError:
            raise KeyError(f"{self.name}.{column}") from None

    def column_name(self, column: str) -> str:
        return self.columns[self.position(column)][0]

    def column_type(self, column: str) -> str:
        return self.columns[self.position(column)][1]

    def column_values(self, column: str) -> list:
        i = self.position(column)
        return [row[i] for row in self.rows]

    def index(self, column: str) -> dict:
        """Hash index ``value -> [row positions]``, built once and cached."""
        i = self.position(column)
        idx = self._indexes.get(i)
        if idx is None:
            idx = {}
            for r, row in enumerate(self.rows):
                key = row[i]
                if key is None:
                    continue
                bucket = idx.get(key)
                if bucket is None:
                    idx[key] = [r]
                else:
                    bucket.append(r)
            self._indexes[i] = idx
        return idx

    def bounds(self, column: str) -> tuple[float, float] | None:
        cache_key = ("bounds", self.position(column))
        if cache_key not in self._indexes:
            vals = [v for v in self.column_values(column) if v is not None]
            self._indexes[cache_key] = (min(vals), max(vals)) if vals else None
        return self._indexes[cache_key]

    def head(self, n: int) -> "Table":
        return Table(self.name, self.columns, self.rows[:n])

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return (self.name, self.columns, self.rows) == (other.name, other.columns, other.rows)


@dataclass(frozen=True)
class Layout:
    """Where each table's columns sit inside a flat joined tuple."""
    tables: tuple[str, ...]
    offsets: Mapping[str, int]
    source: Mapping[str, Table] = field(compare=False, repr=False)

    def position(self, table: str, column: str) -> int:
        return self.offsets[table] + self.source[table].position(column)

    def column_type(self, table: str, column: str) -> str:
        return self.source[table].column_type(column)

    def bounds(self, table: str, column: str):
        return self.source[table].bounds(column)


@dataclass(frozen=True)
class JoinSample:
    tuples: list[tuple]
    origins: list[int]     # sample slot (0..n-1) of the driving row behind each tuple
    n: int
    N: int
    seed: int | None
    driving: str
    layout: Layout

    def __post_init__(self):
        if not 0 <= self.n <= self.N:
            raise InvariantViolation(f"n={self.n} outside [0, N={self.N}]", self.driving)


def uniform_sample(table: Table | Sequence, n: int, seed: int) -> list:
    """Simple random sample without replacement (partial Fisher-Yates)."""
    rows = table.rows if isinstance(table, Table) else table
    N = len(rows)
    if n < 0:
        raise ValueError("negative sample size")
    if n > N:
        raise SampleTooLarge(f"sample of {n} from {N} rows")
    rng = random.Random(seed)
    perm = list(range(N))
    for i in range(n):
        j = rng.randrange(i, N)
        perm[i], perm[j] = perm[j], perm[i]
    return [rows[perm[i]] for i in range(n)]


def join_plan(tables: Mapping[str, Table], joins: Sequence[JoinEdge], driving: str):
    """Order tables by BFS from the driving table over the join graph.

    Returns ``(order, steps, filters)``: each step ``(new_table, new_col,
    known_table, known_col)`` probes ``new_table``'s index; filters are edges
    closing a cycle, checked after all tables are joined.
    """
    names = {t.lower(): t for t in tables}
    canon = lambda t: names.get(t.lower(), t)  # noqa: E731
    driving = canon(driving)
    if driving not in tables:
        raise KeyError(driving)
    edges = [((canon(a), ca), (canon(b), cb)) for (a, ca), (b, cb) in joins]
    order = [driving]
    steps, used = [], set()
    progress = True
    while progress:
        progress = False
        for k, ((a, ca), (b, cb)) in enumerate(edges):
            if k in used:
                continue
            if (a in order) != (b in order):
                if a in order:
                    steps.append((b, cb, a, ca))
                    order.append(b)
                else:
                    steps.append((a, ca, b, cb))
                    order.append(a)
                used.add(k)
                progress = True
    missing = [t for t in tables if t not in order]
    if missing:
        raise DisconnectedJoinGraph(
            f"tables {missing} are not connected to {driving!r} by the join predicates")
    filters = [edges[k] for k in range(len(edges)) if k not in used]
    return order, steps, filters


def _join_rows(driving_rows, tables, joins, driving):
    order, steps, filters = join_plan(tables, joins, driving)
    offsets, width = {}, 0
    for name in order:
        offsets[name] = width
        width += len(tables[name].columns)
    layout = Layout(tuple(order), offsets, dict(tables))

    partial = [(row, slot) for slot, row in enumerate(driving_rows)]
    for new_t, new_c, known_t, known_c in steps:
        table = tables[new_t]
        idx = table.index(new_c)
        rows = table.rows
        pos = layout.position(known_t, known_c)
        nxt = []
        append = nxt.append
        for row, slot in partial:
            hits = idx.get(row[pos])
            if hits:
                for r in hits:
                    append((row + rows[r], slot))
        partial = nxt

    if filters:
        checks = [(layout.position(a, ca), layout.position(b, cb))
                  for (a, ca), (b, cb) in filters]
        partial = [(row, slot) for row, slot in partial
                   if all(row[i] is not None and row[i] == row[j] for i, j in checks)]
    return [row for row, _ in partial], [slot for _, slot in partial], layout


def _driving_key(tables: Mapping[str, Table], driving: str) -> str:
    for key in tables:
        if key.lower() == driving.lower():
            return key
    raise KeyError(driving)


def join_sample(tables: Mapping[str, Table], joins: Sequence[JoinEdge], driving: str,
                n: int, seed: int) -> JoinSample:
    """Sample ``n`` driving rows, then equi-join them against full tables."""
    tables = dict(tables)
    key = _driving_key(tables, driving)
    join_plan(tables, joins, key)  # fail on a disconnected graph before sampling
    base = tables[key]
    sampled = uniform_sample(base, n, seed)
    tuples, origins, layout = _join_rows(sampled, tables, joins, key)
    return JoinSample(tuples, origins, n, len(base), seed, key, layout)


def full_join(tables: Mapping[str, Table], joins: Sequence[JoinEdge],
              driving: str) -> JoinSample:
    """The complete join, packaged as an exhaustive sample (n = N)."""
    tables = dict(tables)
    key = _driving_key(tables, driving)
    base = tables[key]
    tuples, origins, layout = _join_rows(base.rows, tables, joins, key)
    return JoinSample(tuples, origins, len(base), len(base), None, key, layout)
