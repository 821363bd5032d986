"""Flexible SQL dialect: lexer, recursive-descent parser, validator, rewrite.

Grammar::

    query     := SELECT agg {',' agg} FROM ident {',' ident}
                 [WHERE pred {AND pred}] [GROUP BY col {',' col}] [';']
    agg       := (COUNT | SUM | AVG) '(' (col | '*') ')'
    pred      := col IS term | col op literal | col '=' col
    col       := ident ['.' ident]
    term      := ident | 'quoted'
    op        := '=' | '<>' | '!=' | '<' | '<=' | '>' | '>='

Keywords are case-insensitive; identifiers keep their spelling.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import InvalidConfidence, QuerySyntaxError, UnknownAggregate

AGGREGATES = ("COUNT", "SUM", "AVG")
KEYWORDS = frozenset({"SELECT", "FROM", "WHERE", "GROUP", "BY", "AND", "IS", "AS"})
COMPARATORS = ("=", "<>", "!=", "<=", ">=", "<", ">")
DEFAULT_CONFIDENCE = 0.95

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:[^']|'')*')
  | (?P<op><>|!=|<=|>=|=|<|>)
  | (?P<punct>[(),.*;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int
    line: int
    col: int

    @property
    def upper(self):
        return self.text.upper()


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}",
                                   pos, line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = pos + chunk.rindex("\n") + 1
        else:
            tokens.append(Token(kind, m.group(), pos, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", pos, line, pos - line_start + 1))
    return tokens


# --- AST -----------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    name: str
    table: str | None = None
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Aggregate:
    kind: str
    argument: Column | None = None  # None means '*'

    def __str__(self):
        return f"{self.kind}({self.argument if self.argument else '*'})"


@dataclass(frozen=True)
class FuzzyPredicate:
    column: Column
    term: str

    def __str__(self):
        return f"{self.column} IS {_render_term(self.term)}"


@dataclass(frozen=True)
class CrispPredicate:
    column: Column
    op: str
    literal: float | int | str

    def __str__(self):
        return f"{self.column} {self.op} {_render_literal(self.literal)}"


@dataclass(frozen=True)
class Join:
    left: Column
    right: Column

    def __str__(self):
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class TableRef:
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class FlexibleQuery:
    aggregates: tuple[Aggregate, ...]
    tables: tuple[TableRef, ...]
    fuzzy_predicates: tuple[FuzzyPredicate, ...] = ()
    crisp_predicates: tuple[CrispPredicate, ...] = ()
    joins: tuple[Join, ...] = ()
    group_by: tuple[Column, ...] = ()

    @property
    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def __str__(self):
        return pretty_print(self)


class IntervalKind(enum.Enum):
    CONSERVATIVE = "conservative"
    LARGE_SAMPLE = "clt"

    @classmethod
    def parse(cls, text: str) -> "IntervalKind":
        text = text.strip().lower()
        for kind in cls:
            if text in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(f"unknown interval kind {text!r}")


@dataclass(frozen=True)
class ApproximateQuery:
    base: FlexibleQuery
    confidence: float = DEFAULT_CONFIDENCE
    interval_kind: IntervalKind = IntervalKind.LARGE_SAMPLE
    sample_fraction: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise InvalidConfidence(f"confidence must be in (0, 1), got {self.confidence}")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValueError(f"sample fraction must be in (0, 1], got {self.sample_fraction}")


@dataclass(frozen=True)
class RenderedQuery:
    text: str
    base_text: str

    def __str__(self):
        return self.text


# --- parser --------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message, tok=None, cls=QuerySyntaxError):
        tok = tok or self.tok
        found = tok.text or "end of input"
        return cls(f"{message}, found {found!r}", tok.pos, tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def at_keyword(self, *words) -> bool:
        return self.tok.kind == "ident" and self.tok.upper in words

    def keyword(self, word):
        if not self.at_keyword(word):
            raise self.error(f"expected {word}")
        return self.advance()

    def punct(self, ch):
        if self.tok.kind == "punct" and self.tok.text == ch:
            return self.advance()
        raise self.error(f"expected {ch!r}")

    def at_punct(self, ch) -> bool:
        return self.tok.kind == "punct" and self.tok.text == ch

    def ident(self, what="identifier") -> Token:
        if self.tok.kind != "ident" or self.tok.upper in KEYWORDS:
            raise self.error(f"expected {what}")
        return self.advance()

    def parse(self) -> FlexibleQuery:
        self.keyword("SELECT")
        aggregates = [self.aggregate()]
        while self.at_punct(","):
            self.advance()
            aggregates.append(self.aggregate())

        self.keyword("FROM")
        tables = [self.table()]
        while self.at_punct(","):
            self.advance()
            tables.append(self.table())

        fuzzy, crisp, joins = [], [], []
        if self.at_keyword("WHERE"):
            self.advance()
            self.predicate(fuzzy, crisp, joins)
            while self.at_keyword("AND"):
                self.advance()
                self.predicate(fuzzy, crisp, joins)

        group_by = []
        if self.at_keyword("GROUP"):
            self.advance()
            self.keyword("BY")
            group_by.append(self.column())
            while self.at_punct(","):
                self.advance()
                group_by.append(self.column())

        if self.at_punct(";"):
            self.advance()
        if self.tok.kind != "eof":
            raise self.error("expected end of query")
        return FlexibleQuery(tuple(aggregates), tuple(tables), tuple(fuzzy),
                             tuple(crisp), tuple(joins), tuple(group_by))

    def aggregate(self) -> Aggregate:
        tok = self.tok
        if tok.kind != "ident" or tok.upper in KEYWORDS:
            raise self.error("expected aggregate function")
        self.advance()
        if not self.at_punct("("):
            raise self.error("expected '(' after aggregate name")
        if tok.upper not in AGGREGATES:
            raise UnknownAggregate(f"unknown aggregate {tok.text!r}",
                                   tok.pos, tok.line, tok.col)
        self.advance()
        if self.at_punct("*"):
            self.advance()
            arg = None
        else:
            arg = self.column()
        self.punct(")")
        return Aggregate(tok.upper, arg)

    def table(self) -> TableRef:
        tok = self.ident("table name")
        return TableRef(tok.text, (tok.line, tok.col))

    def column(self) -> Column:
        first = self.ident("column")
        if self.at_punct("."):
            self.advance()
            second = self.ident("column")
            return Column(second.text, first.text, (first.line, first.col))
        return Column(first.text, None, (first.line, first.col))

    def predicate(self, fuzzy, crisp, joins):
        col = self.column()
        if self.at_keyword("IS"):
            self.advance()
            if self.tok.kind == "string":
                term = _unquote(self.advance().text)
            else:
                term = self.ident("linguistic term").text
            fuzzy.append(FuzzyPredicate(col, term))
            return
        if self.tok.kind != "op":
            raise self.error("expected IS or comparison operator")
        op = self.advance().text
        if self.tok.kind == "number":
            crisp.append(CrispPredicate(col, op, _number(self.advance().text)))
        elif self.tok.kind == "string":
            crisp.append(CrispPredicate(col, op, _unquote(self.advance().text)))
        elif self.tok.kind == "ident" and op == "=":
            joins.append(Join(col, self.column()))
        else:
            raise self.error("expected literal" + (" or column" if op == "=" else ""))


def parse(text: str) -> FlexibleQuery:
    return _Parser(text).parse()


def _number(text: str):
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return float(text)


def _unquote(text: str) -> str:
    return text[1:-1].replace("''", "'")


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _render_term(term: str) -> str:
    if _IDENT_RE.match(term) and term.upper() not in KEYWORDS:
        return term
    return "'" + term.replace("'", "''") + "'"


def _render_literal(value) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return repr(value)


# --- printing / rewrite --------------------------------------------------

def pretty_print(q: FlexibleQuery) -> str:
    parts = ["SELECT " + ", ".join(map(str, q.aggregates)),
             "FROM " + ", ".join(map(str, q.tables))]
    preds = [*map(str, q.fuzzy_predicates), *map(str, q.crisp_predicates),
             *map(str, q.joins)]
    if preds:
        parts.append("WHERE " + " AND ".join(preds))
    if q.group_by:
        parts.append("GROUP BY " + ", ".join(map(str, q.group_by)))
    return " ".join(parts)


def rewrite_to_approximate(q: FlexibleQuery, confidence: float = DEFAULT_CONFIDENCE,
                           interval_kind: IntervalKind = IntervalKind.LARGE_SAMPLE,
                           sample_fraction: float = 0.1) -> ApproximateQuery:
    return ApproximateQuery(q, confidence, interval_kind, sample_fraction)


def pretty_print_approximate(aq: ApproximateQuery) -> RenderedQuery:
    """Render in the approximate-query template shape.

    Each aggregate is followed by its confidence column and interval column;
    ``base_text`` is the plain query, which parses back to ``aq.base``.
    """
    q = aq.base
    items = []
    for agg in q.aggregates:
        items.append(str(agg))
        items.append(f"Confidence({aq.confidence!r}) As Confidence")
        items.append(f"Interval_{aq.interval_kind.name}({aq.confidence!r})")
    text = pretty_print(q).replace(
        "SELECT " + ", ".join(map(str, q.aggregates)),
        "SELECT " + ", ".join(items), 1)
    text += f" SAMPLE {aq.sample_fraction!r};"
    return RenderedQuery(text, pretty_print(q))


# --- validation ----------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 1
    col: int = 1
    level: str = "ERROR"

    def render(self) -> str:
        return f"{self.level} {self.code} {self.message} @{self.line}:{self.col}"

    def __str__(self):
        return self.render()


def _loc(node):
    return node.pos if getattr(node, "pos", None) else (1, 1)


class Resolver:
    """Maps query column references onto (table, column) pairs of a schema.

    ``schema`` maps table names to sequences of ``(column, type)`` pairs.
    Lookups are case-insensitive; results carry the schema's spelling.
    """

    def __init__(self, schema: Mapping[str, Sequence[tuple[str, str]]],
                 tables: Sequence[str]):
        self._schema = {name.lower(): (name, {c.lower(): (c, t) for c, t in cols})
                        for name, cols in schema.items()}
        self.tables = []
        self.missing = []
        for t in tables:
            entry = self._schema.get(t.lower())
            (self.tables if entry else self.missing).append(entry[0] if entry else t)

    def table(self, name: str) -> str | None:
        entry = self._schema.get(name.lower())
        if entry and entry[0] in self.tables:
            return entry[0]
        return None

    def candidates(self, col: Column) -> list[tuple[str, str, str]]:
        if col.table is not None:
            table = self.table(col.table)
            if table is None:
                return []
            hit = self._schema[table.lower()][1].get(col.name.lower())
            return [(table, hit[0], hit[1])] if hit else []
        out = []
        for table in self.tables:
            hit = self._schema[table.lower()][1].get(col.name.lower())
            if hit:
                out.append((table, hit[0], hit[1]))
        return out

    def resolve(self, col: Column) -> tuple[str, str]:
        found = self.candidates(col)
        if len(found) != 1:
            raise KeyError(str(col))
        return found[0][0], found[0][1]

    def type_of(self, col: Column) -> str:
        return self.candidates(col)[0][2]


def validate(q: FlexibleQuery, kb, schema: Mapping[str, Sequence[tuple[str, str]]]
             ) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    resolver = Resolver(schema, q.table_names)

    def err(code, message, node):
        line, col = _loc(node)
        diags.append(Diagnostic(code, message, line, col))

    seen = set()
    for ref in q.tables:
        if ref.name.lower() in seen:
            err("DuplicateTable", f"table {ref.name!r} listed twice", ref)
        seen.add(ref.name.lower())
        if resolver.table(ref.name) is None:
            err("UnknownTable", f"unknown table {ref.name!r}", ref)

    def check(col: Column, numeric=False) -> bool:
        found = resolver.candidates(col)
        if col.table is not None and resolver.table(col.table) is None:
            err("UnknownTable", f"table {col.table!r} is not in FROM", col)
            return False
        if not found:
            err("UnknownColumn", f"unknown column {str(col)!r}", col)
            return False
        if len(found) > 1:
            err("AmbiguousColumn", f"column {str(col)!r} is in "
                + ", ".join(t for t, _, _ in found), col)
            return False
        if numeric and found[0][2] != "numeric":
            err("NonNumericColumn", f"column {str(col)!r} is not numeric", col)
            return False
        return True

    for agg in q.aggregates:
        if agg.argument is not None:
            check(agg.argument, numeric=agg.kind in ("SUM", "AVG"))

    for pred in q.fuzzy_predicates:
        if not check(pred.column, numeric=True):
            continue
        table, column = resolver.resolve(pred.column)
        attr = kb.get(table, column) if kb is not None else None
        if attr is None:
            err("NotRelaxable", f"{table}.{column} has no linguistic terms", pred.column)
        elif attr.term(pred.term) is None:
            err("UnknownTerm", f"({pred.column}, {pred.term}): no such term; known: "
                + ", ".join(t.name for t in attr.terms), pred.column)

    for pred in q.crisp_predicates:
        if not check(pred.column):
            continue
        numeric_col = resolver.type_of(pred.column) == "numeric"
        numeric_lit = not isinstance(pred.literal, str)
        if numeric_col != numeric_lit:
            err("TypeMismatch", f"{pred} compares {'numeric' if numeric_col else 'text'} "
                "column with " + ("number" if numeric_lit else "string"), pred.column)

    edges = []
    for join in q.joins:
        ok_l, ok_r = check(join.left), check(join.right)
        if ok_l and ok_r:
            lt, _ = resolver.resolve(join.left)
            rt, _ = resolver.resolve(join.right)
            if lt == rt:
                err("SelfJoin", f"{join} joins a table with itself", join.left)
            else:
                edges.append((lt, rt))

    for col in q.group_by:
        check(col)

    if len(resolver.tables) > 1 and not resolver.missing:
        reached = {resolver.tables[0]}
        changed = True
        while changed:
            changed = False
            for a, b in edges:
                if (a in reached) != (b in reached):
                    reached |= {a, b}
                    changed = True
        for ref in q.tables:
            t = resolver.table(ref.name)
            if t not in reached:
                err("DisconnectedJoin", f"table {t!r} is not joined to "
                    f"{resolver.tables[0]!r}", ref)
    return diags
