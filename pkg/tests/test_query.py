import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from flexaq.engine import run_exact, schema_of
from flexaq.errors import InvalidConfidence, QuerySyntaxError, UnknownAggregate
from flexaq.kb import KnowledgeBase, RelaxableAttribute, TrapezoidalTerm
from flexaq.query import (Aggregate, Column, CrispPredicate, FuzzyPredicate, IntervalKind,
                          Join, parse, pretty_print, pretty_print_approximate,
                          rewrite_to_approximate, tokenize, validate)
from helpers import queries

DEATHS_EXAMPLE = ("SELECT COUNT(*) FROM Death, Patient WHERE Alcohol IS regularly "
                 "AND Education IS school AND Death.pid = Patient.pid GROUP BY Death.year")

SCHEMA = {
    "Death": (("did", "numeric"), ("pid", "numeric"), ("year", "numeric"), ("cause", "text")),
    "Patient": (("pid", "numeric"), ("Alcohol", "numeric"), ("Education", "numeric")),
}
KB = KnowledgeBase((
    RelaxableAttribute("Patient", "Alcohol", (TrapezoidalTerm("never", 0, 0, 1, 5),
                                              TrapezoidalTerm("regularly", 1, 5, 30, 30))),
    RelaxableAttribute("Patient", "Education", (TrapezoidalTerm("school", 0, 0, 10, 13),)),
))


def test_deaths_example_shape():
    q = parse(DEATHS_EXAMPLE)
    assert q.aggregates == (Aggregate("COUNT", None),)
    assert q.table_names == ("Death", "Patient")
    assert q.fuzzy_predicates == (FuzzyPredicate(Column("Alcohol"), "regularly"),
                                  FuzzyPredicate(Column("Education"), "school"))
    assert q.crisp_predicates == ()
    assert q.joins == (Join(Column("pid", "Death"), Column("pid", "Patient")),)
    assert q.group_by == (Column("year", "Death"),)


def test_minimal_query():
    q = parse("SELECT AVG(x) FROM t")
    assert q.aggregates == (Aggregate("AVG", Column("x")),)
    assert (q.fuzzy_predicates, q.crisp_predicates, q.joins, q.group_by) == ((), (), (), ())


def test_keywords_case_and_whitespace_insensitive():
    a = parse("select count(*) from T where x is 'very high' and y >= -2.5 group by z;")
    b = parse("SELECT\n  COUNT( * )\nFROM T\nWHERE x IS 'very high'\n  AND y>=-2.5\nGROUP BY z")
    assert a == b
    assert a.fuzzy_predicates[0].term == "very high"
    assert a.crisp_predicates == (CrispPredicate(Column("y"), ">=", -2.5),)


def test_unknown_aggregate():
    with pytest.raises(UnknownAggregate) as exc:
        parse("SELECT MEDIAN(x) FROM t")
    assert (exc.value.line, exc.value.col) == (1, 8)


@pytest.mark.parametrize("text, col", [
    ("SELECT FROM t", 8),
    ("SELECT COUNT(*) t", 17),
    ("SELECT COUNT(*) FROM t WHERE x", 31),
    ("SELECT COUNT(*) FROM t WHERE x IS", 34),
    ("SELECT COUNT(*) FROM t WHERE x < y", 34),
    ("SELECT COUNT(*) FROM t GROUP x", 30),
    ("SELECT COUNT(*) FROM t WHERE x = 1 OR y = 2", 36),
    ("SELECT COUNT(*) FROM t WHERE x = $", 34),
    ("SELECT COUNT(*) FROM select", 22),
])
def test_syntax_errors_report_position(text, col):
    with pytest.raises(QuerySyntaxError) as exc:
        parse(text)
    assert exc.value.col == col
    assert exc.value.pos == col - 1


def test_positions_on_later_lines():
    with pytest.raises(QuerySyntaxError) as exc:
        parse("SELECT COUNT(*)\nFROM t\nWHERE x ~ 1")
    assert (exc.value.line, exc.value.col) == (3, 9)


def test_tokenizer_string_escape():
    toks = tokenize("'it''s'")
    assert toks[0].kind == "string"
    assert parse("SELECT COUNT(*) FROM t WHERE a IS 'it''s'").fuzzy_predicates[0].term == "it's"


@settings(max_examples=300)
@given(queries())
def test_round_trip_property(q):
    assert parse(pretty_print(q)) == q


# --- validate -------------------------------------------------------------

def test_validate_clean():
    assert validate(parse(DEATHS_EXAMPLE), KB, SCHEMA) == []


def test_unknown_term():
    q = parse("SELECT COUNT(*) FROM Patient WHERE Alcohol IS rarely")
    (diag,) = validate(q, KB, SCHEMA)
    assert diag.code == "UnknownTerm"
    assert "(Alcohol, rarely)" in diag.message
    assert diag.render().startswith("ERROR UnknownTerm ")
    assert diag.render().endswith("@1:36")


def test_unknown_group_column():
    q = parse("SELECT COUNT(*) FROM Death GROUP BY Death.month")
    assert [d.code for d in validate(q, KB, SCHEMA)] == ["UnknownColumn"]


@pytest.mark.parametrize("text, codes", [
    ("SELECT COUNT(*) FROM Nope", ["UnknownTable"]),
    ("SELECT COUNT(*) FROM Death, Patient WHERE Death.pid = Patient.pid GROUP BY pid",
     ["AmbiguousColumn"]),
    ("SELECT SUM(cause) FROM Death", ["NonNumericColumn"]),
    ("SELECT COUNT(*) FROM Death WHERE year IS late", ["NotRelaxable"]),
    ("SELECT COUNT(*) FROM Death WHERE cause = 3", ["TypeMismatch"]),
    ("SELECT COUNT(*) FROM Death, Patient", ["DisconnectedJoin"]),
    ("SELECT COUNT(*) FROM Death, Patient WHERE Death.pid = Death.did", ["SelfJoin", "DisconnectedJoin"]),
    ("SELECT COUNT(*) FROM Death WHERE Patient.Alcohol IS never", ["UnknownTable"]),
    ("SELECT COUNT(*) FROM Death, Death WHERE Death.pid = Death.pid",
     ["DuplicateTable", "SelfJoin"]),
])
def test_validation_diagnostics(text, codes):
    assert [d.code for d in validate(parse(text), KB, SCHEMA)] == codes


@settings(max_examples=200, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.data())
def test_validate_is_sound(small_db, data):
    """A query that validates never fails name resolution when executed."""
    tables, kb = small_db
    schema = schema_of(tables)
    columns = [f"{t}.{c}" for t, cols in schema.items() for c, _ in cols]
    pick = data.draw
    aggs = ", ".join(pick(st.lists(st.sampled_from(
        ["COUNT(*)"] + [f"{k}({c})" for k in ("COUNT", "SUM", "AVG") for c in columns]),
        min_size=1, max_size=2)))
    froms = pick(st.lists(st.sampled_from(["Death", "Patient", "Other"]),
                          min_size=1, max_size=2, unique=True))
    preds = pick(st.lists(st.one_of(
        st.builds(lambda c, t: f"{c} IS {t}", st.sampled_from(columns),
                  st.sampled_from(["school", "regularly", "old", "late", "nope"])),
        st.builds(lambda c, v: f"{c} > {v}", st.sampled_from(columns), st.integers(0, 50)),
        st.just("Death.pid = Patient.pid")), max_size=3))
    group = pick(st.lists(st.sampled_from(columns + ["year", "pid"]), max_size=2))
    text = f"SELECT {aggs} FROM {', '.join(froms)}"
    if preds:
        text += " WHERE " + " AND ".join(preds)
    if group:
        text += " GROUP BY " + ", ".join(group)
    q = parse(text)
    if validate(q, kb, schema) == []:
        run_exact(q, tables, kb)


# --- rewrite --------------------------------------------------------------

def test_rewrite_template_shape():
    q = parse(DEATHS_EXAMPLE)
    aq = rewrite_to_approximate(q, 0.95, IntervalKind.LARGE_SAMPLE, 0.1)
    rendered = pretty_print_approximate(aq)
    assert "As Confidence" in rendered.text
    assert rendered.text.startswith("SELECT COUNT(*), Confidence(0.95) As Confidence, "
                                    "Interval_LARGE_SAMPLE(0.95) FROM Death, Patient")
    assert parse(rendered.base_text) == q


@pytest.mark.parametrize("p", [1.2, 0.0, 1.0, -0.1])
def test_invalid_confidence(p):
    with pytest.raises(InvalidConfidence):
        rewrite_to_approximate(parse("SELECT COUNT(*) FROM t"), p, IntervalKind.CONSERVATIVE, 0.5)


def test_default_confidence():
    assert rewrite_to_approximate(parse("SELECT COUNT(*) FROM t")).confidence == 0.95


@pytest.mark.parametrize("text", ["clt", "large_sample", "conservative", " CLT "])
def test_interval_kind_parse(text):
    assert IntervalKind.parse(text) in IntervalKind
