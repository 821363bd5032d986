import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexaq.errors import InsufficientDistinctValues, InvariantViolation, ParseError
from flexaq.kb import (AttributeSpec, KnowledgeBase, RelaxableAttribute, TrapezoidalTerm,
                       build_kb, build_partition, dumps, kmeans_1d, load_kb, loads,
                       membership, save_kb)
from flexaq.sampler import Table

T = TrapezoidalTerm("t", 0, 10, 20, 30)


@pytest.mark.parametrize("x, expected", [
    (15, 1.0), (5, 0.5), (35, 0.0),
    (0, 0.0), (10, 1.0), (20, 1.0), (30, 0.0), (25, 0.5), (-1, 0.0), (2.5, 0.25),
])
def test_membership_examples(x, expected):
    assert membership(T, x) == expected


def test_term_ordering_enforced():
    with pytest.raises(InvariantViolation):
        TrapezoidalTerm("bad", 5, 4, 6, 7)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def terms(draw):
    pts = sorted(draw(st.lists(finite, min_size=4, max_size=4)))
    return TrapezoidalTerm("t", *pts)


@given(terms(), finite)
def test_membership_in_unit_interval(term, x):
    assert 0.0 <= membership(term, x) <= 1.0


@given(terms())
def test_membership_breakpoints(term):
    assert membership(term, term.b) == 1.0
    assert membership(term, term.c) == 1.0
    if term.a < term.b:
        assert membership(term, term.a) == 0.0
    if term.c < term.d:
        assert membership(term, term.d) == 0.0


# --- build_partition ------------------------------------------------------

def _optimal_two_split(values):
    """Exhaustive 1-D 2-means: try every cut of the sorted data."""
    data = sorted(values)
    best = None
    for cut in range(1, len(data)):
        parts = data[:cut], data[cut:]
        sse = sum(sum((v - sum(p) / len(p)) ** 2 for v in p) for p in parts)
        if best is None or sse < best[0]:
            best = (sse, parts)
    return best[1]


def test_partition_separates_two_clusters():
    values = [1, 2, 3, 100, 101, 102]
    low, high = _optimal_two_split(values)
    assert kmeans_1d(values, 2, seed=7) == [low, high]

    # trapezoid rule by hand: plateau mean +/- pstdev, shoulders at the extremes
    sd = math.sqrt(2 / 3)
    t1, t2 = build_partition(values, 2, seed=7)
    assert (t1.a, t1.b) == (1.0, 1.0)
    assert t1.c == pytest.approx(2 + sd, abs=1e-12)
    assert t1.d == pytest.approx(101 - sd, abs=1e-12)
    assert t2.a == pytest.approx(2 + sd, abs=1e-12)
    assert t2.b == pytest.approx(101 - sd, abs=1e-12)
    assert (t2.c, t2.d) == (102.0, 102.0)
    assert t1.c < 50 < t2.b
    assert [membership(t1, v) == 1 for v in values] == [True, True, False, False, False, False]
    assert [membership(t2, v) == 1 for v in values] == [False, False, False, False, True, True]
    assert all(membership(t1, v) > membership(t2, v) for v in low)
    assert all(membership(t2, v) > membership(t1, v) for v in high)


def test_partition_single_cluster():
    (term,) = build_partition([5, 5, 5], 1, seed=0)
    assert term.b <= 5 <= term.c
    assert membership(term, 5) == 1.0
    assert term.a < 5 < term.d


def test_partition_uniform_three_terms():
    values = list(range(1, 1001))
    terms = build_partition(values, 3, seed=1)
    assert len(terms) == 3
    assert [t.b for t in terms] == sorted(t.b for t in terms)
    for left, right in zip(terms, terms[1:]):
        assert right.a < left.d  # supports overlap
    assert RelaxableAttribute("t", "x", tuple(terms)).covers(values)


def test_partition_needs_enough_distinct_values():
    with pytest.raises(InsufficientDistinctValues):
        build_partition([1, 1, 2], 3)


def test_degenerate_cluster_ramp_width():
    terms = build_partition([0, 0, 0, 10, 11, 12, 13], 2, seed=0)
    assert terms[0].b == terms[0].c == 0
    assert terms[0].d == pytest.approx(0.01 * 13)


values_st = st.lists(st.integers(-500, 500), min_size=1, max_size=60)


@settings(max_examples=150)
@given(values_st, st.integers(1, 5), st.integers(0, 100), st.randoms(use_true_random=False))
def test_partition_properties(values, k, seed, rnd):
    if len(set(values)) < k:
        with pytest.raises(InsufficientDistinctValues):
            build_partition(values, k, seed)
        return
    terms = build_partition(values, k, seed)
    attr = RelaxableAttribute("t", "c", tuple(terms))  # sortedness + unique names
    assert len(terms) == k
    assert attr.covers(values)
    assert build_partition(values, k, seed) == terms
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert build_partition(shuffled, k, seed) == terms


# --- persistence ----------------------------------------------------------

def _kb():
    return KnowledgeBase((
        RelaxableAttribute("Patient", "age", (TrapezoidalTerm("young", 0, 0, 30, 45),
                                              TrapezoidalTerm("old", 30, 45, 90, 90))),
        RelaxableAttribute("Patient", "alcohol", (TrapezoidalTerm("rarely", 0, 0, 1, 3),
                                                  TrapezoidalTerm("regularly", 1, 3, 0.1 + 20,
                                                                  1 / 3 + 30))),
    ), "abc123")


def test_round_trip(tmp_path):
    kb = _kb()
    path = tmp_path / "kb.txt"
    save_kb(kb, path)
    assert load_kb(path) == kb


def test_empty_file_is_empty_kb():
    assert loads("") == KnowledgeBase()
    assert len(loads("# nothing\n\n")) == 0


def test_comments_and_blank_lines():
    text = "kb v1  # header\n\nattr t.c   # comment\nterm a 0 1 2 3\n\n"
    kb = loads(text)
    assert kb.get("T", "C").term("a") == TrapezoidalTerm("a", 0, 1, 2, 3)


def test_b_below_a_is_invariant_violation():
    with pytest.raises(InvariantViolation) as exc:
        loads("kb v1\nattr Patient.age\nterm young 10 5 20 30\n")
    assert exc.value.attribute == "Patient.age"


@pytest.mark.parametrize("text, line", [
    ("kv v1\n", 1),
    ("kb v1\nterm x 0 1 2 3\n", 2),
    ("kb v1\nattr t.c\nterm x 0 one 2 3\n", 3),
    ("kb v1\nattr tc\n", 2),
    ("kb v1\n\nattr t.c\nbogus\n", 4),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        loads(text)
    assert exc.value.line == line


def test_duplicate_term_names_rejected():
    with pytest.raises(InvariantViolation):
        loads("kb v1\nattr t.c\nterm x 0 1 2 3\nterm x 1 2 3 4\n")


def test_unsorted_terms_rejected():
    with pytest.raises(InvariantViolation):
        loads("kb v1\nattr t.c\nterm x 5 6 7 8\nterm y 0 1 2 3\n")


def test_duplicate_attribute_rejected():
    with pytest.raises(InvariantViolation):
        loads("kb v1\nattr t.c\nterm x 0 1 2 3\nattr t.c\nterm y 0 1 2 3\n")


def test_build_kb_from_tables():
    table = Table("T", (("x", "numeric"),), [(v,) for v in [1, 2, 3, 50, 51, 52, 90, 91]])
    kb = build_kb([table], [AttributeSpec.parse("T.x=lo,mid,hi")], seed=3)
    attr = kb.get("t", "X")
    assert [t.name for t in attr.terms] == ["lo", "mid", "hi"]
    assert kb.fingerprint
    assert loads(dumps(kb)) == kb


@pytest.mark.parametrize("text, expected", [
    ("A.b", ("A", "b", 3, None)),
    ("A.b:5", ("A", "b", 5, None)),
    ("A.b=x, y", ("A", "b", 2, ("x", "y"))),
])
def test_attribute_spec_parse(text, expected):
    spec = AttributeSpec.parse(text)
    assert (spec.table, spec.column, spec.k, spec.names) == expected
