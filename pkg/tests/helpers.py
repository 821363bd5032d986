"""Independent oracles and generators shared by the test modules."""

import itertools
import random

from hypothesis import strategies as st

from flexaq.fca import FormalContext
from flexaq.kb import AttributeSpec
from flexaq.query import (Aggregate, Column, CrispPredicate, FlexibleQuery, FuzzyPredicate,
                          Join, TableRef)


# --- FCA ------------------------------------------------------------------

def brute_force_concepts(objects, attributes, incidence):
    """Every formal concept, by closing all 2^|A| attribute subsets."""
    inc = set(incidence)
    concepts = set()
    for r in range(len(attributes) + 1):
        for subset in itertools.combinations(attributes, r):
            extent = frozenset(o for o in objects if all((o, a) in inc for a in subset))
            intent = frozenset(a for a in attributes if all((o, a) in inc for o in extent))
            concepts.add((extent, intent))
    return concepts


def random_context(rng, max_objects=8, max_attributes=8, density=None):
    n = rng.randint(0, max_objects)
    m = rng.randint(0, max_attributes)
    p = rng.random() if density is None else density
    objects = list(range(1, n + 1))
    attributes = [f"a{j}" for j in range(m)]
    pairs = [(o, a) for o in objects for a in attributes if rng.random() < p]
    return objects, attributes, pairs


@st.composite
def contexts(draw, max_objects=8, max_attributes=8):
    n = draw(st.integers(0, max_objects))
    m = draw(st.integers(0, max_attributes))
    objects = list(range(n))
    attributes = [f"a{j}" for j in range(m)]
    cells = draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))
    pairs = [(objects[i], attributes[j]) for i in range(n) for j in range(m)
             if cells[i * m + j]]
    return FormalContext.from_pairs(objects, attributes, pairs)


# --- queries --------------------------------------------------------------

NAMES = ["t", "Death", "Patient", "x1", "col_a", "year", "Alcohol", "is_flag", "_u"]
TERMS = ["regularly", "school", "low", "very high", "it's", "HIGH", "and"]


def random_column(rng):
    return Column(rng.choice(NAMES), rng.choice([None, rng.choice(NAMES)]))


def random_literal(rng):
    kind = rng.randrange(4)
    if kind == 0:
        return rng.randint(-1000, 1000)
    if kind == 1:
        return rng.uniform(-1e6, 1e6)
    if kind == 2:
        return rng.choice([0.5, 1e-05, 2.5e10, -3.25])
    return rng.choice(["x", "o'brien", "", "two words", "SELECT"])


def random_query(rng) -> FlexibleQuery:
    aggs = tuple(Aggregate(rng.choice(["COUNT", "SUM", "AVG"]),
                           None if rng.random() < 0.3 else random_column(rng))
                 for _ in range(rng.randint(1, 3)))
    tables = tuple(TableRef(rng.choice(NAMES)) for _ in range(rng.randint(1, 3)))
    fuzzy = tuple(FuzzyPredicate(random_column(rng), rng.choice(TERMS))
                  for _ in range(rng.randint(0, 3)))
    crisp = tuple(CrispPredicate(random_column(rng),
                                 rng.choice(["=", "<>", "!=", "<", "<=", ">", ">="]),
                                 random_literal(rng))
                  for _ in range(rng.randint(0, 2)))
    joins = tuple(Join(random_column(rng), random_column(rng))
                  for _ in range(rng.randint(0, 2)))
    group = tuple(random_column(rng) for _ in range(rng.randint(0, 2)))
    return FlexibleQuery(aggs, tables, fuzzy, crisp, joins, group)


@st.composite
def queries(draw):
    return random_query(random.Random(draw(st.integers(0, 2 ** 32))))


# --- engine fixtures ------------------------------------------------------

FIXTURE_SPECS = (
    AttributeSpec("Patient", "age", 3, ("young", "middle_aged", "old")),
    AttributeSpec("Patient", "education_years", 3, ("school", "college", "university")),
    AttributeSpec("Patient", "alcohol_units_per_week", 3,
                  ("never", "occasionally", "regularly")),
    AttributeSpec("Death", "year", 2, ("early", "late")),
)

# 25 queries over the Patient/Death fixture: every aggregate kind, fuzzy and
# crisp predicates, joins, zero to two grouping columns, both driving sides.
CORPUS = [
    "SELECT COUNT(*) FROM Death, Patient WHERE Patient.alcohol_units_per_week IS regularly "
    "AND Patient.education_years IS school AND Death.pid = Patient.pid GROUP BY Death.year",
    "SELECT COUNT(*) FROM Patient",
    "SELECT COUNT(*) FROM Patient GROUP BY Patient.education_years",
    "SELECT SUM(age) FROM Patient WHERE alcohol_units_per_week IS never",
    "SELECT AVG(age) FROM Patient WHERE alcohol_units_per_week IS regularly",
    "SELECT COUNT(*), SUM(Patient.age), AVG(Patient.age) FROM Patient "
    "WHERE Patient.education_years IS university",
    "SELECT AVG(Patient.alcohol_units_per_week) FROM Death, Patient "
    "WHERE Death.pid = Patient.pid GROUP BY Death.cause",
    "SELECT COUNT(*) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "AND Patient.age IS old GROUP BY Death.year, Death.cause",
    "SELECT SUM(Patient.education_years) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "AND Death.cause = 'cardiac' GROUP BY Death.year",
    "SELECT COUNT(*) FROM Patient WHERE age >= 60 AND alcohol_units_per_week IS occasionally",
    "SELECT AVG(age) FROM Patient WHERE education_years < 12 GROUP BY education_years",
    "SELECT COUNT(*), AVG(Patient.age) FROM Patient, Death WHERE Patient.pid = Death.pid "
    "AND Patient.alcohol_units_per_week IS regularly GROUP BY Death.year",
    "SELECT SUM(Patient.alcohol_units_per_week) FROM Patient, Death "
    "WHERE Patient.pid = Death.pid AND Death.year IS late GROUP BY Death.cause",
    "SELECT COUNT(*) FROM Death WHERE year IS early GROUP BY cause",
    "SELECT COUNT(Death.did) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "AND Patient.age IS young AND Patient.education_years IS college",
    "SELECT AVG(Patient.education_years) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "AND Patient.alcohol_units_per_week IS never AND Death.year <> 2016 GROUP BY Death.year",
    "SELECT COUNT(*), SUM(Patient.age) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "AND Death.cause != 'other' AND Patient.age IS middle_aged GROUP BY Death.cause",
    "SELECT SUM(age) FROM Patient WHERE age > 200",
    "SELECT AVG(alcohol_units_per_week) FROM Patient GROUP BY education_years",
    "SELECT COUNT(*) FROM Patient WHERE alcohol_units_per_week IS regularly "
    "AND education_years IS school AND age IS old",
    "SELECT SUM(Death.year) FROM Death WHERE cause = 'stroke' GROUP BY year",
    "SELECT COUNT(*) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "GROUP BY Patient.education_years",
    "SELECT AVG(Patient.age), COUNT(*) FROM Death, Patient WHERE Death.pid = Patient.pid "
    "AND Patient.alcohol_units_per_week IS occasionally AND Patient.age <= 70.5",
    "SELECT COUNT(*) FROM Patient WHERE pid <= 100",
    "SELECT SUM(Patient.age), AVG(Patient.alcohol_units_per_week) FROM Patient, Death "
    "WHERE Death.pid = Patient.pid AND Death.year IS early AND Patient.education_years "
    "IS school GROUP BY Death.year, Death.cause",
]
