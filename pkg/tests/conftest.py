import sys

import pytest

from flexaq.engine import fixture_tables
from flexaq.kb import build_kb
from helpers import FIXTURE_SPECS


@pytest.fixture(scope="session")
def small_db():
    tables = fixture_tables(3000, seed=11)
    kb = build_kb(tables.values(), FIXTURE_SPECS, seed=0)
    return tables, kb


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
