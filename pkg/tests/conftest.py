import re

import numpy as np
import pytest

import virsdd as v

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


@pytest.fixture(scope="session")
def P0():
    return v.P0


@pytest.fixture(scope="session")
def eq0():
    return v.equilibrium(v.P0)


@pytest.fixture(scope="session")
def pq_delay(eq0):
    return v.PointwiseQuadratic(0.5, 0.01, 0.01, eq0.That, eq0.Vhat, 0.05)


@pytest.fixture(scope="session")
def rec_delay():
    return v.Reciprocal(0.2, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m:
                key = int(m.group(1))
                prev = rows.get(key)
                ok = outcome == "passed"
                rows[key] = (m.group(2), ok if prev is None else (prev[1] and ok))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(rows):
        name, ok = rows[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {name.replace('_', ' ')}")
