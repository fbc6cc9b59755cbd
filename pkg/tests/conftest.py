import functools

import numpy as np
import pytest

from sisampling.scenario import load_golden


@functools.lru_cache(maxsize=None)
def golden_run(name):
    """Shared, lazily built pipeline for a shipped scenario."""
    return load_golden(name).build()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown after the run
CRITERIA = []


@pytest.fixture
def criterion(request):
    """Record ``criterion(n, passed, detail)``; the line is printed at once
    and repeated in the terminal summary."""

    def record(n, passed, detail):
        line = f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}"
        CRITERIA.append((n, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(CRITERIA, key=lambda t: t[0]):
            terminalreporter.write_line(line)
