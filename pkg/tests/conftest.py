import math
from pathlib import Path

import numpy as np
import pytest

from novikov.surface import simple_cubic

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def f():
    return simple_cubic()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_directions(k, seed=7, bound=12):
    """Distinct primitive directions with nonzero components, deterministic."""
    r = np.random.default_rng(seed)
    out = []
    while len(out) < k:
        h = tuple(int(c) for c in r.integers(1, bound + 1, size=3))
        g = math.gcd(*h)
        h = tuple(c // g for c in h)
        if h not in out:
            out.append(h)
    return out


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
