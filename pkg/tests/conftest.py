import numpy as np
import pytest
from hypothesis import strategies as st

from frozenbessel.model import Kind, RootSystem


def interior_from_gaps(kind, last, gaps):
    """Descending interior point built from the last coordinate and positive gaps."""
    kind = Kind(kind)
    if kind is Kind.B:
        last = abs(last) + 0.1
    x = [last]
    for j, g in enumerate(gaps):
        base = abs(x[-1]) if (kind is Kind.D and j == 0) else x[-1]
        x.append(base + g)
    return np.array(x[::-1])


@st.composite
def interior_points(draw, kind, n_min=1, n_max=6):
    kind = Kind(kind)
    n = draw(st.integers(max(n_min, 2 if kind is Kind.D else 1), n_max))
    last = draw(st.floats(-3.0, 3.0))
    gaps = draw(st.lists(st.floats(0.2, 2.0), min_size=n - 1, max_size=n - 1))
    return RootSystem(kind, n), interior_from_gaps(kind, last, gaps)


def random_interior(rng, kind, n):
    return interior_from_gaps(kind, rng.uniform(-3, 3), rng.uniform(0.2, 2.0, n - 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
