import itertools
from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gi_anneal.graphs import Graph

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@lru_cache(maxsize=None)
def all_graphs(n: int) -> tuple[Graph, ...]:
    """Every labeled simple graph on ``n`` vertices, in edge-bitmask order."""
    pairs = list(itertools.combinations(range(n), 2))
    return tuple(
        Graph(n, frozenset(e for k, e in enumerate(pairs) if mask >> k & 1)) for mask in range(1 << len(pairs))
    )


@st.composite
def graphs(draw, min_n=1, max_n=7):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(n, frozenset(e for e, k in zip(pairs, keep) if k))


@st.composite
def graph_pairs(draw, min_n=1, max_n=6):
    g1 = draw(graphs(min_n, max_n))
    g2 = draw(graphs(g1.n, g1.n))
    return g1, g2


@pytest.fixture(scope="session")
def hw():
    from gi_anneal.chimera import default_hardware

    return default_hardware()


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
