import numpy as np
import pytest

from qpflow import Graph, ProblemInstance


def parallel_pair(w1=1.0, w2=1.0, q=2.0, p=2.0, eps=1e-3):
    """Two parallel edges 0 -> 1 carrying one unit of a single commodity."""
    g = Graph.from_edges(2, [(0, 1), (0, 1)], [w1, w2])
    return ProblemInstance(g, np.array([[1.0], [-1.0]]), q, p, eps)


def weighted_pair_optimum():
    """Closed form of min x^4 + 16 (1 - x)^4: x = c / (1 + c), c = 16^(1/3)."""
    c = 16.0 ** (1.0 / 3.0)
    return 16.0 / (1.0 + c) ** 3


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
