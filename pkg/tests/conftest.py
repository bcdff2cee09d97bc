import numpy as np
import pytest

from matchorder.graph import LabeledGraph, load_graph
from matchorder.synthetic import random_labeled_graph

PATH_TEXT = "t 3 2\nv 0 0 1\nv 1 1 2\nv 2 0 1\ne 0 1\ne 1 2\n"


def make_graph(labels, edges, universe=None):
    return LabeledGraph.from_edges(labels, edges, universe)


def path_graph(labels):
    return make_graph(labels, [(i, i + 1) for i in range(len(labels) - 1)])


def complete_graph(n, label=0):
    return make_graph([label] * n, [(i, j) for i in range(n) for j in range(i + 1, n)])


@pytest.fixture
def path3():
    return load_graph(PATH_TEXT)


def random_instance(rng: np.random.Generator, q_range=(2, 8), g_range=(10, 40), labels=(1, 4)):
    """Random sparse (query, data) pair.

    About half of the queries are connected pieces of the data graph so that
    matches actually occur; the rest are independent random graphs. The data
    graph's mean degree stays in [1, 3.5] to keep the brute-force oracle fast.
    """
    from matchorder.graph import ExtractionError, extract_connected_query

    n_g = int(rng.integers(g_range[0], g_range[1] + 1))
    num_labels = int(rng.integers(labels[0], labels[1] + 1))
    p = float(rng.uniform(1.0, 3.5)) / (n_g - 1)
    g = random_labeled_graph(n_g, p, num_labels, int(rng.integers(2**31)))
    size = int(rng.integers(q_range[0], q_range[1] + 1))
    if rng.random() < 0.5:
        try:
            return extract_connected_query(g, size, int(rng.integers(2**31))), g
        except ExtractionError:
            pass
    q = random_labeled_graph(size, 0.4, num_labels, int(rng.integers(2**31)), connected=True)
    return q, g


# one summary line per acceptance criterion, echoed after the test session
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
