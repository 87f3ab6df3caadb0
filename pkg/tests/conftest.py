import os

import numpy as np
import pytest

from tradenet.countries import CountryUniverse
from tradenet.trade_graph import YearlyTradeGraph

SAMPLE_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "tradenet", "data", "sample")
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def make_graph(nodes, edges, year=2000):
    """Graph from ``(origin, destination, weight)`` triples on sorted ``nodes``."""
    nodes = tuple(sorted(nodes))
    idx = {c: i for i, c in enumerate(nodes)}
    w = np.zeros((len(nodes), len(nodes)))
    for o, d, v in edges:
        w[idx[o], idx[d]] = v
    return YearlyTradeGraph(year, nodes, w)


def graph_from_matrix(w, year=2000):
    n = w.shape[0]
    nodes = tuple(f"N{chr(65 + i // 26)}{chr(65 + i % 26)}" for i in range(n))
    return YearlyTradeGraph(year, nodes, np.asarray(w, dtype=float))


@pytest.fixture
def abc_universe():
    return CountryUniverse(["AAA", "BBB", "CCC"])


@pytest.fixture
def sample_dir():
    return os.path.abspath(SAMPLE_DIR)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
