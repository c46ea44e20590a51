import numpy as np
import pytest

from uep_fountain.bp_decoder import DecodeGraph


def random_tree_graph(rng, k, n, mu_scale=3.0, llr_scale=4.0):
    """Random cycle-free bipartite graph: each new node attaches to one existing node of the other side."""
    order = ["i"] + list(rng.permutation(["i"] * (k - 1) + ["o"] * n))
    # every output must join after at least one input, which the leading "i" guarantees
    ins, outs, edges = [], [], []
    for kind in order:
        if kind == "i":
            node = len(ins)
            ins.append(node)
            if outs:
                edges.append((int(rng.choice(outs)), node))
        else:
            node = len(outs)
            outs.append(node)
            edges.append((node, int(rng.choice(ins))))
    edges.sort()
    eo = np.array([e[0] for e in edges], dtype=np.int64)
    ei = np.array([e[1] for e in edges], dtype=np.int64)
    mu = rng.uniform(0.05, mu_scale, k) * rng.choice([-1.0, 1.0], k)
    llr = rng.normal(0.0, llr_scale, n)
    return DecodeGraph(k, n, eo, ei, llr, mu)


@pytest.fixture
def tree_graph():
    return random_tree_graph


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
