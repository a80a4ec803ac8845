import numpy as np
import pytest

from marketflow.ingest import ReturnPanel
from marketflow.synthetic import default_labels, synthetic_dates


def make_panel(values, labels=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    labels = labels or default_labels(values.shape[1])
    return ReturnPanel(synthetic_dates(values.shape[0] + 1)[1:], labels, values)


@pytest.fixture
def panel_factory():
    return make_panel


@pytest.fixture
def white_noise():
    def _make(T, n, seed):
        return make_panel(np.random.default_rng(seed).standard_normal((T, n)))
    return _make


def brute_force_arborescence(vertices, arcs, root):
    """Best total weight over every choice of one in-arc per non-root vertex."""
    import itertools
    import math
    others = [v for v in vertices if v != root]
    incoming = [[a for a in arcs if a.target == v and a.source != v] for v in others]
    best = -math.inf
    for combo in itertools.product(*incoming):
        parent = {a.target: a.source for a in combo}
        ok = True
        for v in others:
            seen = set()
            while v != root and ok:
                ok = v not in seen
                seen.add(v)
                v = parent[v]
            if not ok:
                break
        if ok:
            best = max(best, math.fsum(a.weight for a in combo))
    return best


def prufer_trees(n):
    """Edge sets of all n**(n-2) labeled trees on range(n)."""
    import heapq
    import itertools
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for s in seq:
            degree[s] += 1
        leaves = [v for v in range(n) if degree[v] == 1]
        heapq.heapify(leaves)
        edges = []
        for s in seq:
            leaf = heapq.heappop(leaves)
            edges.append((min(leaf, s), max(leaf, s)))
            degree[s] -= 1
            if degree[s] == 1:
                heapq.heappush(leaves, s)
        u, v = heapq.heappop(leaves), heapq.heappop(leaves)
        edges.append((min(u, v), max(u, v)))
        yield edges


def random_digraph(rs, n_max=6):
    from marketflow.causal_graph import Arc, DirectedGraph
    n = int(rs.integers(1, n_max + 1))
    labels = default_labels(n)
    density = rs.uniform(0.2, 1.0)
    arcs = [Arc(u, v, float(rs.uniform(0.01, 1.0))) for u in labels for v in labels
            if u != v and rs.random() < density]
    return DirectedGraph(labels, arcs)


def random_correlation(rs, n, T=None):
    T = T or int(rs.integers(n + 2, 60))
    mix = rs.standard_normal((n, n))
    x = rs.standard_normal((T, n)) @ mix
    return make_panel(x)
