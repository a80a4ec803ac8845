"""Correlation distances, Kruskal minimum spanning tree and subdominant ultrametric."""

import math
from dataclasses import dataclass

import numpy as np

from .causal_graph import Arc, DirectedGraph
from .exceptions import DegenerateSeries


@dataclass
class CorrMatrix:
    labels: list
    values: np.ndarray


@dataclass
class DistanceMatrix:
    labels: list
    values: np.ndarray


@dataclass
class Mst:
    labels: list
    edges: list  # (i, j, d_ij) with i < j, in insertion order

    def total_weight(self):
        return math.fsum(e[2] for e in self.edges)

    def edge_set(self):
        return {(min(i, j), max(i, j)) for i, j, _ in self.edges}

    def to_graph(self, meta=None):
        arcs = [Arc(self.labels[i], self.labels[j], float(d)) for i, j, d in self.edges]
        m = {"directed": False}
        m.update(meta or {})
        return DirectedGraph(list(self.labels), arcs, meta=m, directed=False)


@dataclass
class MetricReport:
    """Outcome of a metric / ultrametric scan.

    ``violation`` is the largest excess found (0 when everything holds) and
    ``triple`` the offending (i, j, k) indices, or None.
    """

    passed: bool
    kind: str
    violation: float
    triple: tuple = None


def correlation_matrix(panel):
    """Pearson correlations of the panel columns, diagonal set to exactly 1."""
    x = panel.values
    if x.shape[0] < 3:
        raise ValueError("correlation needs at least 3 samples")
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    scale = np.maximum(np.abs(x).max(axis=0), np.finfo(float).tiny)
    for k, lab in enumerate(panel.labels):
        if not norms[k] > 1e-13 * scale[k] * np.sqrt(x.shape[0]):
            raise DegenerateSeries(lab)
    z = centered / norms
    c = z.T @ z
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return CorrMatrix(list(panel.labels), c)


def to_distance(corr):
    """``d = sqrt(2 (1 - c))``, radicand clamped at 0."""
    c = np.asarray(corr.values, dtype=float)
    d = np.sqrt(np.maximum(2.0 * (1.0 - c), 0.0))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(list(corr.labels), d)


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1
        return True


def kruskal_mst(dist):
    """Minimum spanning tree; equal distances are taken in (i, j) order."""
    d = np.asarray(dist.values, dtype=float)
    n = d.shape[0]
    if n < 2:
        raise ValueError("MST needs at least 2 vertices")
    candidates = sorted((d[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    uf = UnionFind(n)
    edges = []
    for w, i, j in candidates:
        if uf.union(i, j):
            edges.append((i, j, float(w)))
            if len(edges) == n - 1:
                break
    return Mst(list(dist.labels), edges)


def subdominant_distance(mst):
    """Largest edge weight on the tree path between every pair of vertices."""
    n = len(mst.labels)
    nbrs = [[] for _ in range(n)]
    for i, j, w in mst.edges:
        nbrs[i].append((j, w))
        nbrs[j].append((i, w))
    out = np.zeros((n, n))
    for s in range(n):
        stack = [(s, -1, 0.0)]
        while stack:
            v, parent, worst = stack.pop()
            out[s, v] = worst
            for u, w in nbrs[v]:
                if u != parent:
                    stack.append((u, v, max(worst, w)))
    return DistanceMatrix(list(mst.labels), out)


def check_metric_properties(dist, ultrametric=False, tol=1e-12):
    """Scan zero diagonal, symmetry and every triple for the triangle inequality.

    With ``ultrametric`` the stronger ``d_ij <= max(d_ik, d_kj)`` is checked
    as well.  The worst violation over all checks is reported.
    """
    d = np.asarray(dist.values, dtype=float)
    n = d.shape[0]
    worst, triple, kind = 0.0, None, "metric"

    diag = np.abs(np.diag(d))
    if n and diag.max() > worst:
        k = int(diag.argmax())
        worst, triple, kind = float(diag[k]), (k, k, k), "zero_diagonal"
    asym = np.abs(d - d.T)
    if n and asym.max() > worst:
        i, j = np.unravel_index(asym.argmax(), asym.shape)
        worst, triple, kind = float(asym[i, j]), (int(i), int(j), int(j)), "symmetry"

    # excess[i, k, j] = d_ij - (d_ik + d_kj)
    tri = d[:, None, :] - (d[:, :, None] + d[None, :, :])
    if n and tri.max() > worst:
        i, k, j = np.unravel_index(tri.argmax(), tri.shape)
        worst, triple, kind = float(tri[i, k, j]), (int(i), int(j), int(k)), "triangle"
    if ultrametric and n:
        ultra = d[:, None, :] - np.maximum(d[:, :, None], d[None, :, :])
        if ultra.max() > worst:
            i, k, j = np.unravel_index(ultra.argmax(), ultra.shape)
            worst, triple, kind = float(ultra[i, k, j]), (int(i), int(j), int(k)), "ultrametric"

    if worst <= tol:
        return MetricReport(True, "ultrametric" if ultrametric else "metric", max(worst, 0.0))
    return MetricReport(False, kind, worst, triple)
