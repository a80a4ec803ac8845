"""Pruned causality graphs, causal trees and their dot / JSON forms."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyGraph

PENWIDTH_MIN = 0.5
PENWIDTH_MAX = 5.0
FLAG_COLORS = {"flagged": "blue"}
META_KEYS = ("lag", "alpha", "method", "seed")


@dataclass(frozen=True)
class Arc:
    source: str
    target: str
    weight: float
    p_value: float = None
    synthetic: bool = False


@dataclass
class DirectedGraph:
    vertices: list
    arcs: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    directed: bool = True

    def __post_init__(self):
        self.vertices = [str(v) for v in self.vertices]
        known = set(self.vertices)
        for a in self.arcs:
            if a.source == a.target:
                raise ValueError(f"self-arc on {a.source!r}")
            if a.source not in known or a.target not in known:
                raise ValueError(f"arc {a.source}->{a.target} references unknown vertex")
        self.flags = {v: list(self.flags.get(v, [])) for v in self.vertices}
        self.meta = {**{k: None for k in META_KEYS}, **self.meta}

    @property
    def adjacency(self):
        """``n x n`` weights with 0 for absent arcs (symmetric if undirected)."""
        idx = {v: k for k, v in enumerate(self.vertices)}
        a = np.zeros((len(self.vertices), len(self.vertices)))
        for arc in self.arcs:
            a[idx[arc.source], idx[arc.target]] = arc.weight
            if not self.directed:
                a[idx[arc.target], idx[arc.source]] = arc.weight
        return a

    def total_weight(self):
        return math.fsum(a.weight for a in self.arcs)

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (self.vertices == other.vertices and self.directed == other.directed
                and _sorted_arcs(self.arcs) == _sorted_arcs(other.arcs)
                and self.flags == other.flags and self.meta == other.meta)


@dataclass
class CausalTree(DirectedGraph):
    """Spanning arborescence: every vertex but ``root`` has one incoming arc."""

    root: str = None

    def __post_init__(self):
        super().__post_init__()
        if self.root is None or self.root not in self.vertices:
            raise ValueError("tree root must be one of the vertices")
        if len(self.arcs) != len(self.vertices) - 1:
            raise ValueError("a spanning tree over n vertices has n - 1 arcs")
        parents = {}
        for a in self.arcs:
            if a.target == self.root or a.target in parents:
                raise ValueError(f"vertex {a.target!r} has in-degree > 1 or is the root")
            parents[a.target] = a.source
        for v in self.vertices:
            seen = set()
            while v != self.root:
                if v in seen:
                    raise ValueError("tree arcs contain a cycle")
                seen.add(v)
                v = parents[v]

    def __eq__(self, other):
        if not isinstance(other, CausalTree):
            return NotImplemented
        return DirectedGraph.__eq__(self, other) and self.root == other.root


def _sorted_arcs(arcs):
    return sorted(arcs, key=lambda a: (a.source, a.target))


def threshold_adjacency(matrix, alpha=0.01, weight="te", flags=None):
    """Keep arc i -> j when its p-value is <= ``alpha`` and its causality is positive.

    Arc weights are the transfer entropy (``weight="te"``) or the Granger
    causality (``weight="gc"``); missing (NaN) entries never become arcs.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    values = matrix.te if weight == "te" else matrix.gc
    labels = matrix.labels
    arcs = []
    for i, src in enumerate(labels):
        for j, tgt in enumerate(labels):
            if i == j:
                continue
            w, pv = values[i, j], matrix.p_values[i, j]
            if np.isnan(w) or np.isnan(pv):
                continue
            if pv <= alpha and w > 0:
                arcs.append(Arc(src, tgt, float(w), float(pv)))
    meta = {"lag": int(matrix.lag), "alpha": float(alpha), "method": matrix.method,
            "seed": int(matrix.seed)}
    return DirectedGraph(list(labels), arcs, flags=flags or {}, meta=meta)


def choose_root(graph):
    """Vertex with the largest total outgoing weight; ties go to the smallest label."""
    if not graph.vertices:
        raise EmptyGraph("EmptyGraph: no vertices")
    out = {v: [] for v in graph.vertices}
    for a in graph.arcs:
        out[a.source].append(a.weight)
    return min(graph.vertices, key=lambda v: (-math.fsum(out[v]), v))


def _reachable(graph, root):
    children = {v: [] for v in graph.vertices}
    for a in graph.arcs:
        children[a.source].append(a.target)
    seen = {root}
    stack = [root]
    while stack:
        for w in children[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def bridged_arcs(graph, root):
    """Graph arcs plus zero-weight synthetic ``root -> v`` for every unreachable v."""
    reach = _reachable(graph, root)
    extra = [Arc(root, v, 0.0, None, True) for v in graph.vertices if v not in reach]
    return list(graph.arcs) + extra


def max_arborescence(vertices, arcs, root):
    """Maximum-weight spanning arborescence rooted at ``root`` (Chu-Liu/Edmonds).

    ``arcs`` is a list of :class:`Arc`; returns the chosen subset.  Among
    equal-weight candidate in-arcs the one appearing first in ``arcs`` wins.
    Raises ``ValueError`` if some vertex cannot be reached.
    """
    edges = [(a.source, a.target, a.weight, k) for k, a in enumerate(arcs)
             if a.target != root and a.source != a.target]
    chosen = _edmonds(list(vertices), edges, root)
    return [arcs[k] for k in sorted(chosen)]


def _edmonds(nodes, edges, root):
    """Return ids of the selected edges; ``edges`` are (u, v, w, id) tuples."""
    best = {}
    for e in edges:
        u, v, w, _ = e
        if v == root or u == v:
            continue
        if v not in best or w > best[v][2]:
            best[v] = e
    for v in nodes:
        if v != root and v not in best:
            raise ValueError(f"vertex {v!r} has no incoming arc")

    cycle = _find_cycle(best, root)
    if cycle is None:
        return {e[3] for e in best.values()}

    cyc = set(cycle)
    marker = ("cycle", len(nodes), tuple(sorted(map(repr, cyc))))
    contracted = []
    origin = {}
    cyc_weight = {v: best[v][2] for v in cyc}
    for u, v, w, eid in edges:
        if u in cyc and v in cyc:
            continue
        if v in cyc:
            new = (u, marker, w - cyc_weight[v], eid)
        elif u in cyc:
            new = (marker, v, w, eid)
        else:
            new = (u, v, w, eid)
        origin[eid] = (u, v)
        contracted.append(new)
    sub_nodes = [n for n in nodes if n not in cyc] + [marker]
    picked = _edmonds(sub_nodes, contracted, root)

    entering = None
    for eid in picked:
        u, v = origin[eid]
        if v in cyc and u not in cyc:
            entering = (eid, v)
    result = set(picked)
    for v in cyc:
        if v != entering[1]:
            result.add(best[v][3])
    return result


def _find_cycle(best, root):
    color = {}
    for start in best:
        path = []
        v = start
        while v != root and v in best and v not in color:
            color[v] = start
            path.append(v)
            v = best[v][0]
        if v in color and color[v] == start:
            return path[path.index(v):]
    return None


def extract_causal_tree(graph):
    """Maximum-weight spanning arborescence of ``graph``.

    The root is :func:`choose_root`; vertices the root cannot reach get a
    zero-weight synthetic arc from the root so a spanning tree always exists.
    """
    if not graph.vertices:
        raise EmptyGraph("EmptyGraph: no vertices")
    root = choose_root(graph)
    candidates = bridged_arcs(graph, root)
    arcs = max_arborescence(graph.vertices, candidates, root)
    flags = {v: list(graph.flags.get(v, [])) for v in graph.vertices}
    flags[root] = flags[root] + ["root"]
    return CausalTree(list(graph.vertices), arcs, flags=flags, meta=dict(graph.meta),
                      root=root)


def _penwidths(weights):
    finite = [w for w in weights if math.isfinite(w)]
    if not finite:
        return [PENWIDTH_MAX for _ in weights]
    lo, hi = min(finite), max(finite)
    out = []
    for w in weights:
        if not math.isfinite(w):
            out.append(PENWIDTH_MAX)
        elif hi == lo:
            out.append((PENWIDTH_MIN + PENWIDTH_MAX) / 2)
        else:
            out.append(PENWIDTH_MIN + (PENWIDTH_MAX - PENWIDTH_MIN) * (w - lo) / (hi - lo))
    return out


def _dot_id(label):
    return '"' + str(label).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph, name="G"):
    """Graphviz text: one line per vertex, one ``a -> b`` (or ``a -- b``) per arc."""
    directed = graph.directed
    arrow = "->" if directed else "--"
    lines = [f"{'digraph' if directed else 'graph'} {_dot_id(name)} {{"]
    for v in graph.vertices:
        attrs = []
        for flag in graph.flags.get(v, []):
            if flag in FLAG_COLORS:
                attrs.append(f"color={FLAG_COLORS[flag]}")
            if flag == "root":
                attrs.append("shape=doublecircle")
        lines.append(f"  {_dot_id(v)}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    arcs = _sorted_arcs(graph.arcs)
    for a, pw in zip(arcs, _penwidths([a.weight for a in arcs])):
        attrs = [f"penwidth={pw:.4f}", f'label="{a.weight:.4g}"']
        if a.synthetic:
            attrs.append("style=dashed")
        lines.append(f"  {_dot_id(a.source)} {arrow} {_dot_id(a.target)} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _json_num(v):
    if v is None:
        return None
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def _from_json_num(v):
    return None if v is None else float(v)


def graph_to_dict(graph):
    meta = {k: graph.meta.get(k) for k in META_KEYS}
    meta.update((k, v) for k, v in graph.meta.items() if k not in META_KEYS)
    return {
        "vertices": [{"label": v, "flags": list(graph.flags.get(v, []))}
                     for v in graph.vertices],
        "arcs": [{"from": a.source, "to": a.target, "weight": _json_num(a.weight),
                  "p_value": _json_num(a.p_value), "synthetic": bool(a.synthetic)}
                 for a in _sorted_arcs(graph.arcs)],
        "meta": meta,
    }


def export_json(graph):
    """Canonical JSON: arcs sorted by (from, to), non-finite numbers as strings."""
    return json.dumps(graph_to_dict(graph), indent=2, allow_nan=False) + "\n"


def parse_json(text, directed=None):
    """Inverse of :func:`export_json`; a vertex flagged ``root`` yields a tree."""
    d = json.loads(text)
    vertices = [v["label"] for v in d["vertices"]]
    flags = {v["label"]: list(v["flags"]) for v in d["vertices"]}
    arcs = [Arc(a["from"], a["to"], _from_json_num(a["weight"]),
                _from_json_num(a["p_value"]), bool(a["synthetic"])) for a in d["arcs"]]
    meta = dict(d["meta"])
    if directed is None:
        directed = meta.get("directed", True)
    roots = [v for v in vertices if "root" in flags[v]]
    if roots and directed:
        return CausalTree(vertices, arcs, flags=flags, meta=meta, root=roots[0])
    return DirectedGraph(vertices, arcs, flags=flags, meta=meta, directed=directed)
