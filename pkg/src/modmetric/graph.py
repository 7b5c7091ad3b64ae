"""Weighted graphs standing in for metric measure spaces.

A :class:`MetricMeasureGraph` carries edge lengths, node measures and edge
measures.  The metric is always the induced shortest-path metric; it is never
stored pairwise.  Generators record a ``recipe`` so that :func:`refine` can
rebuild the same space at twice the resolution.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _cs_dijkstra


class GraphError(ValueError):
    """Structural problem with a graph, path or edge map."""


class UnsupportedError(GraphError):
    """Operation not available for this graph (e.g. no recipe)."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MetricMeasureGraph:
    """Immutable weighted graph with node and edge measures.

    Nodes are ``0..N-1``.  Edge ``e`` joins ``edge_u[e]`` and ``edge_v[e]``
    with length ``edge_len[e]`` and measure ``edge_mu[e]``.
    """

    node_mu: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_len: np.ndarray
    edge_mu: np.ndarray
    pos: np.ndarray | None = None
    recipe: dict | None = None
    # CSR adjacency, sorted by neighbour id
    _indptr: np.ndarray = field(init=False, repr=False)
    _nbr: np.ndarray = field(init=False, repr=False)
    _eid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "node_mu", _frozen(self.node_mu, float))
        set_(self, "edge_u", _frozen(self.edge_u, np.int64))
        set_(self, "edge_v", _frozen(self.edge_v, np.int64))
        set_(self, "edge_len", _frozen(self.edge_len, float))
        set_(self, "edge_mu", _frozen(self.edge_mu, float))
        if self.pos is not None:
            set_(self, "pos", _frozen(self.pos, float).reshape(-1, 2))
        n, m = len(self.node_mu), len(self.edge_u)
        if n == 0:
            raise GraphError("graph has no nodes")
        for name in ("edge_v", "edge_len", "edge_mu"):
            if len(getattr(self, name)) != m:
                raise GraphError(f"{name} has wrong length")
        if self.pos is not None and len(self.pos) != n:
            raise GraphError("pos has wrong length")
        if m and (self.edge_u.min() < 0 or self.edge_v.min() < 0
                  or max(self.edge_u.max(), self.edge_v.max()) >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(self.edge_u == self.edge_v):
            raise GraphError("self-loops are not allowed")
        for name, arr in (("node measure", self.node_mu), ("edge length", self.edge_len),
                          ("edge measure", self.edge_mu)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise GraphError(f"every {name} must be finite and > 0")

        ends = np.concatenate([self.edge_u, self.edge_v])
        others = np.concatenate([self.edge_v, self.edge_u])
        eids = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((eids, others, ends))
        counts = np.bincount(ends, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        set_(self, "_indptr", _frozen(indptr, np.int64))
        set_(self, "_nbr", _frozen(others[order], np.int64))
        set_(self, "_eid", _frozen(eids[order], np.int64))
        if not self._connected():
            raise GraphError("graph is not connected")

    # -- basic queries -------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.node_mu)

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    @property
    def total_measure(self) -> float:
        return float(self.node_mu.sum())

    def neighbors(self, v: int):
        """Yield ``(neighbour, edge_id)`` pairs of ``v`` in neighbour-id order."""
        lo, hi = self._indptr[v], self._indptr[v + 1]
        return zip(self._nbr[lo:hi].tolist(), self._eid[lo:hi].tolist())

    def adjacency_lists(self) -> list[list[tuple[int, int]]]:
        """Plain-list adjacency; faster than :meth:`neighbors` in hot loops.  Do not mutate."""
        return self._adjacency

    @cached_property
    def _adjacency(self) -> list[list[tuple[int, int]]]:
        nbr, eid, ptr = self._nbr.tolist(), self._eid.tolist(), self._indptr.tolist()
        return [list(zip(nbr[ptr[v]:ptr[v + 1]], eid[ptr[v]:ptr[v + 1]]))
                for v in range(self.n_nodes)]

    def weight_matrix(self, weights: np.ndarray) -> sp.csr_matrix:
        """Symmetric sparse matrix of edge weights, keeping the lightest parallel edge.

        Explicit zeros are kept and count as edges for ``scipy.sparse.csgraph``.
        """
        n = self.n_nodes
        u = np.concatenate([self.edge_u, self.edge_v])
        v = np.concatenate([self.edge_v, self.edge_u])
        w = np.concatenate([weights, weights]).astype(float)
        key = u * n + v
        order = np.lexsort((w, key))
        ks = key[order]
        sel = order[np.r_[True, ks[1:] != ks[:-1]]]
        return sp.csr_matrix((w[sel], (u[sel], v[sel])), shape=(n, n))

    def edge_between(self, a: int, b: int) -> int | None:
        """Shortest edge joining ``a`` and ``b`` (lowest id on ties)."""
        best = None
        for w, e in self.neighbors(a):
            if w == b and (best is None or self.edge_len[e] < self.edge_len[best]):
                best = e
        return best

    def find_node(self, x: float, y: float, tol: float = 1e-9) -> int | None:
        """Node at planar position ``(x, y)``, if positions are known."""
        if self.pos is None:
            return None
        d = np.abs(self.pos[:, 0] - x) + np.abs(self.pos[:, 1] - y)
        i = int(np.argmin(d))
        return i if d[i] <= tol else None

    def _connected(self) -> bool:
        seen = np.zeros(self.n_nodes, dtype=bool)
        seen[0] = True
        stack = [0]
        nbr, ptr = self._nbr, self._indptr
        while stack:
            v = stack.pop()
            for w in nbr[ptr[v]:ptr[v + 1]]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return bool(seen.all())


@dataclass(frozen=True)
class Path:
    """Edge walk ``nodes[0] -e0- nodes[1] -e1- ...``; a single node is a constant curve."""

    nodes: tuple[int, ...]
    edges: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))
        object.__setattr__(self, "edges", tuple(int(e) for e in self.edges))
        if not self.nodes:
            raise GraphError("path needs at least one node")
        if len(self.edges) != len(self.nodes) - 1:
            raise GraphError("path needs one edge per step")

    @property
    def start(self) -> int:
        return self.nodes[0]

    @property
    def end(self) -> int:
        return self.nodes[-1]

    def is_simple(self) -> bool:
        return len(set(self.nodes)) == len(self.nodes)

    @classmethod
    def from_nodes(cls, g: MetricMeasureGraph, nodes: Sequence[int]) -> "Path":
        """Build a path through ``nodes`` using the shortest joining edge at each step."""
        edges = []
        for a, b in zip(nodes[:-1], nodes[1:]):
            e = g.edge_between(a, b)
            if e is None:
                raise GraphError(f"no edge between {a} and {b}")
            edges.append(e)
        return cls(tuple(nodes), tuple(edges))


@dataclass(frozen=True, eq=False)
class EdgeLengthMap:
    """Per-edge image lengths ``len_u(e)`` of a map ``u``.

    The length functional of a path is the sum of ``len_u`` over its edges.
    ``target_pos`` optionally records images of nodes for factorization checks.
    """

    values: np.ndarray
    lip_bound: float | None = None
    target_pos: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, float))
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise GraphError("edge image lengths must be finite and >= 0")
        if self.target_pos is not None:
            object.__setattr__(self, "target_pos", _frozen(self.target_pos, float))

    def check(self, g: MetricMeasureGraph) -> None:
        if len(self.values) != g.n_edges:
            raise GraphError("edge length map does not match graph")
        if self.lip_bound is not None:
            excess = self.values - self.lip_bound * g.edge_len
            if np.any(excess > 1e-12 * np.maximum(1.0, g.edge_len)):
                raise GraphError("edge length map exceeds declared Lipschitz bound")

    def scaled(self, s: float) -> "EdgeLengthMap":
        lip = None if self.lip_bound is None else self.lip_bound * s
        return EdgeLengthMap(self.values * s, lip, self.target_pos)

    @classmethod
    def identity(cls, g: MetricMeasureGraph) -> "EdgeLengthMap":
        return cls(g.edge_len, lip_bound=1.0)


def weights_of(g: MetricMeasureGraph, w) -> np.ndarray:
    """Resolve an edge-weight argument (``None`` = edge lengths)."""
    if w is None:
        return g.edge_len
    if isinstance(w, EdgeLengthMap):
        w.check(g)
        return w.values
    arr = np.asarray(w, dtype=float)
    if arr.shape != (g.n_edges,):
        raise GraphError("edge weights do not match graph")
    return arr


# -- lengths and distances ---------------------------------------------------

def check_path(g: MetricMeasureGraph, path: Path) -> None:
    for k, e in enumerate(path.edges):
        if not 0 <= e < g.n_edges:
            raise GraphError(f"edge {e} not in graph")
        a, b = path.nodes[k], path.nodes[k + 1]
        if {a, b} != {int(g.edge_u[e]), int(g.edge_v[e])}:
            raise GraphError(f"edge {e} does not join {a} and {b}")
    if path.edges == () and not 0 <= path.start < g.n_nodes:
        raise GraphError(f"node {path.start} not in graph")


def path_length(g: MetricMeasureGraph, path: Path, w=None) -> float:
    """Sum of ``w`` (default: edge lengths) over the edges of ``path``."""
    check_path(g, path)
    wt = weights_of(g, w)
    return float(sum(wt[e] for e in path.edges))


def dijkstra(g: MetricMeasureGraph, sources: Iterable[int], weights=None,
             targets: Iterable[int] | None = None):
    """Multi-source Dijkstra.

    Returns ``(dist, pred_edge)``; ``pred_edge[v] == -1`` at sources and
    unreached nodes.  Ties are settled lowest node id first.  With ``targets``
    the search stops once the first target is settled.
    """
    wt = weights_of(g, weights).tolist()
    adj = g.adjacency_lists()
    n = g.n_nodes
    dist = [np.inf] * n
    pred = [-1] * n
    done = [False] * n
    heap = []
    for s in sorted(set(int(s) for s in sources)):
        dist[s] = 0.0
        heap.append((0.0, s))
    heapq.heapify(heap)
    stop = set(int(t) for t in targets) if targets is not None else None
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        if stop is not None and v in stop:
            break
        for w, e in adj[v]:
            nd = d + wt[e]
            if nd < dist[w]:
                dist[w] = nd
                pred[w] = e
                heapq.heappush(heap, (nd, w))
    return np.array(dist), np.array(pred, dtype=np.int64)


def path_to(g: MetricMeasureGraph, pred: np.ndarray, t: int) -> Path:
    """Walk predecessor edges back from ``t``."""
    nodes, edges = [int(t)], []
    v = int(t)
    while pred[v] >= 0:
        e = int(pred[v])
        edges.append(e)
        v = int(g.edge_u[e]) if int(g.edge_v[e]) == v else int(g.edge_v[e])
        nodes.append(v)
    return Path(tuple(reversed(nodes)), tuple(reversed(edges)))


def distances_from(g: MetricMeasureGraph, x: int | Iterable[int], w=None) -> np.ndarray:
    """Distances from a node, or from the nearest of several nodes."""
    srcs = [int(x)] if isinstance(x, (int, np.integer)) else sorted(int(v) for v in x)
    A = g.weight_matrix(weights_of(g, w))
    return _cs_dijkstra(A, directed=True, indices=srcs, min_only=True)


def graph_distance(g: MetricMeasureGraph, x: int, y: int, w=None) -> float:
    """Shortest-path distance between ``x`` and ``y`` under ``w`` (default lengths)."""
    for v in (x, y):
        if not 0 <= v < g.n_nodes:
            raise GraphError(f"node {v} not in graph")
    if x == y:
        return 0.0
    return float(distances_from(g, x, w)[y])


def shortest_path(g: MetricMeasureGraph, sources, targets, w=None) -> Path:
    dist, pred = dijkstra(g, sources, w, targets=targets)
    t = min(targets, key=lambda v: (dist[v], v))
    return path_to(g, pred, t)


def set_distance(g: MetricMeasureGraph, E, F, w=None) -> float:
    dist = distances_from(g, list(E), w)
    return float(min(dist[v] for v in F))


def distance_matrix(g: MetricMeasureGraph, nodes: Sequence[int], w=None) -> np.ndarray:
    """Pairwise shortest-path distances among ``nodes``."""
    nodes = [int(v) for v in nodes]
    if not nodes:
        return np.zeros((0, 0))
    D = _cs_dijkstra(g.weight_matrix(weights_of(g, w)), directed=True, indices=nodes)
    out = D[:, nodes]
    return np.minimum(out, out.T)


def ball(g: MetricMeasureGraph, x: int, r: float) -> frozenset[int]:
    """Open ball: nodes at distance strictly less than ``r``."""
    if r < 0:
        raise GraphError("radius must be >= 0")
    d = distances_from(g, x)
    return frozenset(np.flatnonzero(d < r).tolist())


def closed_ball(g: MetricMeasureGraph, x: int, r: float) -> frozenset[int]:
    if r < 0:
        raise GraphError("radius must be >= 0")
    d = distances_from(g, x)
    return frozenset(np.flatnonzero(d <= r).tolist())


def diameter(g: MetricMeasureGraph) -> float:
    """Exact for small graphs; double-sweep estimate otherwise."""
    if g.n_nodes <= 400:
        return float(max(distances_from(g, v).max() for v in range(g.n_nodes)))
    d0 = distances_from(g, 0)
    a = int(np.argmax(d0))
    da = distances_from(g, a)
    return float(da.max())


# -- generators ---------------------------------------------------------------

def _rect_grid(n: int, xs: np.ndarray, ys: np.ndarray, inside, area):
    """Nodes on the ``1/n`` lattice accepted by ``inside``; measures from ``area``.

    ``area(x0, x1, y0, y1)`` returns the measure of the region inside a box.
    Node measure is the area of its lattice cell, edge measure the area of the
    box spanned by the edge and half a step to either side.
    """
    h = 1.0 / n
    index = {}
    pos, node_mu = [], []
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            if inside(x, y):
                index[(i, j)] = len(pos)
                pos.append((x, y))
                node_mu.append(area(x - h / 2, x + h / 2, y - h / 2, y + h / 2))
    eu, ev, emu = [], [], []
    for (i, j), a in index.items():
        x, y = xs[i], ys[j]
        for di, dj in ((1, 0), (0, 1)):
            b = index.get((i + di, j + dj))
            if b is None or not inside((x + xs[i + di]) / 2, (y + ys[j + dj]) / 2):
                continue
            eu.append(a)
            ev.append(b)
            if di:
                emu.append(area(x, x + h, y - h / 2, y + h / 2))
            else:
                emu.append(area(x - h / 2, x + h / 2, y, y + h))
    return np.array(pos), np.array(node_mu), eu, ev, np.array(emu)


def grid_square(n: int) -> MetricMeasureGraph:
    """Unit square lattice with ``n`` subdivisions per side."""
    n = int(n)
    if n < 1:
        raise GraphError("n must be >= 1")

    def area(x0, x1, y0, y1):
        return max(0.0, min(x1, 1.0) - max(x0, 0.0)) * max(0.0, min(y1, 1.0) - max(y0, 0.0))

    pos, node_mu, eu, ev, emu = _rect_grid(n, np.arange(n + 1) / n, np.arange(n + 1) / n,
                                          lambda x, y: True, area)
    return MetricMeasureGraph(node_mu, eu, ev, np.full(len(eu), 1.0 / n), emu, pos,
                              {"generator": "grid_square", "n": n})


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _cusp_area(p: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of ``{|y| <= |x|^p, |x| <= 1}`` inside the box ``[x0,x1] x [y0,y1]``."""
    a, b = max(x0, -1.0), min(x1, 1.0)
    if b <= a:
        return 0.0
    cuts = {a, b}
    for c in (0.0, abs(y0) ** (1 / p), abs(y1) ** (1 / p)):
        for t in (c, -c):
            if a < t < b:
                cuts.add(t)
    pts = sorted(cuts)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        t = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
        half = np.abs(t) ** p
        width = np.clip(np.minimum(y1, half) - np.maximum(y0, -half), 0.0, None)
        total += 0.5 * (hi - lo) * float(_GL_W @ width)
    return total


def cusp_domain(p_exp: float, n: int) -> MetricMeasureGraph:
    """Lattice on ``{|y| <= |x|^p_exp, |x| <= 1}`` with spacing ``1/n``.

    Edges are kept only when they stay inside the region, so the two lobes
    meet only at the origin.  Node measures are lattice-cell areas clipped to
    the region, normalised so the total equals the exact region area
    ``4 / (p_exp + 1)``.
    """
    p, n = float(p_exp), int(n)
    if p < 1:
        raise GraphError("p_exp must be >= 1")
    if n < 4:
        raise GraphError("n must be >= 4 to connect the two lobes")
    eps = 1e-12

    def inside(x, y):
        return abs(y) <= abs(x) ** p + eps

    def area(x0, x1, y0, y1):
        return _cusp_area(p, x0, x1, y0, y1)

    ticks = np.arange(-n, n + 1) / n
    pos, node_mu, eu, ev, emu = _rect_grid(n, ticks, ticks, inside, area)
    node_mu = node_mu * (4.0 / (p + 1.0)) / node_mu.sum()
    try:
        return MetricMeasureGraph(node_mu, eu, ev, np.full(len(eu), 1.0 / n), emu, pos,
                                  {"generator": "cusp_domain", "p_exp": p, "n": n})
    except GraphError as exc:
        raise GraphError(f"cusp lattice at n={n} does not connect the lobes: {exc}") from exc


DEFAULT_SEGMENT = (0.25, 0.5, 0.75, 0.5)


NULL_SEGMENT_WEIGHT = 1e-9


def collapsed_disc(n: int, segment: Sequence[float] | None = None,
                   null_weight: float | None = NULL_SEGMENT_WEIGHT):
    """Unit-square lattice plus the image-length map of collapsing ``segment``.

    ``segment = (x0, y0, x1, y1)`` must be axis-aligned, strictly interior and
    on the lattice.  Returns ``(graph, EdgeLengthMap)``.

    With ``null_weight=None`` the graph is the flat lattice and lattice edges
    on the segment get image length 0.  That lattice edge also stands for a
    strip of positive area around the segment, so the collapsed set is not
    null at any finite resolution.  By default each segment edge therefore
    keeps its image length and gains a parallel twin of image length 0 and
    measure ``null_weight`` times its own: the segment itself, carrying
    vanishing measure.
    """
    n = int(n)
    x0, y0, x1, y1 = (float(t) for t in (segment or DEFAULT_SEGMENT))
    if x0 > x1 or y0 > y1:
        x0, y0, x1, y1 = x1, y1, x0, y0
    if not (x0 == x1 or y0 == y1) or (x0 == x1 and y0 == y1):
        raise GraphError("segment must be a non-degenerate axis-aligned segment")
    for t in (x0, y0, x1, y1):
        if not 0.0 < t < 1.0:
            raise GraphError("segment must lie strictly inside the unit square")
        if abs(t * n - round(t * n)) > 1e-9:
            raise GraphError(f"segment is not aligned with the lattice at n={n}")
    if null_weight is not None and not 0.0 < null_weight <= 1.0:
        raise GraphError("null_weight must lie in (0, 1]")
    base = grid_square(n)
    pu, pv = base.pos[base.edge_u], base.pos[base.edge_v]
    on = ((np.abs(pu[:, 0] - x0) < 1e-9) & (np.abs(pv[:, 0] - x0) < 1e-9)) if x0 == x1 \
        else ((np.abs(pu[:, 1] - y0) < 1e-9) & (np.abs(pv[:, 1] - y0) < 1e-9))
    lo = np.minimum(pu, pv)
    hi = np.maximum(pu, pv)
    if x0 == x1:
        on &= (lo[:, 1] >= y0 - 1e-9) & (hi[:, 1] <= y1 + 1e-9)
    else:
        on &= (lo[:, 0] >= x0 - 1e-9) & (hi[:, 0] <= x1 + 1e-9)
    recipe = {"generator": "collapsed_disc", "n": n, "segment": [x0, y0, x1, y1],
              "null_weight": null_weight}
    eu, ev, el, emu = base.edge_u, base.edge_v, base.edge_len, base.edge_mu
    if null_weight is None:
        values = np.where(on, 0.0, el)
    else:
        idx = np.flatnonzero(on)
        eu, ev = np.concatenate([eu, eu[idx]]), np.concatenate([ev, ev[idx]])
        el = np.concatenate([el, el[idx]])
        emu = np.concatenate([emu, null_weight * emu[idx]])
        values = np.concatenate([base.edge_len, np.zeros(len(idx))])
    g = MetricMeasureGraph(base.node_mu, eu, ev, el, emu, base.pos, recipe)
    # image of the collapse: segment points all go to the segment midpoint
    img = g.pos.copy()
    zero = values == 0.0
    on_node = np.zeros(g.n_nodes, dtype=bool)
    on_node[g.edge_u[zero]] = True
    on_node[g.edge_v[zero]] = True
    img[on_node] = ((x0 + x1) / 2, (y0 + y1) / 2)
    return g, EdgeLengthMap(values, lip_bound=1.0, target_pos=img)


def segment_edges(g: MetricMeasureGraph, lu: EdgeLengthMap) -> np.ndarray:
    """Edge ids whose image length vanishes."""
    return np.flatnonzero(lu.values == 0.0)


_GENERATORS = {
    "grid_square": lambda r: grid_square(r["n"]),
    "cusp_domain": lambda r: cusp_domain(r["p_exp"], r["n"]),
    "collapsed_disc": lambda r: collapsed_disc(r["n"], r.get("segment"),
                                                r.get("null_weight", NULL_SEGMENT_WEIGHT))[0],
}


def from_recipe(recipe: dict) -> MetricMeasureGraph:
    try:
        make = _GENERATORS[recipe["generator"]]
    except KeyError as exc:
        raise UnsupportedError(f"unknown generator recipe {recipe!r}") from exc
    return make(recipe)


def refine(g: MetricMeasureGraph) -> MetricMeasureGraph:
    """Rebuild ``g`` from its recipe at double resolution."""
    if not g.recipe:
        raise UnsupportedError("graph carries no construction recipe")
    recipe = dict(g.recipe)
    recipe["n"] = 2 * int(recipe["n"])
    return from_recipe(recipe)
