"""Pull-back metrics of edge-length maps and the induced quotient space.

Given the image lengths ``len_u(e)`` of a map ``u``, the essential pull-back
measures curves by ``sum len_u`` but ignores modulus-null subfamilies; the
path pull-back takes the plain infimum over all paths.  Points at essential
pull-back distance zero are identified in the quotient.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .essential import EssentialMetric, MetricMatrix, Params, essential_metric
from .graph import EdgeLengthMap, GraphError, MetricMeasureGraph, distance_matrix

log = logging.getLogger(__name__)


def pullback_essential_metric(g: MetricMeasureGraph, lu: EdgeLengthMap, p: float = 2.0,
                              nodes: Sequence[int] | None = None,
                              params: Params | None = None, jobs: int = 1) -> EssentialMetric:
    """Metrized essential lengths with curves measured by ``lu``."""
    lu.check(g)
    return essential_metric(g, p, nodes, params, w=lu, jobs=jobs)


def path_pullback_metric(g: MetricMeasureGraph, lu: EdgeLengthMap,
                         nodes: Sequence[int] | None = None) -> MetricMatrix:
    """Infimum of ``sum len_u`` over all paths (Dijkstra with ``lu`` weights)."""
    lu.check(g)
    nodes = list(range(g.n_nodes)) if nodes is None else [int(v) for v in nodes]
    return MetricMatrix(nodes, distance_matrix(g, nodes, lu.values))


# -- quotient ----------------------------------------------------------------------

@dataclass
class QuotientSpace:
    classes: list[list[int]]
    metric: MetricMatrix  # indexed by class number
    projection: dict[int, int]
    warnings: list[tuple[int, int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"classes": self.classes,
                "metric_csv": self.metric.to_csv(),
                "warnings": [list(t) for t in self.warnings]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def quotient_space(d: MetricMatrix, tol_quot: float = 0.0) -> QuotientSpace:
    """Identify nodes at distance ``<= tol_quot`` (single linkage).

    Chains that merge two nodes farther apart than ``tol_quot`` are reported
    as ``(x, z, y)`` triples in ``warnings``: ``x`` and ``y`` share a class
    only through ``z``.
    """
    if tol_quot < 0:
        raise ValueError("tol_quot must be >= 0")
    D, nodes = d.values, d.nodes
    ds = DisjointSet(range(len(nodes)))
    close = D <= tol_quot
    for i, j in zip(*np.nonzero(np.triu(close, 1))):
        ds.merge(int(i), int(j))
    groups = sorted((sorted(s) for s in ds.subsets()), key=lambda s: s[0])
    warnings = []
    for members in groups:
        for a in members:
            for b in members:
                if a < b and D[a, b] > tol_quot:
                    via = next(k for k in members if close[a, k] and k != a)
                    warnings.append((nodes[a], nodes[via], nodes[b]))
                    log.warning("quotient class chains %d and %d (distance %.3g) via %d",
                                nodes[a], nodes[b], D[a, b], nodes[via])
    k = len(groups)
    M = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            M[i, j] = M[j, i] = D[np.ix_(groups[i], groups[j])].min()
    projection = {nodes[a]: c for c, members in enumerate(groups) for a in members}
    classes = [[nodes[a] for a in members] for members in groups]
    return QuotientSpace(classes, MetricMatrix(list(range(k)), M), projection, warnings)


# -- factorization ----------------------------------------------------------------

@dataclass
class FactorizationReport:
    max_violation: float
    worst_pair: tuple[int, int] | None
    min_slack: float  # smallest d_u - target over pairs, negative iff violated
    passed: bool

    def to_dict(self) -> dict:
        return {"max_violation": self.max_violation,
                "worst_pair": None if self.worst_pair is None else list(self.worst_pair),
                "min_slack": self.min_slack, "passed": self.passed}


def factorization_check(target: MetricMatrix, d_u: MetricMatrix,
                        tol: float = 1e-9) -> FactorizationReport:
    """Check ``target(x, y) <= d_u(x, y) + tol`` on all sampled pairs.

    ``target`` holds image distances ``d(u(x), u(y))``; passing means the
    induced map on the quotient is 1-Lipschitz.
    """
    if target.nodes != d_u.nodes:
        raise GraphError("target and d_u must be indexed by the same nodes")
    diff = target.values - d_u.values
    iu = np.triu_indices(len(diff), 1)
    if not len(iu[0]):
        return FactorizationReport(0.0, None, 0.0, True)
    vals = diff[iu]
    k = int(np.argmax(vals))
    worst = (target.nodes[iu[0][k]], target.nodes[iu[1][k]])
    viol = max(0.0, float(vals[k]))
    return FactorizationReport(viol, worst if viol > 0 else None, float(-vals.max()),
                               viol <= tol)


def image_metric(lu: EdgeLengthMap, nodes: Sequence[int]) -> MetricMatrix:
    """Euclidean distances between the recorded images of ``nodes``."""
    if lu.target_pos is None:
        raise GraphError("edge length map has no target positions")
    P = lu.target_pos[list(nodes)]
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
    return MetricMatrix(list(nodes), D)


# -- serialization ----------------------------------------------------------------

def edge_length_map_to_json(lu: EdgeLengthMap) -> str:
    doc = {"edges": [{"edge": e, "len_u": float(v)} for e, v in enumerate(lu.values)],
           "lip_bound": lu.lip_bound}
    return json.dumps(doc, indent=2)


def edge_length_map_from_json(text: str, g: MetricMeasureGraph) -> EdgeLengthMap:
    try:
        doc = json.loads(text)
        values = np.full(g.n_edges, np.nan)
        for item in doc["edges"]:
            values[int(item["edge"])] = float(item["len_u"])
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise GraphError(f"malformed edge length map: {exc}") from exc
    if np.isnan(values).any():
        raise GraphError("edge length map does not cover every edge")
    lu = EdgeLengthMap(values, doc.get("lip_bound"))
    lu.check(g)
    return lu


__all__ = ["FactorizationReport", "QuotientSpace", "edge_length_map_from_json",
           "edge_length_map_to_json", "factorization_check", "image_metric",
           "path_pullback_metric", "pullback_essential_metric", "quotient_space"]
