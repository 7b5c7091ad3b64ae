"""Node-set descriptors: ``ids:1,2,3``, ``ball:x=ID,r=VAL``, ``rect:x0,y0,x1,y1``."""

from __future__ import annotations

import numpy as np

from .graph import GraphError, MetricMeasureGraph, ball


def parse_node_set(spec: str, g: MetricMeasureGraph) -> frozenset[int]:
    """Resolve a node-set spec against ``g``; raises :class:`GraphError` on bad input."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise GraphError(f"node set {spec!r} lacks a 'kind:' prefix")
    try:
        if kind == "ids":
            nodes = frozenset(int(t) for t in body.split(",") if t.strip())
            bad = [v for v in nodes if not 0 <= v < g.n_nodes]
            if bad:
                raise GraphError(f"node ids out of range: {sorted(bad)}")
        elif kind == "ball":
            kv = dict(item.split("=", 1) for item in body.split(","))
            x, r = int(kv["x"]), float(kv["r"])
            if not 0 <= x < g.n_nodes:
                raise GraphError(f"ball centre {x} out of range")
            nodes = ball(g, x, r)
        elif kind == "rect":
            x0, y0, x1, y1 = (float(t) for t in body.split(","))
            if g.pos is None:
                raise GraphError("rect node sets need node positions")
            P, eps = g.pos, 1e-9
            inside = ((P[:, 0] >= min(x0, x1) - eps) & (P[:, 0] <= max(x0, x1) + eps)
                      & (P[:, 1] >= min(y0, y1) - eps) & (P[:, 1] <= max(y0, y1) + eps))
            nodes = frozenset(np.flatnonzero(inside).tolist())
        else:
            raise GraphError(f"unknown node set kind {kind!r}")
    except (ValueError, KeyError) as exc:
        raise GraphError(f"malformed node set {spec!r}: {exc}") from exc
    if not nodes:
        raise GraphError(f"node set {spec!r} is empty")
    return nodes
