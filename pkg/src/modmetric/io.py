"""Graph JSON files, generator specs, and SVG density plots."""

from __future__ import annotations

import json
import math
from pathlib import Path as FsPath

import numpy as np

from .graph import (GraphError, MetricMeasureGraph, collapsed_disc, cusp_domain, grid_square)


def graph_to_dict(g: MetricMeasureGraph) -> dict:
    pos = g.pos
    nodes = [{"id": i, "pos": None if pos is None else [float(pos[i, 0]), float(pos[i, 1])],
              "mu": float(g.node_mu[i])} for i in range(g.n_nodes)]
    edges = [{"u": int(g.edge_u[e]), "v": int(g.edge_v[e]), "len": float(g.edge_len[e]),
              "mu": float(g.edge_mu[e])} for e in range(g.n_edges)]
    return {"nodes": nodes, "edges": edges, "recipe": g.recipe}


def graph_to_json(g: MetricMeasureGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=1)


def graph_from_dict(doc: dict) -> MetricMeasureGraph:
    try:
        nodes = sorted(doc["nodes"], key=lambda d: int(d["id"]))
        if [int(d["id"]) for d in nodes] != list(range(len(nodes))):
            raise GraphError("node ids must be 0..N-1")
        has_pos = all(d.get("pos") is not None for d in nodes)
        pos = np.array([d["pos"] for d in nodes], dtype=float) if has_pos and nodes else None
        edges = doc["edges"]
        return MetricMeasureGraph(
            [float(d["mu"]) for d in nodes],
            [int(e["u"]) for e in edges], [int(e["v"]) for e in edges],
            [float(e["len"]) for e in edges], [float(e["mu"]) for e in edges],
            pos, doc.get("recipe"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"malformed graph document: {exc!r}") from exc


def load_graph(path: str) -> MetricMeasureGraph:
    try:
        doc = json.loads(FsPath(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                         f"{exc.msg}") from exc
    except OSError as exc:
        raise GraphError(f"{path}: {exc.strerror}") from exc
    return graph_from_dict(doc)


def parse_generator(spec: str):
    """``grid_square:n=8``, ``cusp_domain:p_exp=2,n=16``, ``collapsed_disc:n=64``.

    Returns ``(graph, edge_length_map_or_None)``.
    """
    name, _, body = spec.partition(":")
    try:
        kw = {k.strip(): v.strip() for k, v in (item.split("=", 1) for item in body.split(",")
                                                 if item.strip())}
        if name == "grid_square":
            return grid_square(int(kw["n"])), None
        if name == "cusp_domain":
            return cusp_domain(float(kw["p_exp"]), int(kw["n"])), None
        if name == "collapsed_disc":
            seg = [float(t) for t in kw["segment"].split(";")] if "segment" in kw else None
            nw = kw.get("null_weight")
            null_weight = None if nw == "none" else (float(nw) if nw else 1e-9)
            return collapsed_disc(int(kw["n"]), seg, null_weight)
    except (KeyError, ValueError) as exc:
        raise GraphError(f"bad generator spec {spec!r}: {exc}") from exc
    raise GraphError(f"unknown generator {name!r}")


def density_svg(g: MetricMeasureGraph, rho: np.ndarray, title: str = "") -> str:
    """Edges coloured by ``rho`` on a linear scale, with a legend."""
    if g.pos is None:
        raise GraphError("SVG output needs node positions")
    size, pad = 480.0, 30.0
    lo, hi = g.pos.min(axis=0), g.pos.max(axis=0)
    scale = size / max(float((hi - lo).max()), 1e-12)

    def xy(v):
        x, y = g.pos[v]
        return pad + (x - lo[0]) * scale, pad + size - (y - lo[1]) * scale

    top = float(np.max(rho)) if len(rho) else 0.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 2 * pad + 90:.0f}" '
             f'height="{size + 2 * pad:.0f}">',
             f'<text x="{pad}" y="18" font-size="13">{title}</text>']
    for e in np.argsort(rho, kind="stable"):
        t = float(rho[e]) / top if top > 0 else 0.0
        (x1, y1), (x2, y2) = xy(g.edge_u[e]), xy(g.edge_v[e])
        parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                     f'stroke="{_colour(t)}" stroke-width="{1 + 2 * t:.2f}"/>')
    lx = size + 2 * pad + 10
    for k in range(11):
        t = 1 - k / 10
        parts.append(f'<rect x="{lx}" y="{pad + k * 20}" width="18" height="20" '
                     f'fill="{_colour(t)}"/>')
        parts.append(f'<text x="{lx + 22}" y="{pad + k * 20 + 14}" font-size="10">'
                     f'{t * top:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _colour(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    r, g, b = int(40 + 215 * t), int(60 + 100 * (1 - abs(2 * t - 1))), int(200 * (1 - t) + 30)
    return f"#{r:02x}{g:02x}{b:02x}"


def finite_or_none(x: float):
    return None if x is None or math.isinf(x) or math.isnan(x) else float(x)
