import json

import numpy as np
import pytest

from modmetric.graph import GraphError, collapsed_disc, cusp_domain, grid_square
from modmetric.io import (density_svg, graph_from_dict, graph_to_dict, graph_to_json, load_graph,
                          parse_generator)
from modmetric.nodesets import parse_node_set


def test_graph_json_roundtrip(tmp_path):
    g = cusp_domain(2, 8)
    path = tmp_path / "g.json"
    path.write_text(graph_to_json(g))
    h = load_graph(str(path))
    for name in ("node_mu", "edge_u", "edge_v", "edge_len", "edge_mu", "pos"):
        assert np.array_equal(getattr(g, name), getattr(h, name))
    assert h.recipe == g.recipe


def test_graph_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(GraphError, match="invalid JSON"):
        load_graph(str(bad))
    with pytest.raises(GraphError):
        load_graph(str(tmp_path / "missing.json"))
    doc = graph_to_dict(grid_square(2))
    del doc["edges"][0]["len"]
    with pytest.raises(GraphError, match="malformed"):
        graph_from_dict(doc)
    doc = graph_to_dict(grid_square(2))
    doc["nodes"][0]["id"] = 99
    with pytest.raises(GraphError):
        graph_from_dict(doc)


def test_generators():
    g, lu = parse_generator("grid_square:n=5")
    assert g.n_nodes == 36 and lu is None
    g, _ = parse_generator("cusp_domain:p_exp=2,n=8")
    assert g.recipe["p_exp"] == 2.0
    g, lu = parse_generator("collapsed_disc:n=8,null_weight=none")
    assert g.n_edges == grid_square(8).n_edges and lu is not None
    g, lu = parse_generator("collapsed_disc:n=8,segment=0.5;0.25;0.5;0.75")
    assert int((lu.values == 0).sum()) == 4
    for spec in ("grid_square:m=3", "nothing:n=3", "grid_square:n=x"):
        with pytest.raises(GraphError):
            parse_generator(spec)


def test_node_sets():
    g = grid_square(4)
    assert parse_node_set("ids:0,3", g) == {0, 3}
    assert parse_node_set("ball:x=0,r=0.3", g) == {0, 1, 5}
    assert parse_node_set("rect:0,0,0.25,0.25", g) == {0, 1, 5, 6}
    for spec in ("ids:99", "ball:x=0", "rect:1,2", "square:1", "0,1", "rect:2,2,3,3"):
        with pytest.raises(GraphError):
            parse_node_set(spec, g)


def test_density_svg():
    g = grid_square(3)
    svg = density_svg(g, np.linspace(0, 1, g.n_edges), "t")
    assert svg.startswith("<svg") and svg.count("<line") == g.n_edges
    assert svg.count("<rect") == 11
    bare = graph_from_dict({**graph_to_dict(g), "nodes": [
        {"id": i, "pos": None, "mu": 1.0} for i in range(g.n_nodes)]})
    with pytest.raises(GraphError):
        density_svg(bare, np.zeros(g.n_edges))
