import json

import numpy as np
import pytest

from modmetric.essential import MetricMatrix, Params
from modmetric.graph import EdgeLengthMap, GraphError, MetricMeasureGraph, collapsed_disc, grid_square
from modmetric.pullback import (edge_length_map_from_json, edge_length_map_to_json,
                                factorization_check, image_metric, path_pullback_metric,
                                pullback_essential_metric, quotient_space)


def test_identity_pullback_is_graph_metric():
    g = grid_square(4)
    nodes = [0, 6, 18, 24]
    em = pullback_essential_metric(g, EdgeLengthMap.identity(g), 2.0, nodes)
    pm = path_pullback_metric(g, EdgeLengthMap.identity(g), nodes)
    assert np.allclose(em.metric.values, pm.values)


def test_small_collapsed_disc_orders():
    g, lu = collapsed_disc(8)
    a, b = g.find_node(0.25, 0.5), g.find_node(0.75, 0.5)
    c, d = g.find_node(0.125, 0.5), g.find_node(0.875, 0.5)
    nodes = [a, b, c, d]
    pm = path_pullback_metric(g, lu, nodes)
    em = pullback_essential_metric(g, lu, 2.0, nodes, Params(eps_mod=1e-6))
    assert pm[a, b] == 0.0
    assert pm[c, d] == pytest.approx(0.25)
    # the null segment does not shorten the essential distance
    assert em.metric[a, b] == pytest.approx(0.5, abs=2e-3)
    assert np.all(pm.values <= em.metric.values + 1e-12)


def test_lipschitz_bound_enforced():
    g = grid_square(2)
    with pytest.raises(GraphError):
        path_pullback_metric(g, EdgeLengthMap(2 * g.edge_len, lip_bound=1.0))
    with pytest.raises(GraphError):
        path_pullback_metric(g, EdgeLengthMap(np.ones(3)))


def test_quotient_space():
    D = np.array([[0, 0, 0.5, 1], [0, 0, 0.5, 1], [0.5, 0.5, 0, 0.5], [1, 1, 0.5, 0]])
    q = quotient_space(MetricMatrix([10, 11, 12, 13], D))
    assert q.classes == [[10, 11], [12], [13]]
    assert q.projection == {10: 0, 11: 0, 12: 1, 13: 2}
    assert np.array_equal(q.metric.values, [[0, 0.5, 1], [0.5, 0, 0.5], [1, 0.5, 0]])
    assert not q.warnings
    json.loads(q.to_json())


def test_quotient_chain_warning(caplog):
    D = np.array([[0, 0.1, 0.2], [0.1, 0, 0.1], [0.2, 0.1, 0]])
    q = quotient_space(MetricMatrix([0, 1, 2], D), tol_quot=0.15)
    assert q.classes == [[0, 1, 2]]
    assert q.warnings == [(0, 1, 2)]
    with pytest.raises(ValueError):
        quotient_space(MetricMatrix([0], np.zeros((1, 1))), -1.0)


def test_factorization_check():
    a = MetricMatrix([0, 1], np.array([[0, 1.0], [1.0, 0]]))
    b = MetricMatrix([0, 1], np.array([[0, 0.5], [0.5, 0]]))
    assert factorization_check(b, a).passed
    bad = factorization_check(a, b)
    assert not bad.passed and bad.worst_pair == (0, 1) and bad.max_violation == 0.5
    with pytest.raises(GraphError):
        factorization_check(a, MetricMatrix([0, 2], a.values))


def test_image_metric_of_collapse():
    g, lu = collapsed_disc(8)
    a, b = g.find_node(0.25, 0.5), g.find_node(0.75, 0.5)
    assert image_metric(lu, [a, b])[a, b] == 0.0


def test_edge_length_map_json_roundtrip():
    g, lu = collapsed_disc(4)
    back = edge_length_map_from_json(edge_length_map_to_json(lu), g)
    assert np.array_equal(back.values, lu.values) and back.lip_bound == 1.0
    with pytest.raises(GraphError):
        edge_length_map_from_json('{"edges": []}', g)
    with pytest.raises(GraphError):
        edge_length_map_from_json("not json", g)
