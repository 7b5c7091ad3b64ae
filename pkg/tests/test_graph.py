import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modmetric.graph import (GraphError, MetricMeasureGraph, Path, UnsupportedError, ball,
                             closed_ball, collapsed_disc, cusp_domain, diameter, dijkstra,
                             distance_matrix, EdgeLengthMap,
                             graph_distance, grid_square, path_length, path_to, refine,
                             set_distance, weights_of)


def path3():
    return MetricMeasureGraph([1, 1, 1], [0, 1], [1, 2], [1.0, 2.0], [1.0, 1.0])


def test_rejects_bad_graphs():
    with pytest.raises(GraphError):
        MetricMeasureGraph([], [], [], [], [])
    with pytest.raises(GraphError):
        MetricMeasureGraph([1, 1], [0], [0], [1.0], [1.0])
    with pytest.raises(GraphError):
        MetricMeasureGraph([1, 1], [0], [1], [0.0], [1.0])
    with pytest.raises(GraphError):
        MetricMeasureGraph([1, 1], [0], [1], [1.0], [-1.0])
    with pytest.raises(GraphError, match="connected"):
        MetricMeasureGraph([1, 1, 1], [0], [1], [1.0], [1.0])
    with pytest.raises(GraphError):
        MetricMeasureGraph([1, 1], [0], [5], [1.0], [1.0])


def test_graph_is_immutable():
    g = path3()
    with pytest.raises(ValueError):
        g.edge_len[0] = 5.0


def test_distances_on_path():
    g = path3()
    assert graph_distance(g, 0, 2) == 3.0
    assert set_distance(g, {0}, {1, 2}) == 1.0
    assert diameter(g) == 3.0
    D = distance_matrix(g, [0, 1, 2])
    assert np.array_equal(D, [[0, 1, 3], [1, 0, 2], [3, 2, 0]])
    dist, pred = dijkstra(g, [0])
    pt = path_to(g, pred, 2)
    assert pt.nodes == (0, 1, 2) and path_length(g, pt) == 3.0


def test_parallel_edges_use_shortest():
    g = MetricMeasureGraph([1, 1], [0, 0], [1, 1], [3.0, 1.0], [1.0, 1.0])
    assert graph_distance(g, 0, 1) == 1.0
    assert Path.from_nodes(g, [0, 1]).edges == (1,)


def test_balls():
    g = path3()
    assert ball(g, 0, 1.0) == {0}
    assert closed_ball(g, 0, 1.0) == {0, 1}
    assert closed_ball(g, 1, 0.0) == {1}


def test_path_validation():
    with pytest.raises(GraphError):
        Path((0, 1), ())
    assert Path((3,)).is_simple()
    assert not Path((0, 1, 0), (0, 0)).is_simple()


def test_weights_of():
    g = path3()
    assert weights_of(g, None) is g.edge_len
    with pytest.raises(GraphError):
        weights_of(g, [1.0])
    with pytest.raises(GraphError):
        weights_of(g, EdgeLengthMap([5.0, 0.0], lip_bound=1.0))


def test_grid_square_counts_and_measure():
    g = grid_square(4)
    assert g.n_nodes == 25 and g.n_edges == 40
    assert math.isclose(g.total_measure, 1.0)
    assert np.allclose(g.edge_len, 0.25)
    # each edge owns the box it spans plus half a step to either side
    assert math.isclose(g.edge_mu.sum(), 2.0) and g.edge_mu.max() == pytest.approx(1 / 16)
    assert diameter(g) == pytest.approx(2.0)


def test_cusp_domain_lobes_meet_only_at_origin():
    g = cusp_domain(2, 8)
    assert math.isclose(g.total_measure, 4 / 3)
    origin = g.find_node(0.0, 0.0)
    left = set(np.flatnonzero(g.pos[:, 0] < 0))
    # removing the origin disconnects the lobes
    for e in range(g.n_edges):
        u, v = g.edge_u[e], g.edge_v[e]
        assert not ((u in left and g.pos[v, 0] > 0) or (v in left and g.pos[u, 0] > 0))
    assert origin is not None
    assert np.all(np.abs(g.pos[:, 1]) <= np.abs(g.pos[:, 0]) ** 2 + 1e-12)
    with pytest.raises(GraphError):
        cusp_domain(2, 2)


def test_collapsed_disc_models():
    g, lu = collapsed_disc(8)
    flat, lu_flat = collapsed_disc(8, null_weight=None)
    base = grid_square(8)
    seg = np.flatnonzero(lu.values == 0)
    assert len(seg) == 4 and g.n_edges == base.n_edges + 4
    assert np.allclose(g.edge_mu[seg], 1e-9 * base.edge_mu[seg - base.n_edges])
    assert flat.n_edges == base.n_edges and int((lu_flat.values == 0).sum()) == 4
    lu.check(g)
    mid = lu.target_pos[g.find_node(0.25, 0.5)]
    assert np.allclose(mid, (0.5, 0.5))
    with pytest.raises(GraphError):
        collapsed_disc(8, segment=(0.1, 0.5, 0.7, 0.5))
    with pytest.raises(GraphError):
        collapsed_disc(8, segment=(0.25, 0.25, 0.75, 0.75))


def test_refine_doubles_resolution():
    g = refine(grid_square(4))
    assert g.recipe["n"] == 8 and g.n_nodes == 81
    c = refine(cusp_domain(2, 8))
    assert c.recipe == {"generator": "cusp_domain", "p_exp": 2.0, "n": 16}
    d = refine(collapsed_disc(8)[0])
    assert d.recipe["n"] == 16
    with pytest.raises(UnsupportedError):
        refine(path3())


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.lists(st.floats(0.1, 5.0), min_size=20, max_size=20),
       st.integers(0, 10**6))
def test_graph_distance_is_a_metric(n, lens, seed):
    rng = np.random.default_rng(seed)
    g0 = grid_square(n)
    L = np.array([lens[i % 20] for i in range(g0.n_edges)])
    g = MetricMeasureGraph(g0.node_mu, g0.edge_u, g0.edge_v, L, g0.edge_mu)
    nodes = rng.choice(g.n_nodes, size=min(6, g.n_nodes), replace=False).tolist()
    D = distance_matrix(g, nodes)
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    for k in range(len(nodes)):
        assert np.all(D <= D[:, [k]] + D[[k], :] + 1e-12)
