import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modmetric.essential import (MetricMatrix, NoConnectionError, Params, essential_length,
                                 essential_metric, essential_metric_infty, essential_predistance,
                                 graph_metric, metrize, predistance_matrix)
from modmetric.graph import GraphError, MetricMeasureGraph, graph_distance, grid_square

from oracles import brute_force_chains


def twin(mu_null=1e-12):
    """Two parallel unit edges; the second is nearly null and has zero weight."""
    return MetricMeasureGraph([1, 1], [0, 0], [1, 1], [1.0, 1.0], [1.0, mu_null])


def test_null_shortcut_is_ignored():
    g = twin()
    res = essential_length(g, [1.0, 0.0], {0}, {1}, 2.0, Params(tol_lam=1e-4))
    assert res.lo < 1.0 <= res.hi <= 1.0 + 1e-4
    assert res.mod_hi >= res.threshold > res.mod_lo


def test_heavy_shortcut_counts():
    g = twin(mu_null=1.0)
    res = essential_length(g, [1.0, 0.0], {0}, {1}, 2.0)
    assert res.value == 0.0 and res.probes == 1


def test_single_path_equals_length():
    g = MetricMeasureGraph(np.ones(4), [0, 1, 2], [1, 2, 3], [0.5, 1.0, 2.0], [1.0, 1.0, 1.0])
    assert essential_length(g, None, {0}, {3}).value == 3.5
    assert essential_predistance(g, None, 0, 3).value == 3.5


def test_grid_corners_equal_graph_distance():
    g = grid_square(6)
    for p in (1.0, 2.0, 4.0, math.inf):
        assert essential_length(g, None, {0}, {48}, p).value == pytest.approx(2.0)
    assert essential_metric_infty(g, 0, 48) == pytest.approx(2.0)


def test_input_errors():
    g = grid_square(3)
    with pytest.raises(GraphError):
        essential_length(g, None, {0}, {0, 1})
    with pytest.raises(GraphError):
        essential_length(g, None, set(), {1})
    with pytest.raises(GraphError):
        essential_predistance(g, None, 2, 2)
    with pytest.raises(NoConnectionError):
        essential_length(g, None, {0}, {15}, 2.0, Params(eps_mod=1e6))
    with pytest.raises(ValueError):
        Params(tol_lam=-1.0).resolved(g, 2.0)


def test_delta_schedule_profile():
    g = grid_square(4)
    pre = essential_predistance(g, None, 0, 24, 2.0, Params(delta_schedule=(0.0, 0.25, 0.5)))
    deltas = [d for d, _ in pre.profile]
    assert deltas == [0.5, 0.25, 0.0]
    vals = [v for _, v in pre.profile]
    assert vals == sorted(vals) and pre.value == pytest.approx(2.0)
    assert vals[0] == pytest.approx(1.0)


def test_metrize_small_cases():
    pre = np.array([[0, 5, 1], [5, 0, 1], [1, 1, 0]], float)
    assert np.array_equal(metrize(pre), [[0, 2, 1], [2, 0, 1], [1, 1, 0]])
    inf = np.array([[0, math.inf, 1], [math.inf, 0, 2], [1, 2, 0]])
    assert metrize(inf)[0, 1] == 3
    with pytest.raises(ValueError):
        metrize(np.array([[0, 1], [2, 0]], float))
    with pytest.raises(ValueError):
        metrize(np.array([[0, -1], [-1, 0]], float))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 10**6))
def test_metrize_matches_chain_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, 20, (n, n)).astype(float)
    pre = np.triu(A, 1) + np.triu(A, 1).T
    D = metrize(pre)
    assert np.array_equal(D, brute_force_chains(pre))
    assert np.array_equal(metrize(D), D)
    assert np.all(D <= pre)


def test_metric_matrix_roundtrip_and_axioms():
    M = MetricMatrix([3, 5, 9], np.array([[0, 0.1, 0.5], [0.1, 0, 0.3], [0.5, 0.3, 0]]))
    back = MetricMatrix.from_csv(M.to_csv())
    assert back.nodes == M.nodes and np.array_equal(back.values, M.values)
    assert M[5, 9] == 0.3
    viol = M.axiom_violations()
    assert not viol["ok"] and viol["triangle"] == pytest.approx(0.1)
    fixed = MetricMatrix(M.nodes, metrize(M.values))
    assert fixed.axiom_violations()["ok"]


def test_parallel_matches_serial():
    g = grid_square(4)
    nodes = [0, 7, 12, 24]
    a, _ = predistance_matrix(g, None, nodes, 2.0, jobs=1)
    b, _ = predistance_matrix(g, None, nodes, 2.0, jobs=2)
    assert np.array_equal(a, b)


def test_essential_metric_on_grid():
    g = grid_square(5)
    nodes = [0, 8, 17, 35]
    em = essential_metric(g, 2.0, nodes)
    d = graph_metric(g, nodes)
    assert np.allclose(em.metric.values, d.values)
    assert em.discrepancy == 0.0
    assert em.metric.axiom_violations()["ok"]
    with pytest.raises(GraphError):
        predistance_matrix(g, None, [0, 0])
