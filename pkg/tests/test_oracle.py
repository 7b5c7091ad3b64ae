import math

import networkx as nx
import numpy as np
import pytest

from modmetric.graph import MetricMeasureGraph, distance_matrix, grid_square
from modmetric.modulus import FamilySpec
from modmetric.oracle import FamilyOracle, separation_oracle

from oracles import brute_force_family, random_connected, unit_graph


def rho_length(g, pt, rho):
    return float(sum(rho[e] * g.edge_len[e] for e in pt.edges))


def brute_min(g, fam, rho, dist):
    paths = brute_force_family(g, fam.sources, fam.targets, fam.cap_weights, fam.cap_value,
                               fam.cap_factor, dist)
    return min((sum(rho[e] * g.edge_len[e] for e in pt) for pt in paths), default=None)


@pytest.mark.parametrize("seed", range(15))
def test_capped_oracle_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    G = random_connected(7, rng, 0.45)
    g0 = unit_graph(G)
    g = MetricMeasureGraph(g0.node_mu, g0.edge_u, g0.edge_v, rng.uniform(0.5, 2, g0.n_edges),
                           g0.edge_mu)
    rho = rng.uniform(0, 1, g.n_edges)
    dist = distance_matrix(g, range(g.n_nodes))
    E, F = {0}, {g.n_nodes - 1, g.n_nodes - 2}
    for fam in (FamilySpec(E, F),
                FamilySpec(E, F, cap_value=float(rng.uniform(2, 5))),
                FamilySpec(E, F, cap_factor=1.3),
                FamilySpec(E, F, cap_weights=rng.uniform(0, 2, g.n_edges), cap_value=2.0)):
        want = brute_min(g, fam, rho, dist)
        got = separation_oracle(g, rho, fam)
        if want is None:
            assert got is None
            continue
        assert got is not None and got.is_simple()
        assert got.start in E and got.end in F
        assert math.isclose(rho_length(g, got, rho), want, rel_tol=1e-12, abs_tol=1e-12)


def test_empty_family_detected():
    g = grid_square(3)
    fam = FamilySpec({0}, {15}, cap_value=0.5)
    assert FamilyOracle(g, fam).is_empty()
    assert separation_oracle(g, np.zeros(g.n_edges), fam) is None


def test_overlapping_sets_give_constant_path():
    g = grid_square(2)
    oracle = FamilyOracle(g, FamilySpec({0, 1}, {1, 2}))
    assert oracle.common == [1]
