from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from wsnguard.net import TopologySpec, build_topology
from wsnguard.routing import (
    LinkQuality, RoutingParams, RoutingState, TrustRecord, compute_routes, hop_counts, link_cost,
    update_link_quality,
)

from .oracles import bfs_distances


@st.composite
def connected_graphs(draw, max_nodes=36):
    n = draw(st.integers(2, max_nodes))
    seed = draw(st.integers(0, 2**32))
    r = random.Random(seed)
    edges = set()
    for v in range(1, n):  # random spanning tree keeps it connected
        u = r.randrange(v)
        edges.add((u, v))
    for _ in range(draw(st.integers(0, 2 * n))):
        a, b = r.randrange(n), r.randrange(n)
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return n, sorted(edges), draw(st.integers(0, n - 1))


def _unit_costs(edges):
    costs = {}
    for a, b in edges:
        costs[(a, b)] = 1.0
        costs[(b, a)] = 1.0
    return costs


@given(g=connected_graphs())
def test_unit_cost_hops_equal_bfs(g):
    n, edges, sink = g
    table = compute_routes(n, _unit_costs(edges), sink)
    assert hop_counts(table, sink) == bfs_distances(n, edges, sink)
    assert table.unroutable == []


@given(g=connected_graphs())
def test_next_hop_is_lowest_id_on_a_shortest_path(g):
    n, edges, sink = g
    dist = bfs_distances(n, edges, sink)
    table = compute_routes(n, _unit_costs(edges), sink)
    nbrs = {i: set() for i in range(n)}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    for u, v in table.next_hop.items():
        assert v == min(x for x in nbrs[u] if dist[x] == dist[u] - 1)


def test_grid_routes_toward_corner_sink():
    t = build_topology(TopologySpec("grid", sink=0, w=5, h=4), 0.0, 1, 8)
    rs = RoutingState(t, RoutingParams())
    table = rs.on_beacon(0)
    assert table.next_hop[6] == 1  # tie between 1 and 5 goes to the lower id
    assert hop_counts(table, 0)[19] == 7


def test_quarantine_removes_node_from_paths():
    t = build_topology(TopologySpec("grid", sink=0, w=5, h=4), 0.0, 1, 8)
    rs = RoutingState(t, RoutingParams())
    rs.quarantine(1, 10)
    table = rs.on_beacon(10)
    assert 1 not in table.next_hop.values()
    assert 1 in table.unroutable
    assert table.next_hop[6] == 5


def test_cut_vertex_quarantine_leaves_unroutable():
    t = build_topology(TopologySpec("line", sink=0, n=4), 0.0, 1, 8)
    rs = RoutingState(t, RoutingParams())
    rs.quarantine(1, 0)
    table = rs.on_beacon(0)
    assert table.next_hop == {}
    assert sorted(table.unroutable) == [1, 2, 3]


def test_link_cost_formula():
    p = RoutingParams(beta=2.0, gamma=10.0, p_min=0.05)
    assert link_cost(LinkQuality(0.5), 0.25, TrustRecord(0.8), p) == pytest.approx(2.0 + 0.5 + 2.0)
    assert link_cost(LinkQuality(0.0), 0.0, TrustRecord(), p) == pytest.approx(20.0)
    assert link_cost(LinkQuality(1.0), 0.0, TrustRecord(quarantined=True), p) is None


@given(outcomes=st.lists(st.booleans(), max_size=50))
def test_link_quality_ewma_bounded(outcomes):
    lq = LinkQuality(1.0, 0.9)
    expect = 1.0
    for ok in outcomes:
        lq = update_link_quality(lq, ok)
        expect = 0.9 * expect + 0.1 * (1.0 if ok else 0.0)
        assert 0.0 <= lq.p <= 1.0
    assert lq.p == pytest.approx(expect)


def test_trust_penalty_diverts_traffic():
    t = build_topology(TopologySpec("grid", sink=0, w=3, h=3), 0.0, 1, 8)
    rs = RoutingState(t, RoutingParams())
    assert rs.on_beacon(0).next_hop[4] == 1
    rs.penalize(1)
    assert rs.on_beacon(0).next_hop[4] == 3


@pytest.mark.parametrize("kw", [dict(lam=1.0), dict(beta=0.0), dict(p_min=0.0), dict(beacon_period=0)])
def test_routing_params_validation(kw):
    with pytest.raises(ValueError):
        RoutingParams(**kw)


def test_negative_cost_rejected():
    with pytest.raises(ValueError):
        compute_routes(2, {(1, 0): -1.0}, 0)
