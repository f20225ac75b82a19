"""Link-quality, congestion and trust-aware routing toward the sink.

Routes are computed centrally from the current view of every link:
``cost = 1/max(p, p_min) + beta*queue_frac + gamma*(1 - trust)``, with links
touching a quarantined node excluded, then Dijkstra from the sink with ties
broken toward the lower neighbour id.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace

from .net import Topology


@dataclass(frozen=True)
class RoutingParams:
    lam: float = 0.9
    beta: float = 2.0
    gamma: float = 10.0
    p_min: float = 0.05
    beacon_period: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must be in (0, 1)")
        if self.beta <= 0 or self.gamma <= 0 or self.p_min <= 0 or self.beacon_period < 1:
            raise ValueError("routing weights, p_min and beacon_period must be positive")


@dataclass(frozen=True)
class LinkQuality:
    p: float = 1.0
    lam: float = 0.9
    last_update: int = 0


@dataclass
class TrustRecord:
    trust: float = 1.0
    quarantined: bool = False
    since: int = 0


@dataclass
class RouteTable:
    next_hop: dict[int, int]
    cost: dict[int, float]
    computed_at: int
    unroutable: list[int] = field(default_factory=list)


def update_link_quality(lq: LinkQuality, success: bool, now: int | None = None) -> LinkQuality:
    p = lq.lam * lq.p + (1.0 - lq.lam) * (1.0 if success else 0.0)
    return replace(lq, p=min(1.0, max(0.0, p)), last_update=lq.last_update if now is None else now)


def link_cost(lq: LinkQuality, queue_frac: float, trust: TrustRecord, params: RoutingParams) -> float | None:
    """Cost of using a link, or ``None`` when the far endpoint is quarantined."""
    if trust.quarantined:
        return None
    return 1.0 / max(lq.p, params.p_min) + params.beta * queue_frac + params.gamma * (1.0 - trust.trust)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def compute_routes(n_nodes: int, costs: dict[tuple[int, int], float], sink: int, now: int = 0) -> RouteTable:
    """Shortest paths from every node to ``sink`` over directed ``(u, v)`` costs."""
    into: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n_nodes)}
    for (u, v), c in costs.items():
        if c < 0:
            raise ValueError("negative link cost")
        into[v].append((u, c))
    dist = {sink: 0.0}
    done = set()
    heap = [(0.0, sink)]
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for u, c in into[v]:
            nd = d + c
            if u not in dist or nd < dist[u] and not _close(nd, dist[u]):
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    out: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n_nodes)}
    for (u, v), c in costs.items():
        out[u].append((v, c))
    next_hop: dict[int, int] = {}
    for u in sorted(dist):
        if u == sink:
            continue
        best = None
        for v, c in sorted(out[u]):
            if v not in dist or dist[v] >= dist[u]:
                continue
            if _close(c + dist[v], dist[u]):
                best = v
                break
        if best is None:  # pragma: no cover - guarded by Dijkstra invariants
            raise AssertionError(f"no predecessor found for node {u}")
        next_hop[u] = best
    unroutable = [i for i in range(n_nodes) if i != sink and i not in next_hop]
    return RouteTable(next_hop, dist, now, unroutable)


def hop_counts(table: RouteTable, sink: int) -> dict[int, int]:
    """Number of hops from each routable node to the sink along ``next_hop``."""
    hops = {sink: 0}
    limit = len(table.next_hop) + 1
    for u in table.next_hop:
        path = []
        x = u
        while x not in hops:
            path.append(x)
            if len(path) > limit:
                raise ValueError("routing loop")
            x = table.next_hop[x]
        h = hops[x]
        for y in reversed(path):
            h += 1
            hops[y] = h
    return hops


class RoutingState:
    """Per-run routing view: link qualities, trust, and the current table."""

    def __init__(self, topo: Topology, params: RoutingParams) -> None:
        self.topo = topo
        self.params = params
        self.lq: dict[tuple[int, int], LinkQuality] = {
            (u, l.b): LinkQuality(1.0, params.lam, 0) for u in topo.links for l in topo.links[u]
        }
        self.trust: dict[int, TrustRecord] = {n.id: TrustRecord() for n in topo.nodes}
        self.table = RouteTable({}, {}, 0)

    def observe(self, u: int, v: int, success: bool, now: int) -> None:
        self.lq[(u, v)] = update_link_quality(self.lq[(u, v)], success, now)

    def quarantine(self, node: int, now: int) -> None:
        rec = self.trust[node]
        if not rec.quarantined:
            rec.quarantined, rec.since, rec.trust = True, now, 0.0

    def penalize(self, node: int, factor: float = 0.5) -> None:
        rec = self.trust[node]
        rec.trust = max(0.0, min(1.0, rec.trust * factor))

    def link_costs(self) -> dict[tuple[int, int], float]:
        costs = {}
        nodes = self.topo.nodes
        for (u, v), lq in self.lq.items():
            if self.trust[u].quarantined:
                continue
            recv = nodes[v]
            qf = 0.0 if v == self.topo.sink else min(1.0, recv.occupancy / recv.capacity)
            c = link_cost(lq, qf, self.trust[v], self.params)
            if c is not None:
                costs[(u, v)] = c
        return costs

    def on_beacon(self, now: int) -> RouteTable:
        self.table = compute_routes(len(self.topo.nodes), self.link_costs(), self.topo.sink, now)
        return self.table
