"""Nodes, links, topologies, priority queues and traffic generation."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .protocol import Priority
from .rng import Rng


class Disconnected(ValueError):
    pass


class BadSpec(ValueError):
    pass


class Role(enum.Enum):
    Sensor = "sensor"
    Sink = "sink"


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    base_loss: float = 0.0
    latency: int = 1
    capacity: int = 8

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise BadSpec(f"self-loop on node {self.a}")
        if not 0.0 <= self.base_loss <= 1.0:
            raise BadSpec("base_loss must be in [0, 1]")
        if self.latency < 1 or self.capacity < 1:
            raise BadSpec("latency and capacity must be >= 1")


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    sink: int = 0
    w: int = 0
    h: int = 0
    n: int = 0
    nodes: int = 0
    edges: tuple[tuple[int, int], ...] = ()


@dataclass(eq=False)
class Node:
    id: int
    role: Role
    capacity: int = 8
    key: int = 0
    compromised: bool = False
    rate_limit: int | None = None
    quarantined: bool = False
    queues: dict[int, deque] = field(default_factory=lambda: {Priority.Critical: deque(), Priority.Normal: deque()})
    outstanding: object = None
    reserved_in: int = 0
    # rate-limit accounting, per rate window
    rate_window: int = -1
    rate_sent: int = 0
    # occupancy integral for telemetry
    occ_area: int = 0
    occ_since: int = 0

    @property
    def queued(self) -> int:
        return len(self.queues[Priority.Critical]) + len(self.queues[Priority.Normal])

    @property
    def occupancy(self) -> int:
        return self.queued + (self.outstanding is not None) + self.reserved_in

    def note_occupancy(self, now: int) -> None:
        """Accumulate occupancy-time up to ``now``; call before any occupancy change."""
        if now > self.occ_since:
            self.occ_area += self.occupancy * (now - self.occ_since)
            self.occ_since = now

    def take_occupancy_area(self, now: int) -> int:
        self.note_occupancy(now)
        area, self.occ_area = self.occ_area, 0
        return area

    def may_emit(self, window: int) -> bool:
        """Rate-limit gate: consume one emission slot in ``window`` if allowed."""
        if self.rate_window != window:
            self.rate_window, self.rate_sent = window, 0
        if self.rate_limit is not None and self.rate_sent >= self.rate_limit:
            return False
        self.rate_sent += 1
        return True


@dataclass
class Topology:
    nodes: list[Node]
    links: dict[int, list[Link]]
    sink: int

    def neighbors(self, u: int) -> list[int]:
        return [l.b for l in self.links[u]]

    def link(self, a: int, b: int) -> Link:
        for l in self.links[a]:
            if l.b == b:
                return l
        raise KeyError((a, b))

    def edge_count(self) -> int:
        return sum(len(v) for v in self.links.values()) // 2


def _edges_for(spec: TopologySpec) -> tuple[int, list[tuple[int, int]]]:
    if spec.kind == "grid":
        if spec.w < 1 or spec.h < 1:
            raise BadSpec("grid needs w >= 1 and h >= 1")
        n = spec.w * spec.h
        edges = []
        for y in range(spec.h):
            for x in range(spec.w):
                i = y * spec.w + x
                if x + 1 < spec.w:
                    edges.append((i, i + 1))
                if y + 1 < spec.h:
                    edges.append((i, i + spec.w))
        return n, edges
    if spec.kind == "line":
        if spec.n < 1:
            raise BadSpec("line needs n >= 1")
        return spec.n, [(i, i + 1) for i in range(spec.n - 1)]
    if spec.kind == "explicit":
        if spec.nodes < 1:
            raise BadSpec("explicit topology needs nodes >= 1")
        edges = []
        for e in spec.edges:
            if len(e) != 2:
                raise BadSpec(f"edge {e!r} must have two endpoints")
            a, b = int(e[0]), int(e[1])
            if not (0 <= a < spec.nodes and 0 <= b < spec.nodes) or a == b:
                raise BadSpec(f"edge {e!r} is out of range or a self-loop")
            edges.append((a, b))
        return spec.nodes, edges
    raise BadSpec(f"unknown topology kind {spec.kind!r}")


def build_topology(
    spec: TopologySpec,
    base_loss: float = 0.0,
    latency: int = 1,
    capacity: int = 8,
) -> Topology:
    n, edges = _edges_for(spec)
    if not 0 <= spec.sink < n:
        raise BadSpec(f"sink {spec.sink} is not a node id (0..{n - 1})")
    links: dict[int, list[Link]] = {i: [] for i in range(n)}
    seen = set()
    for a, b in edges:
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        links[a].append(Link(a, b, base_loss, latency, capacity))
        links[b].append(Link(b, a, base_loss, latency, capacity))
    for u in links:
        links[u].sort(key=lambda l: l.b)
    nodes = [
        Node(i, Role.Sink if i == spec.sink else Role.Sensor, capacity=capacity)
        for i in range(n)
    ]
    topo = Topology(nodes, links, spec.sink)
    unreachable = sorted(set(range(n)) - reachable_from(topo, spec.sink))
    if unreachable:
        raise Disconnected(f"nodes {unreachable} cannot reach sink {spec.sink}")
    return topo


def reachable_from(topo: Topology, start: int, excluded: frozenset[int] = frozenset()) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in topo.neighbors(u):
            if v not in seen and v not in excluded:
                seen.add(v)
                stack.append(v)
    return seen


# -- channel -------------------------------------------------------------------


class Outcome(enum.Enum):
    DeliverAt = "deliver"
    LostLinkError = "link_error"
    DroppedQueueFull = "congestion"


class TxResult(NamedTuple):
    outcome: Outcome
    at: int = -1


def transmit(link: Link, now: int, rng: Rng, receiver: Node, final_hop: bool) -> TxResult:
    """Push one frame over ``link``.

    Loss is drawn first; otherwise the receiver must have a free slot unless
    it is the frame's destination (the sink consumes frames immediately).
    A successful transmission reserves the slot until arrival.
    """
    if rng.bernoulli(link.base_loss):
        return TxResult(Outcome.LostLinkError)
    if not final_hop:
        if receiver.occupancy >= receiver.capacity:
            return TxResult(Outcome.DroppedQueueFull)
        receiver.note_occupancy(now)
        receiver.reserved_in += 1
    return TxResult(Outcome.DeliverAt, now + link.latency)


def enqueue(node: Node, item, priority: int, now: int) -> bool:
    """Queue ``item`` for transmission; ``False`` if the node's buffer is full."""
    if node.occupancy >= node.capacity:
        return False
    node.note_occupancy(now)
    node.queues[priority].append(item)
    return True


def admit_reserved(node: Node, item, priority: int, now: int) -> None:
    """Move an arriving frame from its reserved slot into the queue."""
    node.note_occupancy(now)
    node.reserved_in -= 1
    node.queues[priority].append(item)


def release_reserved(node: Node, now: int) -> None:
    node.note_occupancy(now)
    node.reserved_in -= 1


def dequeue(node: Node, now: int):
    """Pop the next frame: all Critical frames before any Normal, FIFO within a class."""
    for prio in (Priority.Critical, Priority.Normal):
        q = node.queues[prio]
        if q:
            node.note_occupancy(now)
            return q.popleft()
    return None


def requeue_front(node: Node, item, priority: int, now: int) -> None:
    node.note_occupancy(now)
    node.queues[priority].appendleft(item)


# -- traffic -------------------------------------------------------------------


@dataclass(frozen=True)
class TrafficSpec:
    rate: int = 1
    period: int = 1
    payload_len: int = 16
    critical_fraction: float = 0.0


@dataclass(frozen=True)
class AppPacket:
    origin: int
    dest: int
    app_seq: int
    priority: int
    payload: bytes
    created_at: int


def generate_traffic(node_id: int, sink: int, cfg: TrafficSpec, rng: Rng, now: int, next_seq: int) -> list[AppPacket]:
    """Packets emitted by ``node_id`` on one TrafficTick."""
    out = []
    for k in range(cfg.rate):
        critical = rng.bernoulli(cfg.critical_fraction)
        payload = rng.bytes(cfg.payload_len)
        prio = Priority.Critical if critical else Priority.Normal
        out.append(AppPacket(node_id, sink, next_seq + k, prio, payload, now))
    return out
