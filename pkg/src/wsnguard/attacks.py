"""Scripted adversaries and their ground truth.

The attacker is an insider: it holds its own key and can frame and seal its
own traffic, but it cannot produce tags under any other node's key.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .net import BadSpec
from .protocol import WirePacket, reframe
from .rng import Rng


class AttackKind(enum.IntEnum):
    Flood = 1
    Blackhole = 2
    Tamper = 3


class Selective(enum.Enum):
    All = "all"
    DataOnly = "data_only"


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    attacker: int
    start: int
    end: int
    victim: int | None = None
    flood_rate: int = 0
    drop_prob: float = 1.0
    selective: Selective = Selective.All
    flip_prob: float = 1.0

    def validate(self, sink: int, n_nodes: int) -> None:
        if self.start >= self.end:
            raise BadSpec(f"attack start {self.start} must be < end {self.end}")
        if not 0 <= self.attacker < n_nodes:
            raise BadSpec(f"attacker {self.attacker} is not a node")
        if self.attacker == sink:
            raise BadSpec("the sink cannot be an attacker")
        if self.victim is not None and not 0 <= self.victim < n_nodes:
            raise BadSpec(f"victim {self.victim} is not a node")
        if self.flood_rate < 0:
            raise BadSpec("flood_rate must be >= 0")
        for name in ("drop_prob", "flip_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise BadSpec(f"{name} must be in [0, 1]")

    def active_at(self, t: int) -> bool:
        return self.start <= t < self.end


def validate_attacks(specs: list[AttackSpec], sink: int, n_nodes: int) -> None:
    """Per-spec checks plus the one-attack-per-node-at-a-time restriction."""
    for s in specs:
        s.validate(sink, n_nodes)
    by_node: dict[int, list[AttackSpec]] = {}
    for s in specs:
        by_node.setdefault(s.attacker, []).append(s)
    for node, lst in by_node.items():
        lst = sorted(lst, key=lambda s: s.start)
        for a, b in zip(lst, lst[1:]):
            if b.start < a.end:
                raise BadSpec(f"overlapping attacks on node {node}")


@dataclass(frozen=True)
class Interval:
    node: int
    kind: AttackKind
    start: int
    end: int


@dataclass(frozen=True)
class GroundTruth:
    intervals: tuple[Interval, ...] = ()

    def attacked(self, node: int, t0: int, t1: int) -> bool:
        """True if ``node`` is under attack at any point of ``[t0, t1)``."""
        return any(i.node == node and i.start < t1 and t0 < i.end for i in self.intervals)


def ground_truth(attacks: list[AttackSpec]) -> GroundTruth:
    return GroundTruth(tuple(Interval(a.attacker, a.kind, a.start, a.end) for a in attacks))


class ActiveAttack:
    """Behaviour override installed on the attacker between start and end."""

    def __init__(self, spec: AttackSpec, rng: Rng) -> None:
        self.spec = spec
        self.rng = rng


def activate(spec: AttackSpec, now: int, rng: Rng) -> ActiveAttack:
    if now != spec.start:
        raise ValueError(f"attack on node {spec.attacker} activated at {now}, expected {spec.start}")
    return ActiveAttack(spec, rng)


def flood_behavior(flood_rate: int, rng: Rng, payload_len: int) -> list[bytes]:
    """Payloads the flooder injects this tick."""
    return [rng.bytes(payload_len) for _ in range(flood_rate)]


def blackhole_behavior(is_data: bool, drop_prob: float, selective: Selective, rng: Rng) -> bool:
    """``True`` if the frame should be silently dropped."""
    if selective is Selective.DataOnly and not is_data:
        return False
    return rng.bernoulli(drop_prob)


def tamper_behavior(w: WirePacket, flip_prob: float, rng: Rng) -> tuple[WirePacket, int | None]:
    """Maybe flip one ciphertext bit; the CRC is recomputed, the tag cannot be."""
    if not rng.bernoulli(flip_prob) or not w.ciphertext:
        return w, None
    bit = rng.below(len(w.ciphertext) * 8)
    ct = bytearray(w.ciphertext)
    ct[bit >> 3] ^= 1 << (bit & 7)
    return reframe(replace(w, ciphertext=bytes(ct))), bit
