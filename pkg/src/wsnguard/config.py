"""Scenario files: strict JSON parsing into a validated :class:`ScenarioConfig`."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .attacks import AttackKind, AttackSpec, Selective, validate_attacks
from .ci import DetectorParams
from .net import BadSpec, Disconnected, TopologySpec, TrafficSpec, _edges_for, build_topology
from .routing import RoutingParams

TOP_LEVEL_KEYS = (
    "name", "duration", "seed", "ci_enabled", "topology", "traffic",
    "link", "protocol", "routing", "detector", "attacks", "analytics",
)


class ConfigError(ValueError):
    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


@dataclass(frozen=True)
class LinkDefaults:
    base_loss: float = 0.0
    latency: int = 1
    capacity: int = 8


@dataclass(frozen=True)
class ProtocolParams:
    retry_limit: int = 3
    ack_timeout: int = 4
    payload_max: int = 64
    ttl: int = 32


@dataclass(frozen=True)
class AnalyticsParams:
    rho: float = 0.9
    t_mit: int = 200
    grace: int = 50
    trailing_window: int = 100


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration: int
    topology: TopologySpec
    seed: int = 1
    ci_enabled: bool = True
    traffic: TrafficSpec = field(default_factory=lambda: TrafficSpec(period=50))
    link: LinkDefaults = LinkDefaults()
    protocol: ProtocolParams = ProtocolParams()
    routing: RoutingParams = RoutingParams()
    detector: DetectorParams = DetectorParams()
    attacks: tuple[AttackSpec, ...] = ()
    analytics: AnalyticsParams = AnalyticsParams()

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return config_to_dict(self)


# -- parsing ---------------------------------------------------------------------

# section key -> dataclass field, where the file name differs
_RENAMES = {"routing": {"lambda": "lam"}}


def _check_type(path: str, value: Any, want: type) -> Any:
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if want is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    return value


def _section(raw: Any, path: str, cls: type, types: dict[str, type], extra: dict | None = None):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    renames = _RENAMES.get(path, {})
    kwargs = dict(extra or {})
    for key, value in raw.items():
        if key not in types:
            raise ConfigError(f"{path}.{key}", f"unknown key {key!r}")
        kwargs[renames.get(key, key)] = _check_type(f"{path}.{key}", value, types[key])
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def _topology(raw: Any) -> TopologySpec:
    if not isinstance(raw, dict):
        raise ConfigError("topology", "expected an object")
    kind = raw.get("kind")
    allowed = {
        "grid": {"kind": str, "w": int, "h": int, "sink": int},
        "line": {"kind": str, "n": int, "sink": int},
        "explicit": {"kind": str, "nodes": int, "edges": list, "sink": int},
    }
    if kind not in allowed:
        raise ConfigError("topology.kind", f"must be one of {sorted(allowed)}, got {kind!r}")
    spec = _section(raw, "topology", dict, allowed[kind])
    if "edges" in spec:
        edges = spec["edges"]
        for i, e in enumerate(edges):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in e)):
                raise ConfigError(f"topology.edges[{i}]", "each edge must be [a, b] with integer ids")
        spec["edges"] = tuple(tuple(e) for e in edges)
    topo = TopologySpec(**spec)
    try:
        build_topology(topo)
    except (BadSpec, Disconnected) as exc:
        raise ConfigError("topology", str(exc)) from None
    return topo


_ATTACK_TYPES = {
    "kind": str, "attacker": int, "victim": int, "start": int, "end": int,
    "flood_rate": int, "drop_prob": float, "selective": str, "flip_prob": float,
}


def _attack(raw: Any, path: str) -> AttackSpec:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    for req in ("kind", "attacker", "start", "end"):
        if req not in raw:
            raise ConfigError(f"{path}.{req}", "required key missing")
    spec = _section(raw, path, dict, _ATTACK_TYPES)
    kinds = {k.name.lower(): k for k in AttackKind}
    if spec["kind"].lower() not in kinds:
        raise ConfigError(f"{path}.kind", f"must be one of {sorted(kinds)}")
    spec["kind"] = kinds[spec["kind"].lower()]
    if "selective" in spec:
        try:
            spec["selective"] = Selective(spec["selective"])
        except ValueError:
            raise ConfigError(f"{path}.selective", "must be 'all' or 'data_only'") from None
    a = AttackSpec(**spec)
    if a.start >= a.end:
        raise ConfigError(path, f"AttackSpec invariant violated: start ({a.start}) must be < end ({a.end})")
    return a


def parse_config(raw: Any) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "scenario must be an object")
    for key in raw:
        if key not in TOP_LEVEL_KEYS:
            raise ConfigError(key, f"unknown key {key!r}")
    for req in ("name", "topology", "duration"):
        if req not in raw:
            raise ConfigError(req, "required key missing")
    name = _check_type("name", raw["name"], str)
    duration = _check_type("duration", raw["duration"], int)
    if duration < 0:
        raise ConfigError("duration", "must be >= 0")
    seed = _check_type("seed", raw.get("seed", 1), int)
    if not 0 <= seed < 1 << 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    ci_enabled = _check_type("ci_enabled", raw.get("ci_enabled", True), bool)
    topology = _topology(raw["topology"])

    traffic_raw = dict(raw.get("traffic") or {})
    traffic = _section(traffic_raw, "traffic", TrafficSpec,
                       {"rate": int, "period": int, "payload_len": int, "critical_fraction": float},
                       extra={"period": 50})
    if traffic.rate < 0 or traffic.period < 1 or traffic.payload_len < 0:
        raise ConfigError("traffic", "rate and payload_len must be >= 0, period >= 1")
    if not 0.0 <= traffic.critical_fraction <= 1.0:
        raise ConfigError("traffic.critical_fraction", "must be in [0, 1]")

    link = _section(raw.get("link"), "link", LinkDefaults, {"base_loss": float, "latency": int, "capacity": int})
    if not 0.0 <= link.base_loss <= 1.0:
        raise ConfigError("link.base_loss", "must be in [0, 1]")
    if link.latency < 1 or link.capacity < 1:
        raise ConfigError("link", "latency and capacity must be >= 1")

    protocol = _section(raw.get("protocol"), "protocol", ProtocolParams,
                        {"retry_limit": int, "ack_timeout": int, "payload_max": int, "ttl": int})
    if protocol.retry_limit < 0 or protocol.ack_timeout < 1 or protocol.payload_max < 0 or not 1 <= protocol.ttl <= 255:
        raise ConfigError("protocol", "retry_limit >= 0, ack_timeout >= 1, payload_max >= 0, ttl in 1..255")
    if protocol.ack_timeout <= 2 * link.latency:
        # a timeout shorter than the round trip would retransmit frames that already arrived
        raise ConfigError("protocol.ack_timeout", f"must exceed the link round trip ({2 * link.latency})")
    if traffic.payload_len > protocol.payload_max:
        raise ConfigError("traffic.payload_len", f"exceeds protocol.payload_max ({protocol.payload_max})")

    routing = _section(raw.get("routing"), "routing", RoutingParams,
                       {"lambda": float, "beta": float, "gamma": float, "p_min": float, "beacon_period": int})
    detector = _section(raw.get("detector"), "detector", DetectorParams,
                        {"window": int, "warmup": int, "theta": float, "sigma_min": float,
                         "ratio_sigma_min": float, "horizon": int, "history": int})
    analytics = _section(raw.get("analytics"), "analytics", AnalyticsParams,
                         {"rho": float, "t_mit": int, "grace": int, "trailing_window": int})
    if not 0.0 < analytics.rho <= 1.0 or analytics.t_mit < 1 or analytics.grace < 0 or analytics.trailing_window < 1:
        raise ConfigError("analytics", "rho in (0, 1], t_mit >= 1, grace >= 0, trailing_window >= 1")

    attacks_raw = raw.get("attacks", [])
    if not isinstance(attacks_raw, list):
        raise ConfigError("attacks", "expected a list")
    attacks = tuple(_attack(a, f"attacks[{i}]") for i, a in enumerate(attacks_raw))
    n_nodes, _ = _edges_for(topology)
    try:
        validate_attacks(list(attacks), topology.sink, n_nodes)
    except BadSpec as exc:
        raise ConfigError("attacks", str(exc)) from None
    if ci_enabled and attacks:
        warm_end = detector.warmup * detector.window
        first = min(a.start for a in attacks)
        if first < warm_end:
            raise ConfigError("attacks", f"earliest attack start {first} precedes the end of detector warm-up ({warm_end})")

    return ScenarioConfig(
        name=name, duration=duration, seed=seed, ci_enabled=ci_enabled, topology=topology,
        traffic=traffic, link=link, protocol=protocol, routing=routing, detector=detector,
        attacks=attacks, analytics=analytics,
    )


def parse_scenario(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(str(p), "file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(p), f"invalid JSON: {exc}") from None
    return parse_config(raw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    def plain(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, (list, tuple)):
            return [plain(x) for x in obj]
        if isinstance(obj, AttackKind):
            return obj.name.lower()
        if isinstance(obj, Selective):
            return obj.value
        return obj

    d = plain(cfg)
    d["routing"]["lambda"] = d["routing"].pop("lam")
    topo = d["topology"]
    keep = {"grid": ("kind", "w", "h", "sink"), "line": ("kind", "n", "sink"),
            "explicit": ("kind", "nodes", "edges", "sink")}[topo["kind"]]
    d["topology"] = {k: topo[k] for k in keep}
    for a in d["attacks"]:
        if a["victim"] is None:
            del a["victim"]
    return {k: d[k] for k in TOP_LEVEL_KEYS}
