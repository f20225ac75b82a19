"""CI detection loop: monitor, learn normal, score, classify, mitigate.

Per node and per window of ``W`` ticks the engine extracts a feature vector
from logged records only (never attack ground truth), learns a per-feature
baseline with Welford's algorithm during a clean warm-up, then scores
deviations as robust z-values and applies rules in priority order
Tamper > Blackhole > Flood.
"""
from __future__ import annotations

import enum
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .eventlog import CAUSE_CODE

FEATURES = ("tx_rate", "rx_rate", "fwd_ratio", "drop_count", "auth_fail_count", "dup_ratio", "queue_frac")
RATIO_FEATURES = frozenset({"fwd_ratio", "dup_ratio", "queue_frac"})

_AUTH_FAIL = CAUSE_CODE["auth_fail"]


class Label(enum.IntEnum):
    Benign = 0
    Flood = 1
    Blackhole = 2
    Tamper = 3


class ActionKind(enum.IntEnum):
    Quarantine = 0
    RateLimit = 1
    Rekey = 2
    RecomputeRoutes = 3


class FrozenBaseline(RuntimeError):
    pass


@dataclass(frozen=True)
class DetectorParams:
    window: int = 50
    warmup: int = 5
    theta: float = 4.0
    sigma_min: float = 0.5
    ratio_sigma_min: float = 0.05
    horizon: int = 3
    history: int = 8

    def __post_init__(self) -> None:
        if self.window < 1 or self.warmup < 1:
            raise ValueError("window and warmup must be >= 1")
        if self.theta <= 0 or self.sigma_min <= 0 or self.ratio_sigma_min <= 0:
            raise ValueError("theta and sigma floors must be positive")
        if self.horizon < 0 or self.history < 1:
            raise ValueError("horizon must be >= 0 and history >= 1")


@dataclass(frozen=True)
class FeatureVector:
    node: int
    window_end: int
    tx_rate: float = 0.0
    rx_rate: float = 0.0
    fwd_ratio: float = 1.0
    drop_count: int = 0
    auth_fail_count: int = 0
    dup_ratio: float = 0.0
    queue_frac: float = 0.0
    top_upstream: int | None = None

    def value(self, name: str) -> float:
        return float(getattr(self, name))


@dataclass
class Welford:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0


@dataclass
class BaselineStats:
    stats: dict[int, dict[str, Welford]] = field(default_factory=dict)
    frozen: bool = False

    def of(self, node: int) -> dict[str, Welford]:
        s = self.stats.get(node)
        if s is None:
            s = self.stats[node] = {f: Welford() for f in FEATURES}
        return s


@dataclass(frozen=True)
class ThreatAssessment:
    node: int
    window_end: int
    z: dict[str, float]
    label: Label
    score: float
    observed_at: int = -1


@dataclass(frozen=True)
class MitigationAction:
    kind: ActionKind
    target: int
    issued_at: int
    param: int = 0


# -- feature extraction ----------------------------------------------------------


def extract_all(records: Iterable[tuple[int, str, tuple]], nodes: Iterable[int], window_end: int, window: int) -> dict[int, FeatureVector]:
    """Feature vectors for ``nodes`` over ``[window_end - window, window_end)``.

    ``records`` may include ``telemetry`` records stamped at ``window_end``;
    every other record must lie inside the window to be counted.
    """
    start = window_end - window
    originated = defaultdict(int)
    sent = defaultdict(int)
    retx = defaultdict(int)
    recv = defaultdict(int)
    relay = defaultdict(int)
    fwd = defaultdict(int)
    drops = defaultdict(int)
    auth = defaultdict(int)
    upstream: dict[int, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    qfrac: dict[int, float] = {}
    for t, kind, f in records:
        if kind == "telemetry":
            if t == window_end:
                qfrac[f[0]] = f[1]
            continue
        if not start <= t < window_end:
            continue
        if kind == "send":
            n = f[0]
            sent[n] += 1
            if f[4] > 1:
                retx[n] += 1
            elif f[3] == n:
                originated[n] += 1
        elif kind == "recv":
            recv[f[0]] += 1
            upstream[f[0]][f[1]] += 1
        elif kind == "relay":
            relay[f[0]] += 1
        elif kind == "fwd":
            fwd[f[0]] += 1
        elif kind == "drop":
            drops[f[0]] += 1
            if f[2] == _AUTH_FAIL and f[3] >= 0:
                auth[f[3]] += 1
    out = {}
    for n in nodes:
        rff = relay[n]
        ups = upstream.get(n)
        top = None
        if ups:
            top = min(ups, key=lambda s: (-ups[s], s))
        out[n] = FeatureVector(
            node=n,
            window_end=window_end,
            tx_rate=originated[n] / window,
            rx_rate=recv[n] / window,
            fwd_ratio=min(1.0, fwd[n] / rff) if rff else 1.0,
            drop_count=drops[n],
            auth_fail_count=auth[n],
            dup_ratio=retx[n] / sent[n] if sent[n] else 0.0,
            queue_frac=qfrac.get(n, 0.0),
            top_upstream=top,
        )
    return out


def extract_features(records: Iterable[tuple[int, str, tuple]], node: int, window_end: int, window: int) -> FeatureVector:
    return extract_all(records, [node], window_end, window)[node]


# -- baseline and scoring ----------------------------------------------------------


def update_baseline(bs: BaselineStats, fv: FeatureVector) -> BaselineStats:
    if bs.frozen:
        raise FrozenBaseline("baseline is frozen")
    stats = bs.of(fv.node)
    for f in FEATURES:
        stats[f].push(fv.value(f))
    return bs


def score(fv: FeatureVector, bs: BaselineStats, params: DetectorParams) -> dict[str, float]:
    stats = bs.of(fv.node)
    z = {}
    for f in FEATURES:
        w = stats[f]
        floor = params.ratio_sigma_min if f in RATIO_FEATURES else params.sigma_min
        z[f] = (fv.value(f) - w.mean) / max(math.sqrt(w.variance), floor)
    return z


def classify(fv: FeatureVector, z: dict[str, float], params: DetectorParams) -> ThreatAssessment:
    top = max(abs(v) for v in z.values()) if z else 0.0
    suspect = fv.node
    if fv.auth_fail_count >= 1:
        label = Label.Tamper
    elif z["fwd_ratio"] <= -params.theta:
        label = Label.Blackhole
    elif z["tx_rate"] >= params.theta:
        label = Label.Flood
    elif z["rx_rate"] >= params.theta and fv.top_upstream is not None:
        # the observing node is the victim; blame whoever fed it the most
        label = Label.Flood
        suspect = fv.top_upstream
    else:
        label = Label.Benign
    return ThreatAssessment(suspect, fv.window_end, z, label, top, observed_at=fv.node)


class Detector(Protocol):
    """Seam for swapping in a learned model in place of the z-score rules."""

    def assess(self, fv: FeatureVector, baseline: BaselineStats, params: DetectorParams) -> ThreatAssessment: ...


class ZScoreDetector:
    def assess(self, fv: FeatureVector, baseline: BaselineStats, params: DetectorParams) -> ThreatAssessment:
        return classify(fv, score(fv, baseline, params), params)


# -- mitigation and prediction ------------------------------------------------------------


def decide_mitigation(
    a: ThreatAssessment,
    active: set[tuple[ActionKind, int]],
    baseline_tx_rate: float = 0.0,
    window: int = 50,
) -> list[MitigationAction]:
    if a.label is Label.Benign:
        return []
    n, t = a.node, a.window_end
    if a.label is Label.Blackhole:
        wanted = [MitigationAction(ActionKind.Quarantine, n, t)]
    elif a.label is Label.Flood:
        cap = math.ceil(baseline_tx_rate * window - 1e-9)
        wanted = [MitigationAction(ActionKind.RateLimit, n, t, max(0, cap))]
    else:
        wanted = [MitigationAction(ActionKind.Rekey, n, t), MitigationAction(ActionKind.Quarantine, n, t)]
    fresh = [m for m in wanted if (m.kind, m.target) not in active]
    if not fresh:
        return []
    return fresh + [MitigationAction(ActionKind.RecomputeRoutes, n, t)]


def predict_risk(history: list[float], horizon: int) -> float:
    """Extrapolate the anomaly-score trend ``horizon`` windows ahead (least squares)."""
    k = len(history)
    if k == 0:
        return 0.0
    last = float(history[-1])
    if k < 2:
        return max(0.0, last)
    xm = (k - 1) / 2.0
    ym = sum(history) / k
    sxx = sum((i - xm) ** 2 for i in range(k))
    sxy = sum((i - xm) * (y - ym) for i, y in enumerate(history))
    return max(0.0, last + (sxy / sxx) * horizon)


# -- the loop -----------------------------------------------------------------


class CIEngine:
    """Stateful per-run detection loop fed one window at a time."""

    def __init__(self, params: DetectorParams, detector: Detector | None = None) -> None:
        self.params = params
        self.detector = detector or ZScoreDetector()
        self.baseline = BaselineStats()
        self.windows_seen = 0
        self.active: set[tuple[ActionKind, int]] = set()
        self.history: dict[int, deque] = {}

    @property
    def armed(self) -> bool:
        return self.baseline.frozen

    def on_window(self, features: dict[int, FeatureVector]) -> tuple[list[ThreatAssessment], list[MitigationAction], dict[int, float]]:
        """Consume one window; return assessments, new actions and predicted risks."""
        self.windows_seen += 1
        if not self.baseline.frozen:
            for fv in features.values():
                update_baseline(self.baseline, fv)
            if self.windows_seen >= self.params.warmup:
                self.baseline.frozen = True
            return [], [], {}
        assessments, actions, risks = [], [], {}
        for node in sorted(features):
            a = self.detector.assess(features[node], self.baseline, self.params)
            assessments.append(a)
            hist = self.history.setdefault(node, deque(maxlen=self.params.history))
            hist.append(a.score)
            risks[node] = predict_risk(list(hist), self.params.horizon)
            tx_mean = self.baseline.of(a.node)["tx_rate"].mean
            new = decide_mitigation(a, self.active, tx_mean, self.params.window)
            for m in new:
                if m.kind is not ActionKind.RecomputeRoutes:
                    self.active.add((m.kind, m.target))
            actions.extend(new)
        return assessments, actions, risks
