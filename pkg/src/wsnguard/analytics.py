"""Offline metrics over a finished event log.

Everything here is a pure function of the log (plus scenario parameters), so a
report recomputed from a stored run directory is bit-identical to the original.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .attacks import AttackKind, GroundTruth, Interval
from .ci import ActionKind, Label
from .eventlog import DROP_CAUSES, CorruptLog, EventLog


class ConfigMismatch(ValueError):
    """Two runs being compared differ in more than the toggled flag."""


@dataclass
class MetricsReport:
    generated: int
    delivered_unique: int
    pdr: float | None
    latency_mean: float | None
    latency_p95: float | None
    throughput: float | None
    drops_by_cause: dict[str, int]
    duplicates: int

    @property
    def drops_total(self) -> int:
        return sum(self.drops_by_cause.values())


@dataclass
class DetectionReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    f1: float | None
    mean_time_to_detect: float | None
    # node-window false-positive rate, kept apart from the interval matrix
    fp_windows: int = 0
    fpr: float | None = None
    per_kind_recall: dict[str, float | None] = field(default_factory=dict)


@dataclass
class MitigationReport:
    attacks_total: int
    mitigated: int
    success_rate: float | None
    params: dict


@dataclass
class MetricComparison:
    value_on: float | None
    value_off: float | None
    delta: float | None
    direction_ok: bool | None


# metric -> expected sign of (on - off) under attack
EXPECTATIONS = {"drops_total": -1, "throughput": +1, "latency_mean": -1}


def _ratio(a, b):
    return a / b if b else None


def _run_ticks(log: EventLog) -> int:
    for t, f in log.of_kind("run_end"):
        return f[0]
    return log.times[-1] if len(log) else 0


def check_accounting(log: EventLog) -> None:
    """Each created packet ends exactly once: delivered, dropped or still in flight."""
    created: set[int] = set()
    ends: dict[int, str] = {}
    for _, kind, f in log.records():
        if kind == "gen":
            created.add(f[1])
        elif kind == "inject":
            created.add(f[1])
        elif kind in ("deliver", "drop", "inflight"):
            pid = f[1]
            if pid in ends:
                raise CorruptLog(f"packet {pid} terminated twice ({ends[pid]}, {kind})")
            ends[pid] = kind
    if created != ends.keys():
        missing = sorted(created - ends.keys())[:5]
        extra = sorted(ends.keys() - created)[:5]
        raise CorruptLog(f"accounting identity violated: unaccounted {missing}, unknown {extra}")


def compute_metrics(log: EventLog) -> MetricsReport:
    check_accounting(log)
    app: dict[int, int] = {}  # pid -> size
    for _, f in log.of_kind("gen"):
        app[f[1]] = f[4]
    latencies: list[int] = []
    bytes_out = 0
    drops = {c: 0 for c in DROP_CAUSES}
    dups = 0
    for _, kind, f in log.records():
        if kind == "deliver" and f[1] in app:
            latencies.append(f[4])
            bytes_out += f[5]
        elif kind == "drop" and f[1] in app:
            drops[DROP_CAUSES[f[2]]] += 1
        elif kind == "dup":
            dups += 1
    n = len(latencies)
    ticks = _run_ticks(log)
    lat_sorted = sorted(latencies)
    return MetricsReport(
        generated=len(app),
        delivered_unique=n,
        pdr=_ratio(n, len(app)),
        latency_mean=sum(latencies) / n if n else None,
        latency_p95=float(lat_sorted[math.ceil(0.95 * n) - 1]) if n else None,
        throughput=bytes_out / ticks if ticks and app else None,
        drops_by_cause=drops,
        duplicates=dups,
    )


def truth_from_log(log: EventLog) -> GroundTruth:
    """Attack intervals as recorded; an attack still running at the end closes at run end."""
    open_: dict[int, tuple[int, int]] = {}
    out: list[Interval] = []
    for t, kind, f in log.records():
        if kind == "attack_start":
            open_[f[0]] = (f[1], t)
        elif kind == "attack_end" and f[0] in open_:
            k, s = open_.pop(f[0])
            out.append(Interval(f[0], AttackKind(k), s, t))
    end = _run_ticks(log)
    for node, (k, s) in open_.items():
        out.append(Interval(node, AttackKind(k), s, end))
    out.sort(key=lambda i: (i.start, i.node))
    return GroundTruth(tuple(out))


def alerts_from_log(log: EventLog) -> list[tuple[int, int, Label]]:
    return [(t, f[0], Label(f[1])) for t, f in log.of_kind("alert")]


def evaluate_detection(alerts, truth: GroundTruth, grace: int, units=None, window: int = 0) -> DetectionReport:
    """Interval-level confusion counts plus a node-window false-positive rate.

    ``alerts`` are ``(time, node, label)``; ``units`` are the assessed
    ``(node, window_end)`` pairs (defaults to none, giving tn=0).
    """
    hits: dict[int, int] = {}
    fp = 0
    for t, node, label in alerts:
        matched = False
        for idx, iv in enumerate(truth.intervals):
            if iv.node == node and int(iv.kind) == int(label) and iv.start <= t <= iv.end + grace:
                matched = True
                if idx not in hits or t < hits[idx]:
                    hits[idx] = t
        if not matched:
            fp += 1
    tp = len(hits)
    fn = len(truth.intervals) - tp

    alerted = {(node, t) for t, node, _ in alerts}
    tn = fp_w = 0
    for node, wend in units or ():
        if any(iv.node == node and iv.start <= wend and wend - window < iv.end + grace for iv in truth.intervals):
            continue
        if (node, wend) in alerted:
            fp_w += 1
        else:
            tn += 1

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    ttd = [hits[i] - truth.intervals[i].start for i in sorted(hits)]
    per_kind: dict[str, float | None] = {}
    for kind in AttackKind:
        idx = [i for i, iv in enumerate(truth.intervals) if iv.kind is kind]
        if idx:
            per_kind[kind.name] = sum(1 for i in idx if i in hits) / len(idx)
    return DetectionReport(
        tp=tp, fp=fp, fn=fn, tn=tn,
        precision=precision, recall=recall, f1=f1,
        mean_time_to_detect=sum(ttd) / len(ttd) if ttd else None,
        fp_windows=fp_w, fpr=_ratio(fp_w, fp_w + tn),
        per_kind_recall=per_kind,
    )


def detection_from_log(log: EventLog, grace: int, window: int) -> DetectionReport:
    units = sorted({(f[0], t) for t, f in log.of_kind("assess")})
    return evaluate_detection(alerts_from_log(log), truth_from_log(log), grace, units, window)


def window_pdr(log: EventLog, t0: int, t1: int) -> float | None:
    """Delivered fraction of the application packets created in ``[t0, t1)``."""
    made = {f[1] for t, f in log.of_kind("gen") if t0 <= t < t1}
    if not made:
        return None
    got = sum(1 for _, f in log.of_kind("deliver") if f[1] in made)
    return got / len(made)


def goodput(log: EventLog, t0: int, t1: int) -> float:
    """Application payload bytes reaching their destination per tick over ``[t0, t1)``."""
    if t1 <= t0:
        return 0.0
    app = {f[1] for _, f in log.of_kind("gen")}
    total = sum(f[5] for t, f in log.of_kind("deliver") if t0 <= t < t1 and f[1] in app)
    return total / (t1 - t0)


def mitigation_success(log: EventLog, truth: GroundTruth, baseline_pdr: float | None,
                       rho: float = 0.9, t_mit: int = 200, trailing: int = 100) -> MitigationReport:
    params = {"rho": rho, "t_mit": t_mit, "trailing_window": trailing}
    n = len(truth.intervals)
    if n == 0:
        return MitigationReport(0, 0, None, params)
    actions = [(t, f[1]) for t, f in log.of_kind("action")]
    ok = 0
    for iv in truth.intervals:
        deadline = iv.start + t_mit
        acted = any(a == iv.node and iv.start <= t <= deadline for t, a in actions)
        if not acted or baseline_pdr is None:
            continue
        p = window_pdr(log, deadline - trailing, deadline)
        if p is not None and p >= rho * baseline_pdr:
            ok += 1
    return MitigationReport(n, ok, ok / n, params)


def compare_reports(on: MetricsReport, off: MetricsReport, expectations=None, attack_free: bool = False,
                    cfg_on=None, cfg_off=None) -> dict[str, MetricComparison]:
    if cfg_on is not None or cfg_off is not None:
        check_comparable(cfg_on, cfg_off)
    expectations = EXPECTATIONS if expectations is None else expectations
    out = {}
    for name, sign in expectations.items():
        a, b = _metric(on, name), _metric(off, name)
        delta = a - b if a is not None and b is not None else None
        ok = None if attack_free or delta is None else delta * sign > 0
        out[name] = MetricComparison(a, b, delta, ok)
    return out


def _metric(r, name):
    if isinstance(r, dict):
        return r.get(name)
    return getattr(r, name)


def check_comparable(cfg_on, cfg_off) -> None:
    if cfg_on is None or cfg_off is None:
        raise ConfigMismatch("both configurations are required")
    a, b = cfg_on.to_dict(), cfg_off.to_dict()
    a.pop("ci_enabled"), b.pop("ci_enabled")
    diff = sorted(k for k in a if a[k] != b[k])
    if diff:
        raise ConfigMismatch(f"configurations differ beyond ci_enabled: {', '.join(diff)}")


def action_counts(log: EventLog) -> dict[str, int]:
    out = {k.name: 0 for k in ActionKind}
    for _, f in log.of_kind("action"):
        out[ActionKind(f[0]).name] += 1
    return out


def report_document(cfg, log: EventLog, calibration: EventLog | None) -> dict:
    """The structured per-run report."""
    a = cfg.analytics
    metrics = compute_metrics(log)
    det = detection_from_log(log, a.grace, cfg.detector.window)
    base = compute_metrics(calibration).pdr if calibration is not None else None
    mit = mitigation_success(log, truth_from_log(log), base, a.rho, a.t_mit, a.trailing_window)
    return {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "ci_enabled": cfg.ci_enabled,
        "digest": f"{log.digest:016x}",
        "records": len(log),
        "metrics": asdict(metrics),
        "detection": asdict(det),
        "mitigation": asdict(mit),
        "comparison": None,  # filled only by on/off comparisons
        "actions": action_counts(log),
        "baseline_pdr": base,
    }


TABULAR_COLUMNS = (
    "scenario", "seed", "ci_enabled", "pdr", "latency_mean", "latency_p95", "throughput",
    "drops_link", "drops_congestion", "drops_attack", "drops_retry", "drops_auth",
    "precision", "recall", "f1", "ttd_mean", "mitigation_rate",
)


def tabular_row(doc: dict) -> dict:
    m, d, g = doc["metrics"], doc["detection"], doc["mitigation"]
    drops = m["drops_by_cause"]
    return {
        "scenario": doc["scenario"],
        "seed": doc["seed"],
        "ci_enabled": doc["ci_enabled"],
        "pdr": m["pdr"],
        "latency_mean": m["latency_mean"],
        "latency_p95": m["latency_p95"],
        "throughput": m["throughput"],
        "drops_link": drops["link_error"],
        "drops_congestion": drops["congestion"],
        "drops_attack": drops["attack_drop"],
        "drops_retry": drops["retry_exhausted"],
        "drops_auth": drops["auth_fail"],
        "precision": d["precision"],
        "recall": d["recall"],
        "f1": d["f1"],
        "ttd_mean": d["mean_time_to_detect"],
        "mitigation_rate": g["success_rate"],
    }
