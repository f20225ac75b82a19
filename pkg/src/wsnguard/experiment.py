"""Run orchestration: single runs with calibration, seed sweeps and CI on/off comparisons."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from . import analytics as an
from .config import ScenarioConfig, config_to_dict, parse_config
from .engine import simulate
from .eventlog import RECORD_KINDS, CorruptLog, EventLog


def format_record(time: int, kind: str, fields: tuple) -> str:
    names = RECORD_KINDS[kind][1]
    return f"t={time} {kind} " + " ".join(f"{n}={v}" for n, v in zip(names, fields))


CONSOLE_KINDS = {
    "quiet": frozenset(),
    "alerts": frozenset({"alert", "action", "tamper_notice", "attack_start", "attack_end"}),
}


def console_printer(level: str, out):
    """Log listener echoing records at the chosen verbosity (``trace`` echoes everything)."""
    if level == "trace":
        return lambda t, k, f: print(format_record(t, k, f), file=out)
    if level not in CONSOLE_KINDS:
        raise ValueError(f"unknown verbosity {level!r}; expected quiet, alerts or trace")
    wanted = CONSOLE_KINDS[level]
    if not wanted:
        return None

    def echo(t, k, f):
        if k in wanted:
            print(format_record(t, k, f), file=out)
    return echo


def calibration_config(cfg: ScenarioConfig) -> ScenarioConfig:
    return cfg.replace(attacks=(), ci_enabled=False)


@dataclass
class RunResult:
    cfg: ScenarioConfig
    log: EventLog
    calibration: EventLog | None
    report: dict


def run_one(cfg: ScenarioConfig, console=None, calibration: EventLog | None = None) -> RunResult:
    """Simulate ``cfg``; scenarios with attacks also get an attack-free calibration run."""
    log = simulate(cfg, console).log
    if calibration is None and cfg.attacks:
        calibration = simulate(calibration_config(cfg)).log
    return RunResult(cfg, log, calibration, an.report_document(cfg, log, calibration))


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def tabular_text(rows: list[dict], columns=an.TABULAR_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else r[k] for k in columns})
    return buf.getvalue()


def write_run(res: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(json.dumps(config_to_dict(res.cfg), indent=2) + "\n")
    res.log.dump(out / "events.jsonl")
    if res.calibration is not None:
        res.calibration.dump(out / "calibration.jsonl")
    (out / "report.json").write_text(dumps_report(res.report))
    (out / "metrics.csv").write_text(tabular_text([an.tabular_row(res.report)]))


def load_run(out: Path) -> tuple[ScenarioConfig, EventLog, EventLog | None, dict]:
    out = Path(out)
    cfg = parse_config(json.loads((out / "scenario.json").read_text()))
    stored = json.loads((out / "report.json").read_text())
    log = EventLog.load(out / "events.jsonl")
    if f"{log.digest:016x}" != stored.get("digest") or len(log) != stored.get("records"):
        raise CorruptLog(f"{out / 'events.jsonl'}: digest does not match report.json")
    cal_path = out / "calibration.jsonl"
    cal = EventLog.load(cal_path) if cal_path.exists() else None
    return cfg, log, cal, stored


def recompute_report(out: Path) -> dict:
    cfg, log, cal, _ = load_run(out)
    return an.report_document(cfg, log, cal)


# -- sweeps ----------------------------------------------------------------------

def aggregate(rows: list[dict], columns) -> dict:
    """Mean, sample std (0 for a single value) and non-null count per column."""
    out = {}
    for c in columns:
        vals = [float(r[c]) for r in rows if r.get(c) is not None]
        n = len(vals)
        mean = sum(vals) / n if n else None
        std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else (0.0 if n else None)
        out[c] = {"mean": mean, "std": std, "count": n}
    return out


NUMERIC_COLUMNS = tuple(c for c in an.TABULAR_COLUMNS if c not in ("scenario", "seed", "ci_enabled"))


def sweep(cfg: ScenarioConfig, n_seeds: int, out: Path | None = None, console=None) -> dict:
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    rows, errors = [], []
    for i in range(n_seeds):
        c = cfg.replace(seed=cfg.seed + i)
        try:
            res = run_one(c, console)
        except Exception as exc:  # keep the other seeds
            errors.append({"seed": c.seed, "error": f"{type(exc).__name__}: {exc}"})
            continue
        if out is not None:
            write_run(res, Path(out) / f"seed-{c.seed}")
        rows.append(an.tabular_row(res.report))
    return {"scenario": cfg.name, "rows": rows, "aggregate": aggregate(rows, NUMERIC_COLUMNS), "errors": errors}


# -- on/off comparison -----------------------------------------------------------------

def _comparison_values(report: dict) -> dict:
    m = report["metrics"]
    return {"drops_total": sum(m["drops_by_cause"].values()), "throughput": m["throughput"],
            "latency_mean": m["latency_mean"]}


def compare(cfg: ScenarioConfig, n_seeds: int, out: Path | None = None, console=None) -> dict:
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    attack_free = not cfg.attacks
    per_seed = []
    on_vals, off_vals = [], []
    for i in range(n_seeds):
        base = cfg.replace(seed=cfg.seed + i)
        c_on, c_off = base.replace(ci_enabled=True), base.replace(ci_enabled=False)
        an.check_comparable(c_on, c_off)
        cal = simulate(calibration_config(base)).log
        r_on = run_one(c_on, console, cal)
        r_off = run_one(c_off, console, cal)
        if out is not None:
            write_run(r_on, Path(out) / f"seed-{base.seed}" / "ci_on")
            write_run(r_off, Path(out) / f"seed-{base.seed}" / "ci_off")
        v_on, v_off = _comparison_values(r_on.report), _comparison_values(r_off.report)
        on_vals.append(v_on)
        off_vals.append(v_off)
        cmp = an.compare_reports(v_on, v_off, attack_free=attack_free)
        per_seed.append({
            "seed": base.seed,
            "comparison": {k: asdict(v) for k, v in cmp.items()},
            "on": an.tabular_row(r_on.report),
            "off": an.tabular_row(r_off.report),
        })
    mean_on = {k: v["mean"] for k, v in aggregate(on_vals, an.EXPECTATIONS).items()}
    mean_off = {k: v["mean"] for k, v in aggregate(off_vals, an.EXPECTATIONS).items()}
    agg = an.compare_reports(mean_on, mean_off, attack_free=attack_free)
    return {
        "scenario": cfg.name,
        "seeds": [cfg.seed + i for i in range(n_seeds)],
        "attack_free": attack_free,
        "comparison": {k: asdict(v) for k, v in agg.items()},
        "per_seed": per_seed,
    }


COMPARE_COLUMNS = ("scenario", "seed", "metric", "value_on", "value_off", "delta", "direction_ok")


def compare_rows(doc: dict) -> list[dict]:
    rows = []
    for s in doc["per_seed"]:
        for metric, c in s["comparison"].items():
            rows.append({"scenario": doc["scenario"], "seed": s["seed"], "metric": metric, **c})
    for metric, c in doc["comparison"].items():
        rows.append({"scenario": doc["scenario"], "seed": "mean", "metric": metric, **c})
    return rows
