"""Command line: ``wsnguard run|sweep|compare|report``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analytics as an
from . import experiment as ex
from .config import ConfigError, parse_scenario
from .eventlog import CorruptLog

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
VERBOSITY_ENV = "WSNGUARD_VERBOSITY"


def _console():
    level = os.environ.get(VERBOSITY_ENV, "alerts").strip().lower()
    return ex.console_printer(level, sys.stderr)


def _load(path: str, seed: int | None):
    cfg = parse_scenario(path)
    return cfg if seed is None else cfg.replace(seed=seed)


def cmd_run(args) -> int:
    cfg = _load(args.file, args.seed)
    out = Path(args.out or f"runs/{cfg.name}-seed{cfg.seed}")
    res = ex.run_one(cfg, _console())
    ex.write_run(res, out)
    m = res.report["metrics"]
    print(f"{cfg.name} seed={cfg.seed} ci={'on' if cfg.ci_enabled else 'off'} "
          f"pdr={m['pdr']} latency_mean={m['latency_mean']} throughput={m['throughput']} "
          f"digest={res.report['digest']} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args.file, args.seed)
    out = Path(args.out or f"runs/{cfg.name}-sweep")
    doc = ex.sweep(cfg, args.seeds, out, _console())
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(doc, indent=2) + "\n")
    (out / "sweep.csv").write_text(ex.tabular_text(doc["rows"]))
    for c in ("pdr", "latency_mean", "throughput", "recall", "mitigation_rate"):
        a = doc["aggregate"][c]
        print(f"{c:16s} mean={a['mean']} std={a['std']} n={a['count']}")
    for e in doc["errors"]:
        print(f"seed {e['seed']} failed: {e['error']}", file=sys.stderr)
    return EXIT_RUNTIME if doc["errors"] else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args.file, args.seed)
    out = Path(args.out or f"runs/{cfg.name}-compare")
    doc = ex.compare(cfg, args.seeds, out, _console())
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(doc, indent=2) + "\n")
    (out / "compare.csv").write_text(ex.tabular_text(ex.compare_rows(doc), ex.COMPARE_COLUMNS))
    print(f"{'metric':14s} {'ci_on':>12s} {'ci_off':>12s} {'delta':>12s}  direction_ok")
    for name, c in doc["comparison"].items():
        print(f"{name:14s} {_fmt(c['value_on'])} {_fmt(c['value_off'])} {_fmt(c['delta'])}  {c['direction_ok']}")
    return EXIT_OK


def _fmt(v) -> str:
    return f"{v:12.4f}" if v is not None else f"{'null':>12s}"


def cmd_report(args) -> int:
    run_dir = Path(args.dir)
    doc = ex.recompute_report(run_dir)
    stored = (run_dir / "report.json").read_text()
    if ex.dumps_report(doc) != stored:
        print("recomputed report differs from report.json", file=sys.stderr)
        return EXIT_RUNTIME
    if args.format == "tabular":
        sys.stdout.write(ex.tabular_text([an.tabular_row(doc)]))
    else:
        sys.stdout.write(ex.dumps_report(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsnguard", description="WSN attack and CI mitigation simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("file")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="run seeds seed..seed+N-1 and aggregate")
    s.add_argument("file")
    s.add_argument("--seeds", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_sweep)

    c = sub.add_parser("compare", help="CI on versus off over a seed sweep")
    c.add_argument("file")
    c.add_argument("--seeds", type=int, required=True)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_compare)

    rep = sub.add_parser("report", help="recompute reports from a run directory")
    rep.add_argument("dir")
    rep.add_argument("--format", choices=("json", "tabular"), default="json")
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "seeds", 1) < 1:
            raise ConfigError("--seeds", "must be >= 1")
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CorruptLog as exc:
        print(f"corrupt log: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
