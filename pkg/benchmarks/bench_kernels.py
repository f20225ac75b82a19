"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--quick]

Reports per-call timings for the hot kernels and the wall time of one
full reference run under each backend (the latter in subprocesses, since
the backend is chosen at import).
"""
from __future__ import annotations

import argparse
import importlib
import os
import subprocess
import sys
import timeit

from wsnguard import _purecore

RUN_SNIPPET = (
    "import time; from importlib import resources; from wsnguard.config import parse_scenario; "
    "from wsnguard.engine import simulate; from wsnguard.kernels import BACKEND; "
    "cfg = parse_scenario(resources.files('wsnguard') / 'scenarios' / 'flood.scn'); "
    "t = time.perf_counter(); simulate(cfg); print(BACKEND, time.perf_counter() - t)"
)


def kernel_table(number: int) -> None:
    try:
        fast = importlib.import_module("wsnguard._fastcore")
    except ImportError:
        fast = None
        print("compiled extension not built; showing the pure backend only")
    frame = bytes(range(256))[:58]  # a typical sealed frame body
    payload = bytes(16)
    cases = [
        ("crc32(58 B)", lambda m: m.crc32(frame)),
        ("fnv1a64(58 B)", lambda m: m.fnv1a64(frame)),
        ("keystream_xor(16 B)", lambda m: m.keystream_xor(payload, 0x1234, 0x5678)),
        ("splitmix_next", lambda m: m.splitmix_next(0x9E3779B97F4A7C15)),
    ]
    print(f"{'kernel':22s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s}")
    for name, fn in cases:
        t_py = timeit.timeit(lambda: fn(_purecore), number=number) / number * 1e6
        if fast is None:
            print(f"{name:22s} {t_py:10.3f}")
            continue
        t_cy = timeit.timeit(lambda: fn(fast), number=number) / number * 1e6
        print(f"{name:22s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.1f}x")


def run_table() -> None:
    print("\nfull flood.scn run (2000 ticks, CI on)")
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("WSNGUARD_PURE", None)
        if pure:
            env["WSNGUARD_PURE"] = "1"
        out = subprocess.run([sys.executable, "-c", RUN_SNIPPET], capture_output=True, text=True, env=env, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:8s} {float(secs):.3f} s")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    kernel_table(2_000 if args.quick else 50_000)
    run_table()


if __name__ == "__main__":
    main()
