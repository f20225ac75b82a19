"""Deterministic discrete-event simulator of a wireless sensor network under attack.

A run couples hop-by-hop authenticated forwarding with stop-and-wait ARQ,
trust-aware routing, scripted blackhole/flood/tamper attackers and a
windowed anomaly detector that issues mitigations. Everything observable is
written to an append-only event log; analytics are pure functions of it.

Typical use::

    from wsnguard.config import parse_scenario
    from wsnguard.experiment import run_one

    res = run_one(parse_scenario("blackhole.scn"))
    print(res.report["metrics"]["pdr"])
"""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
