from __future__ import annotations

from importlib import resources

import pytest
from hypothesis import settings

from wsnguard.config import parse_config, parse_scenario

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

SCENARIOS = ("baseline", "blackhole", "flood", "tamper")


def scenario_path(name: str) -> str:
    return str(resources.files("wsnguard") / "scenarios" / f"{name}.scn")


def load(name: str, **changes):
    cfg = parse_scenario(scenario_path(name))
    return cfg.replace(**changes) if changes else cfg


def small_config(**overrides):
    raw = {
        "name": "small",
        "duration": 400,
        "seed": 7,
        "ci_enabled": False,
        "topology": {"kind": "grid", "w": 3, "h": 3, "sink": 0},
        "traffic": {"period": 20},
    }
    raw.update(overrides)
    return parse_config(raw)


@pytest.fixture
def tiny_cfg():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    results = test_acceptance.RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=int):
        parts = results[key]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}")
        for p, detail in parts:
            terminalreporter.write_line(f"    [{'PASS' if p else 'FAIL'}] {detail}")
