from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from wsnguard.eventlog import CorruptLog, EventLog, RECORD_KINDS, encode_record

from .oracles import fnv1a64

fields_st = st.lists(
    st.one_of(st.integers(-(2**62), 2**62), st.floats(allow_nan=False, allow_infinity=False)), max_size=5
)


def _sample() -> EventLog:
    log = EventLog()
    log.append(0, "gen", 1, 0, 0, 1, 16)
    log.append(1, "send", 1, 0, 0, 1, 1)
    log.append(2, "telemetry", 1, 0.25)
    log.append(2, "deliver", 0, 0, 1, 0, 2, 16)
    return log


def test_digest_is_fnv_over_encodings():
    log = _sample()
    blob = b"".join(encode_record(t, k, f) for t, k, f in log.records())
    assert log.digest == fnv1a64(blob)


def test_int_and_float_fields_encode_differently():
    assert encode_record(0, "telemetry", (1, 1)) != encode_record(0, "telemetry", (1, 1.0))


def test_time_may_not_go_backwards():
    log = EventLog()
    log.append(5, "run_end", 5)
    with pytest.raises(ValueError):
        log.append(4, "run_end", 4)


def test_dump_load_roundtrip(tmp_path):
    log = _sample()
    p = tmp_path / "e.jsonl"
    log.dump(p)
    again = EventLog.load(p)
    assert again.digest == log.digest
    assert list(again.records()) == list(log.records())


@given(rows=st.lists(st.tuples(st.integers(0, 5), fields_st), max_size=20))
def test_roundtrip_property(tmp_path_factory, rows):
    log = EventLog()
    t = 0
    for dt, f in rows:
        t += dt
        log.append(t, "route", *f)
    p = tmp_path_factory.mktemp("log") / "e.jsonl"
    log.dump(p)
    assert EventLog.load(p).digest == log.digest


def test_truncation_changes_digest(tmp_path):
    log = _sample()
    p = tmp_path / "e.jsonl"
    log.dump(p)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    assert EventLog.load(p).digest != log.digest


@pytest.mark.parametrize("line", ["not json", '[1, "nonsense", 2]', "[1]"])
def test_garbage_is_corrupt(tmp_path, line):
    p = tmp_path / "e.jsonl"
    p.write_text(line + "\n")
    with pytest.raises(CorruptLog):
        EventLog.load(p)


def test_slice_and_of_kind():
    log = _sample()
    assert [k for _, k, _ in log.slice(1, 3)] == ["send", "telemetry", "deliver"]
    assert [f for _, f in log.of_kind("telemetry")] == [(1, 0.25)]
    assert log.index_at(2) == 2


def test_listeners_see_every_append():
    seen = []
    log = EventLog()
    log.subscribe(lambda t, k, f: seen.append((t, k, f)))
    log.append(0, "unroutable", 3)
    assert seen == [(0, "unroutable", (3,))]


def test_record_codes_are_unique():
    codes = [c for c, _ in RECORD_KINDS.values()]
    assert len(codes) == len(set(codes))
    json.dumps(RECORD_KINDS)
