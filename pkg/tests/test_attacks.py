from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from wsnguard.attacks import (
    AttackKind, AttackSpec, GroundTruth, Interval, Selective, activate, blackhole_behavior,
    flood_behavior, ground_truth, tamper_behavior, validate_attacks,
)
from wsnguard.net import BadSpec
from wsnguard.protocol import AuthError, FrameHeader, open_frame, seal
from wsnguard.rng import Rng


def test_spec_validation():
    with pytest.raises(BadSpec):
        AttackSpec(AttackKind.Blackhole, 0, 10, 20).validate(sink=0, n_nodes=5)
    with pytest.raises(BadSpec):
        AttackSpec(AttackKind.Flood, 1, 10, 20, flood_rate=-1).validate(sink=0, n_nodes=5)
    with pytest.raises(BadSpec):
        AttackSpec(AttackKind.Tamper, 9, 10, 20).validate(sink=0, n_nodes=5)
    AttackSpec(AttackKind.Flood, 1, 10, 20, flood_rate=2).validate(sink=0, n_nodes=5)
    AttackSpec(AttackKind.Flood, 1, 10, 20, flood_rate=0).validate(sink=0, n_nodes=5)


def test_overlapping_attacks_on_one_node_rejected():
    a = AttackSpec(AttackKind.Blackhole, 1, 10, 20)
    b = AttackSpec(AttackKind.Tamper, 1, 15, 30)
    with pytest.raises(BadSpec):
        validate_attacks([a, b], 0, 5)
    validate_attacks([a, AttackSpec(AttackKind.Tamper, 1, 20, 30)], 0, 5)


def test_active_window_half_open():
    a = AttackSpec(AttackKind.Blackhole, 1, 10, 20)
    assert not a.active_at(9) and a.active_at(10) and a.active_at(19) and not a.active_at(20)


def test_activate_only_at_start():
    a = AttackSpec(AttackKind.Blackhole, 1, 10, 20)
    with pytest.raises(ValueError):
        activate(a, 11, Rng(0))
    assert activate(a, 10, Rng(0)).spec is a


def test_ground_truth_intervals():
    gt = ground_truth([AttackSpec(AttackKind.Blackhole, 1, 10, 20)])
    assert gt.intervals == (Interval(1, AttackKind.Blackhole, 10, 20),)
    assert gt.attacked(1, 0, 11) and not gt.attacked(1, 20, 30) and not gt.attacked(2, 0, 100)
    assert GroundTruth().intervals == ()


def test_flood_payloads():
    out = flood_behavior(4, Rng(1), 12)
    assert len(out) == 4 and all(len(p) == 12 for p in out)


@given(p=st.sampled_from([0.0, 1.0]))
def test_blackhole_extremes(p):
    r = Rng(4)
    assert all(blackhole_behavior(True, p, Selective.All, r) == (p == 1.0) for _ in range(20))


def test_blackhole_selective_spares_control():
    assert not blackhole_behavior(False, 1.0, Selective.DataOnly, Rng(1))
    assert blackhole_behavior(False, 1.0, Selective.All, Rng(1))


@given(seed=st.integers(0, 2**64 - 1), payload=st.binary(min_size=1, max_size=64))
def test_tampered_frames_always_fail_authentication(seed, payload):
    key = 0x5EED
    w = seal(FrameHeader(2, 0, 2, 1, 4, 0, 1, 32, 77), payload, key)
    t, bit = tamper_behavior(w, 1.0, Rng(seed))
    assert bit is not None and 0 <= bit < len(payload) * 8
    with pytest.raises(AuthError):  # the CRC was fixed up, so only the tag catches it
        open_frame(t, key)


def test_tamper_noop():
    w = seal(FrameHeader(2, 0, 2, 1, 4, 0, 1, 32, 77), b"abc", 1)
    assert tamper_behavior(w, 0.0, Rng(1)) == (w, None)
    empty = seal(FrameHeader(2, 0, 2, 1, 4, 0, 1, 32, 77), b"", 1)
    assert tamper_behavior(empty, 1.0, Rng(1)) == (empty, None)
