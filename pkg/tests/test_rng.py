from __future__ import annotations

from hypothesis import given, strategies as st

from wsnguard.rng import Rng, fork_stream, label_of, rng_next

from .oracles import splitmix64_stream

u64 = st.integers(0, (1 << 64) - 1)


def test_seed_zero_first_output():
    assert rng_next(0)[0] == 0xE220A8397B1DCDAF


@given(seed=u64)
def test_stream_matches_reference(seed):
    r = Rng(seed)
    assert [r.next_u64() for _ in range(5)] == splitmix64_stream(seed, 5)


@given(seed=u64)
def test_random_in_unit_interval(seed):
    r = Rng(seed)
    for _ in range(20):
        assert 0.0 <= r.random() < 1.0


@given(seed=u64, n=st.integers(1, 10**6))
def test_below_is_in_range(seed, n):
    assert 0 <= Rng(seed).below(n) < n


@given(seed=u64, p=st.floats(0.0, 1.0))
def test_bernoulli_consumes_exactly_one_draw(seed, p):
    a, b = Rng(seed), Rng(seed)
    a.bernoulli(p)
    b.next_u64()
    assert a.state == b.state


def test_bernoulli_extremes():
    r = Rng(3)
    assert not any(r.bernoulli(0.0) for _ in range(100))
    assert all(r.bernoulli(1.0) for _ in range(100))


def test_fork_does_not_advance_parent_and_labels_separate():
    r = Rng(99)
    before = r.state
    a, b = r.fork(label_of(1, 2)), r.fork(label_of(1, 3))
    assert r.state == before
    assert a.next_u64() != b.next_u64()
    assert fork_stream(99, label_of(1, 2)) == Rng(99).fork(label_of(1, 2)).state


def test_label_of_is_order_sensitive():
    assert label_of(1, 2) != label_of(2, 1)


@given(seed=u64, n=st.integers(0, 40))
def test_bytes_length_and_determinism(seed, n):
    assert len(Rng(seed).bytes(n)) == n
    assert Rng(seed).bytes(n) == Rng(seed).bytes(n)


def test_bernoulli_frequency():
    r = Rng(2024)
    hits = sum(r.bernoulli(0.3) for _ in range(20000))
    assert abs(hits / 20000 - 0.3) < 0.015
