import random

import pytest
from hypothesis import given, settings, strategies as st

from ncarq.dws import (
    DwsSender,
    FieldTooSmallError,
    compute_transmit,
    drop_seen,
    incorporate_arrivals,
    incorporate_feedback,
    oldest_unseen,
)
from ncarq.field import PrimeField, smallest_prime_at_least
from ncarq.receiver import CodedPacket, ReceiverState


def example_sender_after(slot):
    """Walk the bundled two-receiver schedule (n=2, q=2) to the end of ``slot``."""
    f = PrimeField(2)
    s = DwsSender(f, 2)
    arrivals = {1: 1, 2: 1, 3: 1, 5: 1}
    channel = {1: (1, 0), 2: (1, 1), 3: (0, 1), 4: (0, 1), 5: (1, 0), 6: (1, 1)}
    sent = []
    for t in range(1, slot + 1):
        incorporate_arrivals(s, [None] * arrivals.get(t, 0))
        g = compute_transmit(s)
        sent.append(g.coeffs if g else None)
        incorporate_feedback(s, channel[t], g)
        drop_seen(s)
    return s, sent


def test_arrivals():
    s = DwsSender(PrimeField(2), 2)
    incorporate_arrivals(s, [])
    assert not s.queue and s.next_index == 0
    incorporate_arrivals(s, [None])
    assert list(s.queue) == [1]
    assert s.mirror_matrix(0) == ([], [1])
    s, _ = example_sender_after(1)
    incorporate_arrivals(s, [None])
    assert list(s.queue) == [1, 2]


def test_example_transmissions():
    _, sent = example_sender_after(6)
    assert sent == [{1: 1}, {1: 1, 2: 1}, {2: 1, 3: 1}, {3: 1}, {3: 1, 4: 1}, {4: 1}]


def test_single_receiver_sends_oldest_unseen_with_unit_coefficient():
    s = DwsSender(PrimeField(3), 1)
    incorporate_arrivals(s, [None] * 5)
    for _ in range(4):
        g = compute_transmit(s)
        incorporate_feedback(s, [True], g)
        drop_seen(s)
    assert list(s.queue) == [5]
    assert compute_transmit(s).coeffs == {5: 1}


def test_empty_queue_sends_nothing():
    s = DwsSender(PrimeField(2), 2)
    assert compute_transmit(s) is None
    assert incorporate_feedback(s, [True, True], None).mirrors[0].rank == 0


def test_feedback():
    s, _ = example_sender_after(1)
    assert set(s.mirrors[0].pivots) == {1}
    assert s.mirrors[1].rank == 0
    before = [m.copy() for m in s.mirrors]
    g = compute_transmit(s)
    incorporate_feedback(s, [False, False], g)
    assert s.mirrors == before
    # a caught-up receiver can get a packet it already spans
    s = DwsSender(PrimeField(2), 1)
    incorporate_arrivals(s, [None])
    g = compute_transmit(s)
    assert incorporate_feedback(s, [True], g).mirrors[0].rank == 1
    assert s.incorporate_feedback([True], g) == [None]


def test_drop_seen():
    s, _ = example_sender_after(1)
    assert drop_seen(s)[1] == set()
    s, _ = example_sender_after(2)
    assert s.dropped == {1}
    assert list(s.queue) == [2]
    s, _ = example_sender_after(6)
    assert s.dropped == {1, 2, 3, 4}
    assert not s.queue


def test_oldest_unseen():
    s, _ = example_sender_after(2)
    incorporate_arrivals(s, [None])
    assert oldest_unseen(s, 0) == 3
    assert oldest_unseen(s, 1) == 2
    fresh = DwsSender(PrimeField(2), 2)
    incorporate_arrivals(fresh, [None] * 3)
    assert oldest_unseen(fresh, 0) == 1
    s, _ = example_sender_after(6)
    assert oldest_unseen(s, 0) is None


def test_field_too_small_is_reported():
    s = DwsSender(PrimeField(2), 3)
    incorporate_arrivals(s, [None] * 2)
    # receiver 0 wants p1; receivers 1 and 2 want p2 but hold different p2 coefficients
    s.mirrors[1].insert({1: 1})
    s.mirrors[2].insert({1: 1, 2: 1})
    with pytest.raises(FieldTooSmallError):
        s.plan()


@settings(max_examples=200)
@given(st.data())
def test_queue_excess_bounded_by_sum_of_deficits(data):
    universe = set(range(data.draw(st.integers(0, 12))))
    subsets = data.draw(st.lists(st.sets(st.sampled_from(sorted(universe))) if universe else st.just(set()), min_size=1, max_size=5))
    common = set.intersection(*subsets)
    assert len(universe) - len(common) <= sum(len(universe) - len(s) for s in subsets)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6))
def test_plan_properties_on_random_runs(n, seed):
    q = smallest_prime_at_least(n)
    f = PrimeField(q)
    rng = random.Random(seed)
    s = DwsSender(f, n)
    rs = [ReceiverState(f) for _ in range(n)]
    for _ in range(60):
        incorporate_arrivals(s, [None] * (rng.random() < 0.5))
        g = compute_transmit(s)
        if g is None:
            continue
        plan = s.last_plan
        assert len(plan.u) <= n
        assert len(g.coeffs) <= n
        assert plan.alphas[0] == 1
        ok = [rng.random() < 0.6 for _ in range(n)]
        incorporate_feedback(s, ok, g)
        for j in range(n):
            want = rs[j].oldest_unseen()
            if ok[j]:
                new = rs[j].receive(g)
                if want <= s.next_index:
                    assert new and rs[j].last_pivot == want
        dropped = drop_seen(s)[1]
        for k in dropped:
            assert all(r.is_seen(k) for r in rs)
        assert len(s.queue) == max(s.next_index - r.rank for r in rs)
