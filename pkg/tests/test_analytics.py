import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncarq.analytics import (
    NotPositiveRecurrent,
    QueueModel,
    analytic_summary,
    dwd_queue_lower_bound,
    dws_queue_upper_bound,
    expected_emptying_delay,
    expected_emptying_delay_series,
    expected_virtual_queue,
    first_passage_to_zero,
    gth_stationary,
    mc_first_passage,
    mc_virtual_queue,
    numeric_stationary,
    stationary_dist,
    total_variation_to_geometric,
    transition_matrix,
)


def test_stationary_examples():
    m = QueueModel(0.4, 0.8)
    assert m.alpha == pytest.approx(1 / 6)
    assert stationary_dist(m, 0) == pytest.approx(5 / 6)
    assert stationary_dist(QueueModel(0.0, 0.5), 0) == 1
    assert sum(stationary_dist(QueueModel(0.45, 0.5), k) for k in range(5000)) == pytest.approx(1)


def test_expected_virtual_queue_examples():
    assert expected_virtual_queue(QueueModel(0.45, 0.5)) == pytest.approx(4.5)
    assert expected_virtual_queue(QueueModel(0.0, 0.5)) == 0
    assert expected_virtual_queue(QueueModel(0.7, 1.0)) == 0


def test_first_passage_examples():
    assert first_passage_to_zero(QueueModel(0.3, 0.6), 3) == pytest.approx(10.0)
    assert first_passage_to_zero(QueueModel(0.3, 0.6), 0) == 0
    assert first_passage_to_zero(QueueModel(0.0, 1.0), 1) == 1.0
    with pytest.raises(NotPositiveRecurrent):
        first_passage_to_zero(QueueModel(0.5, 0.5), 1)


def test_emptying_delay_matches_its_series():
    # the defining series sums to (1-mu)/mu / (1-rho)^2, i.e. 4.0 here
    m = QueueModel(0.25, 0.5)
    assert expected_emptying_delay(m) == pytest.approx(4.0)
    assert abs(expected_emptying_delay(m) - expected_emptying_delay_series(m)) < 1e-9
    assert expected_emptying_delay(QueueModel(1e-9, 0.5)) == pytest.approx(1.0, rel=1e-6)
    assert expected_emptying_delay(QueueModel(0.0, 1.0)) == 0


def test_bounds():
    m = QueueModel(0.45, 0.5)
    assert dwd_queue_lower_bound(m) == pytest.approx(45.0)
    assert dwd_queue_lower_bound(QueueModel(0.0, 0.5)) == 0
    lbs = [dwd_queue_lower_bound(QueueModel(r * 0.5, 0.5)) for r in (0.5, 0.8, 0.9, 0.95, 0.99)]
    assert lbs == sorted(lbs)
    assert dws_queue_upper_bound(m, 2) == pytest.approx(9.0)
    assert dws_queue_upper_bound(m, 1) == expected_virtual_queue(m)
    assert dws_queue_upper_bound(QueueModel(0.0, 0.5), 3) == 0
    assert analytic_summary(0.45, 0.5, 2) == pytest.approx({"EQj": 4.5, "dwd_lb": 45.0, "dws_ub": 9.0})
    assert analytic_summary(0.5, 0.5, 2) == {"EQj": None, "dwd_lb": None, "dws_ub": None}


@pytest.mark.parametrize(
    "fn",
    [
        lambda m: stationary_dist(m, 0),
        expected_virtual_queue,
        expected_emptying_delay,
        dwd_queue_lower_bound,
        lambda m: dws_queue_upper_bound(m, 2),
        numeric_stationary,
    ],
)
@pytest.mark.parametrize("lam,mu", [(0.5, 0.5), (0.6, 0.5), (0.9, 0.3)])
def test_unstable_models_are_rejected(fn, lam, mu):
    with pytest.raises(NotPositiveRecurrent):
        fn(QueueModel(lam, mu))


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_closed_forms_finite_and_positive_when_stable(lam, mu):
    m = QueueModel(lam, mu)
    if m.rho >= 1:
        with pytest.raises(NotPositiveRecurrent):
            expected_virtual_queue(m)
        return
    assert m.alpha < 1
    for v in (expected_virtual_queue(m), expected_emptying_delay(m), dwd_queue_lower_bound(m)):
        assert math.isfinite(v) and v > 0


def test_numeric_stationary_examples():
    m = QueueModel(0.4, 0.8)
    pi = numeric_stationary(m, 1000)
    assert total_variation_to_geometric(m, pi) < 1e-9
    empty = numeric_stationary(QueueModel(0.0, 0.5), 50)
    assert empty[0] == 1 and empty[1:].sum() == 0
    # reversibility, checked where the probabilities are normal floats
    ok = np.flatnonzero(pi[1:] > 1e-290)
    assert np.all(np.abs(pi[1:][ok] / pi[:-1][ok] - m.alpha) < 1e-10)


def test_numeric_stationary_guards():
    with pytest.raises(ValueError):
        numeric_stationary(QueueModel(0.4, 0.5), truncation=5)
    from ncarq.analytics import NumericError

    with pytest.raises(NumericError, match="truncation"):
        numeric_stationary(QueueModel(0.47, 0.5), truncation=50)


def test_gth_on_a_small_chain():
    P = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
    assert np.allclose(gth_stationary(P), [0.25, 0.5, 0.25])
    P = transition_matrix(QueueModel(0.3, 0.6), 20)
    assert np.allclose(P.sum(axis=1), 1)


def test_monte_carlo_oracles():
    rng = np.random.default_rng(1)
    m = QueueModel(0.3, 0.6)
    assert mc_first_passage(m, 3, 20000, rng) == pytest.approx(10.0, rel=0.03)
    assert mc_first_passage(m, 0, 10, rng) == 0
    m = QueueModel(0.4, 0.5)
    assert mc_virtual_queue(m, 400000, rng, warmup=10000) == pytest.approx(expected_virtual_queue(m), rel=0.08)
