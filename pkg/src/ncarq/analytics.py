"""Closed-form queue results and independent numeric oracles.

The virtual queue of a receiver is a birth-death chain on {0, 1, ...}:
it moves up with probability lam*(1-mu), down with probability
mu*(1-lam) from any state k >= 1, and otherwise stays.  A packet arriving
to an empty queue can be served in its own slot, so state 0 only moves
up when the arrival is erased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class NotPositiveRecurrent(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QueueModel:
    lam: float
    mu: float

    def __post_init__(self):
        if not 0 <= self.lam <= 1 or not 0 < self.mu <= 1:
            raise ValueError(f"need 0 <= lambda <= 1 and 0 < mu <= 1, got {self.lam}, {self.mu}")

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def alpha(self) -> float:
        if self.lam == 1:
            return math.inf
        return self.lam * (1 - self.mu) / (self.mu * (1 - self.lam))

    @property
    def p_up(self) -> float:
        return self.lam * (1 - self.mu)

    @property
    def p_down(self) -> float:
        return self.mu * (1 - self.lam)

    def require_stable(self) -> None:
        if self.rho >= 1:
            raise NotPositiveRecurrent(f"rho = {self.rho:.4g} >= 1: chain is not positive recurrent")


def stationary_dist(m: QueueModel, k: int) -> float:
    m.require_stable()
    a = m.alpha
    return (1 - a) * a**k


def expected_virtual_queue(m: QueueModel) -> float:
    m.require_stable()
    return (1 - m.mu) * m.rho / (1 - m.rho)


def first_passage_to_zero(m: QueueModel, u: int) -> float:
    """Mean number of slots for the chain to go from ``u`` to 0."""
    if m.lam >= m.mu:
        raise NotPositiveRecurrent("first passage to 0 needs lambda < mu")
    if u < 0:
        raise ValueError("state must be >= 0")
    return u / (m.mu - m.lam)


def expected_emptying_delay(m: QueueModel) -> float:
    """Mean slots from a packet's arrival slot until its virtual queue next empties.

    Averages the first passage time over the state the arrival sees and
    whether its own slot was erased.  The sum evaluates to
    ``(1-mu)/mu / (1-rho)**2``.
    """
    m.require_stable()
    return (1 - m.mu) / m.mu / (1 - m.rho) ** 2


def expected_emptying_delay_series(m: QueueModel, terms: int = 10_000) -> float:
    """Direct truncated summation of the quantity in :func:`expected_emptying_delay`."""
    m.require_stable()
    total = 0.0
    for k in range(terms + 1):
        total += stationary_dist(m, k) * (
            m.mu * first_passage_to_zero(m, k) + (1 - m.mu) * first_passage_to_zero(m, k + 1)
        )
    return total


def dwd_queue_lower_bound(m: QueueModel) -> float:
    return m.lam * expected_emptying_delay(m)


def dws_queue_upper_bound(m: QueueModel, n: int) -> float:
    return n * expected_virtual_queue(m)


def analytic_summary(lam: float, mu: float, n: int) -> dict:
    """Closed forms for a run's parameters; ``None`` where the chain is unstable."""
    m = QueueModel(lam, mu)
    if m.rho >= 1:
        return {"EQj": None, "dwd_lb": None, "dws_ub": None}
    return {
        "EQj": expected_virtual_queue(m),
        "dwd_lb": dwd_queue_lower_bound(m),
        "dws_ub": dws_queue_upper_bound(m, n),
    }


# --- numeric oracles ------------------------------------------------------------


def transition_matrix(m: QueueModel, K: int) -> np.ndarray:
    """Virtual-queue chain truncated to states 0..K (up-moves from K are blocked)."""
    P = np.zeros((K + 1, K + 1))
    for k in range(K + 1):
        if k < K:
            P[k, k + 1] = m.p_up
        if k > 0:
            P[k, k - 1] = m.p_down
        P[k, k] = 1 - P[k].sum()
    return P


def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible-or-unichain stochastic matrix.

    Grassmann-Taksar-Heyman state reduction: subtraction-free, so it keeps
    high relative accuracy even for probabilities far below machine epsilon.
    Only the nonzero pattern of each eliminated row/column is touched.
    """
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0:
            raise NumericError(f"state {k} cannot reach lower states; reduction is singular")
        col = np.flatnonzero(A[:k, k])
        row = np.flatnonzero(A[k, :k])
        A[col, k] /= s
        if col.size and row.size:
            A[np.ix_(col, row)] += np.outer(A[col, k], A[k, row])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def numeric_stationary(m: QueueModel, truncation: int = 1000, tail_tol: float = 1e-12) -> np.ndarray:
    m.require_stable()
    if truncation < 10:
        raise ValueError("truncation must be >= 10")
    pi = gth_stationary(transition_matrix(m, truncation))
    if not np.all(np.isfinite(pi)):
        raise NumericError("non-finite stationary vector")
    if pi[-1] >= tail_tol:
        raise NumericError(f"truncation {truncation} too small: mass {pi[-1]:.3g} at the boundary")
    return pi


def total_variation_to_geometric(m: QueueModel, pi: np.ndarray) -> float:
    k = np.arange(len(pi))
    a = m.alpha
    geo = (1 - a) * a**k
    tail = a ** len(pi)
    return 0.5 * (float(np.abs(pi - geo).sum()) + tail)


def mc_first_passage(m: QueueModel, u: int, trials: int, rng: np.random.Generator,
                     max_steps: int = 10**7) -> float:
    """Monte-Carlo mean first passage time from ``u`` to 0, simulated slot by slot."""
    state = np.full(trials, u, dtype=np.int64)
    t = np.zeros(trials, dtype=np.int64)
    alive = state > 0
    steps = 0
    while alive.any():
        idx = np.flatnonzero(alive)
        arrive = rng.random(idx.size) < m.lam
        served = rng.random(idx.size) < m.mu
        state[idx] += arrive.astype(np.int64) - served.astype(np.int64)
        t[idx] += 1
        alive[idx] = state[idx] > 0
        steps += 1
        if steps > max_steps:
            raise NumericError("Monte-Carlo first passage did not terminate")
    return float(t.mean())


def mc_virtual_queue(m: QueueModel, slots: int, rng: np.random.Generator, warmup: int = 0) -> float:
    """Time-average of the chain simulated from an empty queue, one slot at a time."""
    up, down = m.p_up, m.p_up + m.p_down
    x = 0
    total = 0
    for t, r in enumerate(rng.random(slots).tolist()):
        if r < up:
            x += 1
        elif r < down and x > 0:
            x -= 1
        if t >= warmup:
            total += x
    return total / max(slots - warmup, 1)
