"""Degree-of-freedom level simulation for long runs.

Tracks only counts: arrivals and each receiver's backlog in degrees of
freedom.  It consumes the arrival and erasure streams exactly as
:class:`ncarq.engine.World` does, so for the same seed it reproduces the
exact engine's virtual queues slot for slot.  The physical queues follow
from the backlogs:

* drop-when-seen: receivers see packets in order, so the queue holds the
  packets beyond the shortest seen prefix, ``Q = max_j Q_j``;
* drop-when-decoded (emptying rule): a packet leaves once every receiver's
  backlog has hit zero since it arrived, ``Q(t) = A(t) - A(min_j e_j(t))``
  with ``e_j(t)`` the last slot up to ``t`` at which ``Q_j`` was zero.

Both rest on every transmission being innovative for backlogged receivers,
which holds exactly for drop-when-seen and is the analysed model for
drop-when-decoded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import BLOCK, SimConfig, SummaryStats, arrival_blocks, erasure_blocks, spawn_streams


@dataclass
class DofPaths:
    arrivals: np.ndarray  # per slot, 0/1
    received: np.ndarray  # slots x n, bool
    Qj: np.ndarray  # slots x n
    Q_dws: np.ndarray
    Q_dwd: np.ndarray


def draw_channel(cfg: SimConfig, slots: int):
    streams = spawn_streams(cfg.seed)
    nblocks = -(-slots // BLOCK)
    arr = arrival_blocks(streams["arrivals"], cfg.lam)
    era = erasure_blocks(streams["erasures"], cfg.mu, cfg.n)
    a = np.concatenate([next(arr) for _ in range(nblocks)])[:slots] if slots else np.zeros(0, bool)
    e = np.concatenate([next(era) for _ in range(nblocks)])[:slots] if slots else np.zeros((0, cfg.n), bool)
    return a.astype(np.int64), e


def reflected_walk(steps: np.ndarray) -> np.ndarray:
    """Lindley recursion ``x_t = max(x_{t-1} + s_t, 0)`` from ``x_0 = 0``, along axis 0."""
    S = np.cumsum(steps, axis=0)
    floor = np.minimum.accumulate(np.minimum(S, 0), axis=0)
    return S - floor


def dof_paths(cfg: SimConfig, slots: int | None = None) -> DofPaths:
    T = cfg.slots if slots is None else slots
    a, e = draw_channel(cfg, T)
    Qj = reflected_walk(a[:, None] - e.astype(np.int64))
    Q_dws = Qj.max(axis=1) if T else np.zeros(0, np.int64)
    t = np.arange(1, T + 1)
    last_empty = np.maximum.accumulate(np.where(Qj == 0, t[:, None], 0), axis=0)
    oldest = last_empty.min(axis=1)
    A = np.concatenate([[0], np.cumsum(a)])
    Q_dwd = A[t] - A[oldest]
    return DofPaths(a, e, Qj, Q_dws, Q_dwd)


def run_dof(cfg: SimConfig, paths: DofPaths | None = None) -> SummaryStats:
    """Summary statistics for ``cfg.algorithm`` from the degree-of-freedom paths."""
    cfg.validate()
    if cfg.algorithm == "dwd" and cfg.decode_rule != "empty":
        raise ValueError("the degree-of-freedom engine models only the emptying decode rule")
    p = paths if paths is not None else dof_paths(cfg)
    Q = p.Q_dws if cfg.algorithm == "dws" else p.Q_dwd
    w = cfg.warmup_slots
    Qs, Qjs = Q[w:], p.Qj[w:]
    total = int(p.arrivals.sum())
    return SummaryStats(
        config=cfg.to_dict(),
        slots=len(Q),
        warmup=w,
        mean_Q=float(Qs.mean()) if len(Qs) else 0.0,
        mean_Qj=[float(x) for x in Qjs.mean(axis=0)] if len(Qs) else [0.0] * cfg.n,
        max_Q=int(Qs.max()) if len(Qs) else 0,
        dropped_total=total - (int(Q[-1]) if len(Q) else 0),
        noninnovative_count=0,
        idle_receptions=_idle_receptions(p, Q),
        mean_sojourn=None,
        violations={},
        decode_front=None,
        engine="dof",
    )


def _idle_receptions(p: DofPaths, Q: np.ndarray) -> int:
    """Receptions by caught-up receivers in slots where something was sent."""
    if not len(Q):
        return 0
    prev = lambda x: np.concatenate([np.zeros((1,) + x.shape[1:], x.dtype), x[:-1]])
    sent = prev(Q) + p.arrivals > 0
    caught_up = prev(p.Qj) + p.arrivals[:, None] == 0
    return int((p.received & caught_up & sent[:, None]).sum())
