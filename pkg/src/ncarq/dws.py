"""Drop-when-seen sender.

The sender mirrors every receiver's knowledge as an RREF basis over the
packets still in its queue.  Each slot it sends a combination of the
receivers' oldest unseen packets chosen so that every receiver that gets
it sees its next packet, then drops whatever all receivers have seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .coeffspace import Coeffs, KnowledgeBasis
from .field import FieldError, PrimeField
from .receiver import CodedPacket, InvariantViolation


class FieldTooSmallError(FieldError):
    pass


@dataclass
class TransmitPlan:
    u: List[int]
    R: Dict[int, List[int]]
    alphas: List[int]

    def coefficients(self) -> Coeffs:
        return {k: a for k, a in zip(self.u, self.alphas) if a}


class DwsSender:
    """Sender state for the drop-when-seen algorithm.

    ``queue`` maps global index to payload in arrival order.  Mirrors use
    global indices as column keys; the current queue order provides the
    local (compacted) coordinates, see :meth:`mirror_matrix`.
    """

    def __init__(self, f: PrimeField, n: int, keep_drop_log: bool = True):
        if n < 1:
            raise ValueError("need at least one receiver")
        self.field = f
        self.n = n
        self.queue: Dict[int, Optional[List[int]]] = {}
        self.mirrors = [KnowledgeBasis(f) for _ in range(n)]
        self.next_index = 0
        self.dropped: set = set()
        self.n_dropped = 0
        self.keep_drop_log = keep_drop_log
        self.last_plan: Optional[TransmitPlan] = None

    @property
    def dimension(self) -> int:
        return self.next_index

    def incorporate_arrivals(self, payloads: Sequence) -> List[int]:
        """Append arrivals to the queue; returns their global indices.

        Mirrors need no change: absent keys are the appended zero columns.
        """
        new = []
        for p in payloads:
            self.next_index += 1
            self.queue[self.next_index] = p
            new.append(self.next_index)
        return new

    def oldest_unseen(self, j: int) -> Optional[int]:
        rows = self.mirrors[j].rows
        for k in self.queue:
            if k not in rows:
                return k
        return None

    def plan(self) -> Optional[TransmitPlan]:
        if not self.queue:
            return None
        R: Dict[int, List[int]] = {}
        for j in range(self.n):
            u = self.oldest_unseen(j)
            if u is not None:
                R.setdefault(u, []).append(j)
        if not R:
            raise InvariantViolation("nonempty queue but every receiver has seen all of it")
        u = sorted(R)
        q = self.field.q
        alphas = [1]
        for jj in range(1, len(u)):
            target = u[jj]
            forbidden = set()
            for r in R[target]:
                rows = self.mirrors[r].rows
                # coefficient of p_target in y_r = sum_i alpha_i W_r(p_{u_i})
                y = 0
                for i in range(jj):
                    y += alphas[i] * rows[u[i]].get(target, 0)
                forbidden.add(y % q)
            for a in range(q):
                if a not in forbidden:
                    alphas.append(a)
                    break
            else:
                raise FieldTooSmallError(
                    f"no valid coefficient in F_{q} for {len(R[target])} receivers"
                )
        return TransmitPlan(u, R, alphas)

    def compute_transmit(self) -> Optional[CodedPacket]:
        plan = self.plan()
        self.last_plan = plan
        if plan is None:
            return None
        coeffs = plan.coefficients()
        payload = None
        first = self.queue[plan.u[0]]
        if first is not None:
            q = self.field.q
            payload = [0] * len(first)
            for k, a in coeffs.items():
                for i, s in enumerate(self.queue[k]):
                    payload[i] = (payload[i] + a * s) % q
        return CodedPacket(coeffs, payload)

    def incorporate_feedback(self, received: Sequence[bool], g: Optional[CodedPacket]) -> List[Optional[int]]:
        """Insert ``g`` into the mirror of every receiver that got it.

        Returns, per receiver, the new pivot (``None`` if not received or
        not innovative).
        """
        out: List[Optional[int]] = [None] * self.n
        if g is None:
            return out
        for j, ok in enumerate(received):
            if ok:
                out[j] = self.mirrors[j].insert(g.coeffs)
        return out

    def drop_seen(self) -> set:
        """Drop every queued packet that all receivers have seen."""
        common = set(self.mirrors[0].rows.keys())
        for m in self.mirrors[1:]:
            if not common:
                break
            common &= m.rows.keys()
        if not common:
            return common
        for m in self.mirrors:
            m.project_out(common)
        for k in common:
            del self.queue[k]
        self.n_dropped += len(common)
        if self.keep_drop_log:
            self.dropped |= common
        return common

    def mirror_matrix(self, j: int) -> tuple:
        """Mirror ``j`` in current-queue coordinates: (rows, column->global index map)."""
        cols = list(self.queue)
        return self.mirrors[j].to_matrix(cols), cols


def incorporate_arrivals(s: DwsSender, payloads: Sequence) -> DwsSender:
    s.incorporate_arrivals(payloads)
    return s


def compute_transmit(s: DwsSender) -> Optional[CodedPacket]:
    return s.compute_transmit()


def incorporate_feedback(s: DwsSender, received: Sequence[bool], g: Optional[CodedPacket]) -> DwsSender:
    s.incorporate_feedback(received, g)
    return s


def drop_seen(s: DwsSender) -> tuple:
    dropped = s.drop_seen()
    return s, dropped


def oldest_unseen(s: DwsSender, j: int) -> Optional[int]:
    return s.oldest_unseen(j)
