"""Receiver nodes: knowledge accumulation, seen/decoded queries, payload recovery."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np

from .coeffspace import Coeffs, KnowledgeBasis
from .field import PrimeField


class InvariantViolation(AssertionError):
    """A simulator invariant failed; indicates a bug rather than bad input."""


@dataclass
class CodedPacket:
    coeffs: Coeffs
    payload: Optional[List[int]] = None

    @property
    def support(self) -> List[int]:
        return sorted(self.coeffs)

    @property
    def size(self) -> int:
        return len(self.coeffs)


class DenseCodedPacket:
    """Coefficients of consecutive packets ``start, start+1, ...`` held as an array."""

    def __init__(self, start: int, vec: np.ndarray, payload: Optional[List[int]] = None):
        self.start = start
        self.vec = vec
        self.payload = payload

    @cached_property
    def coeffs(self) -> Coeffs:
        return {self.start + int(i): int(self.vec[i]) for i in np.flatnonzero(self.vec)}

    @property
    def support(self) -> List[int]:
        return sorted(self.coeffs)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.vec))


class ReceiverState:
    """Ground-truth receiver over all-time global packet indices.

    Receivers never forget columns.  Packets ``1..front`` that are decoded
    are kept out of ``basis`` as an implicit identity block, which keeps the
    working basis as small as the undecoded window.
    """

    def __init__(self, f: PrimeField, track_payloads: bool = False):
        self.field = f
        self.basis = KnowledgeBasis(f, track_payloads=track_payloads)
        self.track_payloads = track_payloads
        self.front = 0
        self.decoded_payloads: Dict[int, List[int]] = {}
        self._decoded: set = set()
        self.last_pivot: Optional[int] = None
        self.newly_decoded: List[int] = []

    @property
    def rank(self) -> int:
        return self.front + len(self.basis.rows)

    def receive(self, pkt: CodedPacket) -> bool:
        """Absorb a coded packet; returns whether it was innovative."""
        q = self.field.q
        coeffs = pkt.coeffs
        payload = pkt.payload if self.track_payloads else None
        if self.track_payloads and payload is None:
            raise ValueError("receiver tracks payloads but packet has none")
        front = self.front
        if front and any(k <= front for k in coeffs):
            coeffs = dict(coeffs)
            if payload is not None:
                payload = list(payload)
            for k in [k for k in coeffs if k <= front]:
                c = coeffs.pop(k)
                if payload is not None:
                    known = self.decoded_payloads[k]
                    for i, s in enumerate(known):
                        payload[i] = (payload[i] - c * s) % q
        self.newly_decoded = []
        pivot = self.basis.insert(coeffs, payload)
        self.last_pivot = pivot
        if pivot is None:
            return False
        rows = self.basis.rows
        for p, row in rows.items():
            if len(row) == 1 and p not in self._decoded:
                self._decoded.add(p)
                self.newly_decoded.append(p)
                if self.track_payloads:
                    self.decoded_payloads[p] = list(self.basis.payloads[p])
        self.newly_decoded.sort()
        while (self.front + 1) in self._decoded:
            k = self.front + 1
            del rows[k]
            if self.track_payloads:
                del self.basis.payloads[k]
            self._decoded.discard(k)
            self.front = k
        return True

    def is_seen(self, k: int) -> bool:
        return 0 < k <= self.front or k in self.basis.rows

    def is_decoded(self, k: int) -> bool:
        return 0 < k <= self.front or k in self._decoded

    def seen_set(self) -> List[int]:
        return list(range(1, self.front + 1)) + sorted(self.basis.rows)

    def decoded_set(self) -> List[int]:
        return list(range(1, self.front + 1)) + sorted(self._decoded)

    def oldest_unseen(self) -> int:
        """Smallest packet index not yet seen (may not have arrived yet)."""
        k = self.front + 1
        rows = self.basis.rows
        while k in rows:
            k += 1
        return k

    def front_of_contiguous_knowledge(self) -> int:
        return self.front

    def virtual_queue_size(self, sender_dim: int) -> int:
        r = self.rank
        if sender_dim < r:
            raise InvariantViolation(
                f"receiver rank {r} exceeds sender dimension {sender_dim}"
            )
        return sender_dim - r

    def knowledge_basis(self) -> KnowledgeBasis:
        """Full RREF basis in global coordinates, retired identity rows included."""
        b = KnowledgeBasis(self.field)
        for k in range(1, self.front + 1):
            b.rows[k] = {k: 1}
        for p, row in self.basis.rows.items():
            b.rows[p] = dict(row)
        return b


def receive(r: ReceiverState, pkt: CodedPacket) -> bool:
    return r.receive(pkt)


def virtual_queue_size(r: ReceiverState, sender_dim: int) -> int:
    return r.virtual_queue_size(sender_dim)


def front_of_contiguous_knowledge(r: ReceiverState) -> int:
    return r.front_of_contiguous_knowledge()


class RankTracker:
    """Exact rank tracking without payloads or decoding.

    Keeps a basis of the annihilator of the receiver's knowledge space,
    restricted to packets that arrived since the receiver last caught up.
    Its row count is the receiver's backlog in degrees of freedom, so each
    reception costs O(backlog x window) instead of O(rank x window).
    Used by the drop-when-decoded sender, whose dense random combinations
    make a full RREF expensive.
    """

    def __init__(self, f: PrimeField):
        self.field = f
        self.arrived = 0
        self.base = 1
        self.H = np.zeros((0, 0), dtype=np.int64)
        self.last_pivot = None
        self.newly_decoded: List[int] = []

    @property
    def backlog(self) -> int:
        return self.H.shape[0]

    @property
    def rank(self) -> int:
        return self.arrived - self.H.shape[0]

    @property
    def front(self) -> int:
        # Everything is decoded exactly when the backlog is empty.
        return self.arrived if not self.H.shape[0] else self.base - 1

    def add_arrivals(self, count: int) -> None:
        if count <= 0:
            return
        r, w = self.H.shape
        if r == 0:
            self.base = self.arrived + 1
            self.H = np.eye(count, dtype=np.int64)
        else:
            H = np.zeros((r + count, w + count), dtype=np.int64)
            H[:r, :w] = self.H
            H[r:, w:] = np.eye(count, dtype=np.int64)
            self.H = H
        self.arrived += count

    def receive(self, pkt: CodedPacket) -> bool:
        H = self.H
        r, w = H.shape
        self.newly_decoded = []
        if r == 0:
            return False
        q = self.field.q
        base = self.base
        vec = getattr(pkt, "vec", None)
        if vec is not None and pkt.start <= base and pkt.start + len(vec) == base + w:
            g = vec[base - pkt.start :]
        else:
            g = np.zeros(w, dtype=np.int64)
            for k, c in pkt.coeffs.items():
                if k >= base:
                    g[k - base] = c
        s = H @ g % q
        nz = np.flatnonzero(s)
        if nz.size == 0:
            return False
        i = nz[0]
        # eliminate row i from the others, then drop it (row order is irrelevant)
        factor = s * self.field.inv(int(s[i])) % q
        row = H[i].copy()
        H -= np.outer(factor, row)
        H %= q
        if i != r - 1:
            H[i] = H[r - 1]
        self.H = H[: r - 1]
        if r == 1:
            self.newly_decoded = list(range(base, self.arrived + 1))
            self.H = np.zeros((0, 0), dtype=np.int64)
        return True

    def virtual_queue_size(self, sender_dim: int) -> int:
        if sender_dim < self.rank:
            raise InvariantViolation("receiver rank exceeds sender dimension")
        return sender_dim - self.rank
