"""Drop-when-decoded baseline sender.

Transmits a uniformly random combination of its whole queue and drops a
packet once every receiver has acknowledged decoding it.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

import numpy as np

from .field import PrimeField
from .receiver import CodedPacket, DenseCodedPacket

DECODE_RULES = ("empty", "exact")


class DwdSender:
    """Sender state for drop-when-decoded.

    ``decode_rule`` picks when a receiver acknowledges: ``"empty"`` means
    all arrived packets are ACKed when the receiver's backlog in degrees of
    freedom reaches zero; ``"exact"`` ACKs exactly the packets the receiver
    can decode.
    """

    def __init__(self, f: PrimeField, n: int, rng: np.random.Generator, decode_rule: str = "empty"):
        if decode_rule not in DECODE_RULES:
            raise ValueError(f"decode_rule must be one of {DECODE_RULES}")
        self.field = f
        self.n = n
        self.rng = rng
        self.decode_rule = decode_rule
        self.queue: Dict[int, Optional[List[int]]] = {}
        self.next_index = 0
        self.acked_through = [0] * n
        self.decoded_by: List[set] = [set() for _ in range(n)]
        self.n_dropped = 0

    @property
    def dimension(self) -> int:
        return self.next_index

    def incorporate_arrivals(self, payloads: Sequence) -> List[int]:
        new = []
        for p in payloads:
            self.next_index += 1
            self.queue[self.next_index] = p
            new.append(self.next_index)
        return new

    def transmit(self) -> Optional[CodedPacket]:
        if not self.queue:
            return None
        q = self.field.q
        idx = list(self.queue)
        draw = self.rng.integers(0, q, size=len(idx))
        first = self.queue[idx[0]]
        payload = None
        if first is not None:
            payload = [0] * len(first)
            for k, c in zip(idx, draw.tolist()):
                if c:
                    for i, s in enumerate(self.queue[k]):
                        payload[i] = (payload[i] + c * s) % q
        if idx[-1] - idx[0] + 1 == len(idx):
            return DenseCodedPacket(idx[0], draw, payload)
        return CodedPacket({k: c for k, c in zip(idx, draw.tolist()) if c}, payload)

    def process_acks(self, receivers: Sequence) -> set:
        """Collect slot-end ACKs and drop what every receiver has decoded."""
        if self.decode_rule == "empty":
            for j, r in enumerate(receivers):
                if r.rank == self.next_index:
                    self.acked_through[j] = self.next_index
            limit = min(self.acked_through)
            dropped = set()
            for k in list(self.queue):
                if k > limit:
                    break
                del self.queue[k]
                dropped.add(k)
        else:
            for j, r in enumerate(receivers):
                acked = self.decoded_by[j]
                for k in self.queue:
                    if k not in acked and r.is_decoded(k):
                        acked.add(k)
            dropped = {k for k in self.queue if all(k in a for a in self.decoded_by)}
            for k in dropped:
                del self.queue[k]
                for a in self.decoded_by:
                    a.discard(k)
        self.n_dropped += len(dropped)
        return dropped


def dwd_transmit(s: DwdSender) -> Optional[CodedPacket]:
    return s.transmit()


def dwd_process_acks(s: DwdSender, receivers: Sequence) -> tuple:
    dropped = s.process_acks(receivers)
    return s, dropped
