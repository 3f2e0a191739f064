"""Reliable broadcast over a packet-erasure channel with feedback-based network coding.

Implements the drop-when-seen sender (acknowledging degrees of freedom via
"seen" packets) and the drop-when-decoded baseline, a slotted simulator for
both, and the closed-form queue analysis they are compared against.
"""

from .analytics import QueueModel
from .coeffspace import KnowledgeBasis
from .dwd import DwdSender
from .dws import DwsSender
from .engine import SimConfig, SlotRecord, SummaryStats, World, run_drain, run_scripted, run_simulation
from .field import PrimeField
from .receiver import CodedPacket, ReceiverState

__all__ = [
    "CodedPacket",
    "DwdSender",
    "DwsSender",
    "KnowledgeBasis",
    "PrimeField",
    "QueueModel",
    "ReceiverState",
    "SimConfig",
    "SlotRecord",
    "SummaryStats",
    "World",
    "run_drain",
    "run_scripted",
    "run_simulation",
]

__version__ = "0.1.0"
