"""Slotted packet-erasure broadcast world.

Each slot runs, in order: Bernoulli arrival at the sender, transmission,
independent per-receiver erasures, feedback, the sender's queue update,
and emission of a :class:`SlotRecord`.  Randomness comes from independent
streams spawned off one master seed, so drop-when-seen and drop-when-decoded
runs with the same seed see the same arrivals and erasures.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, IO, Iterable, List, Optional, Sequence, Union

import numpy as np

from .coeffspace import Coeffs, format_vector
from .dwd import DECODE_RULES, DwdSender
from .dws import DwsSender
from .field import PrimeField, is_prime, smallest_prime_at_least
from .receiver import CodedPacket, InvariantViolation, RankTracker, ReceiverState

log = logging.getLogger(__name__)

ALGORITHMS = ("dws", "dwd")
BLOCK = 4096
DWD_DEFAULT_Q = 257


class ConfigError(ValueError):
    pass


class LosslessnessError(InvariantViolation):
    pass


class ScheduleError(ValueError):
    pass


@dataclass
class SimConfig:
    lam: float
    mu: float
    n: int = 1
    q: Optional[int] = None
    slots: int = 10_000
    seed: int = 0
    algorithm: str = "dws"
    decode_rule: str = "empty"
    warmup: Optional[int] = None
    payload_len: int = 8

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def field_order(self) -> int:
        if self.q is not None:
            return self.q
        if self.algorithm == "dwd":
            return DWD_DEFAULT_Q
        return smallest_prime_at_least(max(2, self.n))

    @property
    def warmup_slots(self) -> int:
        if self.warmup is None:
            return self.slots // 10
        return self.warmup

    def validate(self) -> "SimConfig":
        problems = []
        if not 0 <= self.lam < 1:
            problems.append("lambda must be in [0, 1)")
        if not 0 < self.mu <= 1:
            problems.append("mu must be in (0, 1]")
        if not isinstance(self.n, int) or self.n < 1:
            problems.append("receivers must be >= 1")
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {ALGORITHMS}")
        if self.decode_rule not in DECODE_RULES:
            problems.append(f"decode rule must be one of {DECODE_RULES}")
        if self.q is not None and not is_prime(self.q):
            problems.append(f"field size {self.q} is not prime")
        elif self.algorithm == "dws" and isinstance(self.n, int) and self.field_order < self.n:
            problems.append("dws requires field size >= receivers")
        if self.slots < 0:
            problems.append("slots must be >= 0")
        if self.warmup is not None and not 0 <= self.warmup <= self.slots:
            problems.append("warmup must be in [0, slots]")
        if self.payload_len < 0:
            problems.append("payload length must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.mu > 0 and self.rho >= 1:
            warnings.warn(f"rho = {self.rho:.3f} >= 1: queues are not stable", RuntimeWarning)
        return self

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "rho": self.rho,
            "receivers": self.n,
            "field": self.field_order,
            "slots": self.slots,
            "warmup": self.warmup_slots,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "decode_rule": self.decode_rule if self.algorithm == "dwd" else None,
            "payload_len": self.payload_len,
        }


@dataclass
class SlotRecord:
    slot: int
    arrivals: int
    tx_size: int
    received: tuple
    Q: int
    Qj: tuple
    dropped: int
    decode_front: tuple
    leader: tuple
    # Populated only by worlds built with detailed=True.
    queue: Optional[tuple] = None
    transmitted: Optional[Coeffs] = None
    seen: Optional[tuple] = None
    decoded: Optional[tuple] = None


@dataclass
class SummaryStats:
    config: dict
    slots: int
    warmup: int
    mean_Q: float
    mean_Qj: List[float]
    max_Q: int
    dropped_total: int
    noninnovative_count: int
    idle_receptions: int
    mean_sojourn: Optional[float]
    violations: Dict[str, int]
    decode_front: Optional[List[int]]
    front_trajectory: List[list] = field(default_factory=list)
    engine: str = "exact"

    def to_dict(self) -> dict:
        return asdict(self)


# --- randomness --------------------------------------------------------------


def spawn_streams(seed: int) -> dict:
    """Independent generators for arrivals, erasures, coefficients and payloads."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("arrivals", "erasures", "coefficients", "payloads")
    return {k: np.random.default_rng(s) for k, s in zip(names, children)}


def arrival_blocks(rng: np.random.Generator, lam: float):
    while True:
        yield rng.random(BLOCK) < lam


def erasure_blocks(rng: np.random.Generator, mu: float, n: int):
    while True:
        yield rng.random((BLOCK, n)) < mu


class StochasticSource:
    def __init__(self, cfg: SimConfig, streams: dict):
        self.cfg = cfg
        self._arr = arrival_blocks(streams["arrivals"], cfg.lam)
        self._era = erasure_blocks(streams["erasures"], cfg.mu, cfg.n)
        self._pay = streams["payloads"]
        self._i = BLOCK
        self._a = self._e = None

    def next_slot(self):
        if self._i == BLOCK:
            self._a = next(self._arr).tolist()
            self._e = next(self._era).tolist()
            self._i = 0
        i = self._i
        self._i += 1
        if self._a[i]:
            L = self.cfg.payload_len
            payload = self._pay.integers(0, self.cfg.field_order, size=L).tolist() if L else None
            arrivals = [payload]
        else:
            arrivals = []
        return arrivals, tuple(self._e[i])


class ScriptedSource:
    def __init__(self, slots: Sequence["ScheduledSlot"]):
        self.slots = list(slots)
        self.i = 0

    def next_slot(self):
        if self.i >= len(self.slots):
            raise ScheduleError(f"schedule exhausted after {len(self.slots)} slots")
        s = self.slots[self.i]
        self.i += 1
        return [list(p) if p is not None else None for p in s.arrivals], tuple(s.received)


class DrainSource:
    """No arrivals and a perfect channel."""

    def __init__(self, n: int):
        self.ok = (True,) * n

    def next_slot(self):
        return [], self.ok


# --- the world ----------------------------------------------------------------


class World:
    """One simulation instance: a sender, ``n`` receivers and a slot clock.

    ``check`` enables the per-slot invariants: no negative backlog and,
    under drop-when-seen, a physical queue bounded by the sum of the virtual
    queues and equal to their maximum, with every planned reception
    innovative.  ``check_mirrors`` additionally compares each sender mirror
    with the true receiver basis.  Violations are counted in ``violations``
    and raised when ``strict``.
    """

    def __init__(
        self,
        cfg: SimConfig,
        source=None,
        *,
        detailed: bool = False,
        check: bool = True,
        check_mirrors: bool = False,
        strict: bool = True,
        keep_arrivals: Optional[bool] = None,
    ):
        self.cfg = cfg.validate()
        self.field = PrimeField(cfg.field_order)
        self.n = cfg.n
        self.streams = spawn_streams(cfg.seed)
        self.source = source if source is not None else StochasticSource(cfg, self.streams)
        self.detailed = detailed
        self.check = check
        self.check_mirrors = check_mirrors
        self.strict = strict
        self.violations: Counter = Counter()
        track = cfg.payload_len > 0
        self.track_payloads = track
        if cfg.algorithm == "dws":
            self.sender = DwsSender(self.field, self.n, keep_drop_log=check_mirrors)
            self.receivers = [ReceiverState(self.field, track) for _ in range(self.n)]
        else:
            self.sender = DwdSender(self.field, self.n, self.streams["coefficients"], cfg.decode_rule)
            if cfg.decode_rule == "empty" and not track:
                self.receivers = [RankTracker(self.field) for _ in range(self.n)]
            else:
                self.receivers = [ReceiverState(self.field, track) for _ in range(self.n)]
        self.keep_arrivals = track if keep_arrivals is None else keep_arrivals
        self.arrival_log: Dict[int, list] = {}
        self.arrival_slot: Dict[int, int] = {}
        self.slot = 0
        self.noninnovative = 0
        self.innovation_checks = 0
        self.idle_receptions = 0
        self.sojourn_sum = 0
        self.sojourn_count = 0

    @property
    def arrived(self) -> int:
        return self.sender.next_index

    def virtual_queues(self) -> tuple:
        a = self.sender.next_index
        return tuple(a - r.rank for r in self.receivers)

    def _violate(self, kind: str, msg: str) -> None:
        self.violations[kind] += 1
        if self.strict:
            raise InvariantViolation(f"slot {self.slot}: {msg}")

    def run_slot(self) -> SlotRecord:
        self.slot += 1
        t = self.slot
        sender = self.sender
        receivers = self.receivers
        dws = self.cfg.algorithm == "dws"

        ranks = [r.rank for r in receivers]
        top = max(ranks)
        leader = tuple(x == top for x in ranks)

        # (1) arrivals
        payloads, received = self.source.next_slot()
        new = sender.incorporate_arrivals(payloads)
        for k, p in zip(new, payloads):
            self.arrival_slot[k] = t
            if self.keep_arrivals:
                self.arrival_log[k] = p
        if new and not dws and isinstance(receivers[0], RankTracker):
            for r in receivers:
                r.add_arrivals(len(new))
        arrived = sender.next_index
        queue_before = tuple(sender.queue) if self.detailed else None

        # (2) transmission
        g = sender.compute_transmit() if dws else sender.transmit()

        if dws and self.check and g is not None:
            expected = [r.oldest_unseen() for r in receivers]

        # (3)-(4) reception and feedback
        if g is not None:
            if dws:
                sender.incorporate_feedback(received, g)
            for j, ok in enumerate(received):
                if not ok:
                    continue
                r = receivers[j]
                backlog = arrived - ranks[j]
                innovative = r.receive(g)
                if backlog == 0:
                    self.idle_receptions += 1
                elif not innovative:
                    self.noninnovative += 1
                if dws and self.check and expected[j] <= arrived:
                    self.innovation_checks += 1
                    if not innovative or r.last_pivot != expected[j]:
                        self._violate(
                            "innovation",
                            f"receiver {j} did not see its oldest unseen packet p{expected[j]}",
                        )

        # (5) queue update
        if dws:
            dropped = sender.drop_seen()
        else:
            dropped = sender.process_acks(receivers)
        for k in dropped:
            self.sojourn_sum += t - self.arrival_slot.pop(k)
        self.sojourn_count += len(dropped)

        # (6) record
        Q = len(sender.queue)
        Qj = tuple(arrived - r.rank for r in receivers)
        if self.check:
            if min(Qj) < 0:
                self._violate("negative_backlog", f"negative virtual queue {Qj}")
            if dws and Q > sum(Qj):
                self._violate("queue_bound", f"Q={Q} exceeds sum of virtual queues {Qj}")
            if dws and Q != max(Qj):
                self._violate("queue_max", f"Q={Q} differs from max virtual queue {Qj}")
        if self.check_mirrors and dws:
            for j in range(self.n):
                if not mirror_matches(sender, j, receivers[j]):
                    self._violate("mirror", f"mirror {j} diverged from receiver knowledge")

        rec = SlotRecord(
            slot=t,
            arrivals=len(new),
            tx_size=g.size if g is not None else 0,
            received=received,
            Q=Q,
            Qj=Qj,
            dropped=len(dropped),
            decode_front=tuple(r.front for r in receivers),
            leader=leader,
        )
        if self.detailed:
            rec.queue = queue_before
            rec.transmitted = dict(g.coeffs) if g is not None else None
            if all(isinstance(r, ReceiverState) for r in receivers):
                rec.seen = tuple(tuple(r.seen_set()) for r in receivers)
                rec.decoded = tuple(tuple(r.decoded_set()) for r in receivers)
        return rec


def mirror_matches(sender: DwsSender, j: int, receiver: ReceiverState) -> bool:
    """Whether mirror ``j`` equals the receiver's RREF basis with dropped pivots removed.

    Dropped packets are pivots of every receiver, so their columns are zero
    in all other RREF rows; by uniqueness of RREF, row-for-row equality over
    the queued columns is equivalent to equality of the spanned spaces.
    """
    mirror = sender.mirrors[j].rows
    seen_in_queue = {k for k in sender.queue if receiver.is_seen(k)}
    if seen_in_queue != set(mirror):
        return False
    rows = receiver.basis.rows
    for k, row in mirror.items():
        expected = {k: 1} if k <= receiver.front else rows[k]
        if row != expected:
            return False
    return True


# --- drivers ------------------------------------------------------------------


class _Accumulator:
    def __init__(self, n: int, warmup: int, trajectory_every: int):
        self.n = n
        self.warmup = warmup
        self.count = 0
        self.sum_Q = 0
        self.sum_Qj = [0] * n
        self.max_Q = 0
        self.every = trajectory_every
        self.trajectory: List[list] = []

    def add(self, rec: SlotRecord) -> None:
        if rec.slot > self.warmup:
            self.count += 1
            self.sum_Q += rec.Q
            for j, x in enumerate(rec.Qj):
                self.sum_Qj[j] += x
            if rec.Q > self.max_Q:
                self.max_Q = rec.Q
        if self.every and rec.slot % self.every == 0:
            self.trajectory.append([rec.slot, list(rec.decode_front)])


def summarize(world: World, acc: _Accumulator) -> SummaryStats:
    c = max(acc.count, 1)
    return SummaryStats(
        config=world.cfg.to_dict(),
        slots=world.slot,
        warmup=acc.warmup,
        mean_Q=acc.sum_Q / c,
        mean_Qj=[s / c for s in acc.sum_Qj],
        max_Q=acc.max_Q,
        dropped_total=world.sender.n_dropped,
        noninnovative_count=world.noninnovative,
        idle_receptions=world.idle_receptions,
        mean_sojourn=world.sojourn_sum / world.sojourn_count if world.sojourn_count else None,
        violations=dict(world.violations),
        decode_front=[r.front for r in world.receivers],
        front_trajectory=acc.trajectory,
        engine="exact",
    )


def run_simulation(
    cfg: SimConfig,
    *,
    trace: Optional[IO[str]] = None,
    world: Optional[World] = None,
    record: bool = False,
    **world_kwargs,
):
    """Run ``cfg.slots`` slots and return :class:`SummaryStats`.

    With ``record=True`` returns ``(stats, arrays)`` where ``arrays`` holds
    per-slot ``arrivals``, ``Q`` and ``Qj`` as numpy arrays.
    """
    if world is None:
        world = World(cfg, **world_kwargs)
    acc = _Accumulator(cfg.n, cfg.warmup_slots, max(1, cfg.slots // 1000))
    writer = TraceWriter(trace, cfg.n) if trace is not None else None
    if record:
        arr = np.zeros(cfg.slots, dtype=np.int32)
        Q = np.zeros(cfg.slots, dtype=np.int32)
        Qj = np.zeros((cfg.slots, cfg.n), dtype=np.int32)
    for i in range(cfg.slots):
        rec = world.run_slot()
        acc.add(rec)
        if writer is not None:
            writer.write(rec)
        if record:
            arr[i] = rec.arrivals
            Q[i] = rec.Q
            Qj[i] = rec.Qj
    stats = summarize(world, acc)
    if record:
        return stats, {"arrivals": arr, "Q": Q, "Qj": Qj}
    return stats


def run_drain(world: World, extra_slots: Optional[int] = None) -> dict:
    """Keep running with no arrivals and a perfect channel until every backlog is zero.

    Then every receiver must have decoded every arrival; when payloads are
    tracked, the decoded payloads must equal the originals symbol for symbol.
    """
    if extra_slots is None:
        extra_slots = 10 * sum(world.virtual_queues()) + 100
    world.source = DrainSource(world.n)
    used = 0
    while (any(world.virtual_queues()) or world.sender.queue) and used < extra_slots:
        world.run_slot()
        used += 1
    a = world.arrived
    for j, r in enumerate(world.receivers):
        if r.rank != a or r.front != a:
            raise LosslessnessError(
                f"receiver {j} decoded {r.front} of {a} packets after {used} drain slots"
            )
        if world.track_payloads and world.keep_arrivals:
            for k in range(1, a + 1):
                if r.decoded_payloads.get(k) != world.arrival_log[k]:
                    raise LosslessnessError(f"receiver {j} recovered a wrong payload for p{k}")
    return {"drain_slots": used, "arrived": a, "decode_front": [r.front for r in world.receivers]}


# --- schedules and traces -------------------------------------------------------


@dataclass
class ScheduledSlot:
    arrivals: List[Optional[List[int]]]
    received: tuple


@dataclass
class Schedule:
    slots: List[ScheduledSlot]
    n: int
    q: Optional[int] = None
    algorithm: str = "dws"
    decode_rule: str = "empty"
    seed: int = 0

    @property
    def payload_len(self) -> int:
        for s in self.slots:
            for p in s.arrivals:
                return len(p) if p is not None else 0
        return 0

    def config(self) -> SimConfig:
        return SimConfig(
            lam=0.0,
            mu=1.0,
            n=self.n,
            q=self.q,
            slots=len(self.slots),
            seed=self.seed,
            algorithm=self.algorithm,
            decode_rule=self.decode_rule,
            warmup=0,
            payload_len=self.payload_len,
        )


def symbol_width(q: int) -> int:
    return max(1, ((q - 1).bit_length() + 7) // 8)


def decode_payload(text: str, q: int) -> List[int]:
    """Hex string to field symbols, each a big-endian fixed-width integer."""
    try:
        raw = bytes.fromhex(text)
    except ValueError as e:
        raise ScheduleError(f"bad payload hex {text!r}") from e
    w = symbol_width(q)
    if len(raw) % w:
        raise ScheduleError(f"payload {text!r} is not a whole number of {w}-byte symbols")
    out = [int.from_bytes(raw[i : i + w], "big") for i in range(0, len(raw), w)]
    if any(s >= q for s in out):
        raise ScheduleError(f"payload {text!r} has a symbol outside F_{q}")
    return out


def encode_payload(symbols: Sequence[int], q: int) -> str:
    w = symbol_width(q)
    return b"".join(int(s).to_bytes(w, "big") for s in symbols).hex()


def parse_schedule(data: Union[dict, list]) -> Schedule:
    if isinstance(data, list):
        data = {"slots": data}
    if not isinstance(data, dict) or "slots" not in data:
        raise ScheduleError("schedule must be a list of slots or an object with 'slots'")
    raw = data["slots"]
    n = data.get("receivers")
    if n is None:
        try:
            n = len(raw[0]["received"]) if raw else 1
        except (KeyError, TypeError, IndexError) as e:
            raise ScheduleError(f"slot 1: malformed record ({e})") from e
    algorithm = data.get("algorithm", "dws")
    decode_rule = data.get("decode_rule", "empty")
    q = data.get("field")
    if q is None:
        q = DWD_DEFAULT_Q if algorithm == "dwd" else smallest_prime_at_least(max(2, n))
    slots = []
    width = None
    for i, s in enumerate(raw):
        try:
            arrivals = [decode_payload(p, q) for p in s.get("arrivals", [])]
            received = tuple(bool(b) for b in s["received"])
        except (KeyError, TypeError, AttributeError) as e:
            raise ScheduleError(f"slot {i + 1}: malformed record ({e})") from e
        if len(received) != n:
            raise ScheduleError(f"slot {i + 1}: expected {n} receiver flags, got {len(received)}")
        for p in arrivals:
            if width is None:
                width = len(p)
            elif len(p) != width:
                raise ScheduleError(f"slot {i + 1}: payload lengths differ")
        if width == 0:
            arrivals = [None for _ in arrivals]
        slots.append(ScheduledSlot(arrivals, received))
    return Schedule(slots, n, q, algorithm, decode_rule, int(data.get("seed", 0)))


def load_schedule(path: Union[str, Path]) -> Schedule:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScheduleError(f"{path}: {e}") from e
    return parse_schedule(data)


def run_scripted(schedule: Schedule, horizon: Optional[int] = None, **world_kwargs) -> List[SlotRecord]:
    """Replay a schedule through the same slot pipeline as stochastic runs."""
    if horizon is None:
        horizon = len(schedule.slots)
    if horizon > len(schedule.slots):
        raise ScheduleError(
            f"schedule has {len(schedule.slots)} slots, horizon {horizon} requested"
        )
    world_kwargs.setdefault("detailed", True)
    world_kwargs.setdefault("check_mirrors", True)
    world = scripted_world(schedule, **world_kwargs)
    return [world.run_slot() for _ in range(horizon)]


def scripted_world(schedule: Schedule, **world_kwargs) -> World:
    return World(schedule.config(), ScriptedSource(schedule.slots), **world_kwargs)


class TraceWriter:
    """Per-slot CSV trace."""

    def __init__(self, fh: IO[str], n: int):
        self.w = csv.writer(fh, lineterminator="\n")
        self.w.writerow(
            ["slot", "arrivals", "tx_size", "Q"]
            + [f"Q_{j + 1}" for j in range(n)]
            + ["dropped", "recv_bitmap"]
            + [f"decode_front_{j + 1}" for j in range(n)]
        )

    def write(self, rec: SlotRecord) -> None:
        self.w.writerow(
            [rec.slot, rec.arrivals, rec.tx_size, rec.Q]
            + list(rec.Qj)
            + [rec.dropped, "".join("1" if b else "0" for b in rec.received)]
            + list(rec.decode_front)
        )


def receiver_name(j: int, n: int) -> str:
    return chr(ord("A") + j) if n <= 26 else f"R{j + 1}"


def replay_rows(records: Iterable[SlotRecord], n: int) -> List[List[str]]:
    """Table rows: queue, transmitted combination, channel, per-receiver sets."""

    def fmt(xs):
        return " ".join(f"p{k}" for k in xs) if xs else "-"

    rows = []
    for rec in records:
        row = [
            str(rec.slot),
            fmt(rec.queue),
            format_vector(rec.transmitted) if rec.transmitted is not None else "-",
            " ".join(
                f"{receiver_name(j, n)}{'+' if ok else '-'}" for j, ok in enumerate(rec.received)
            ),
        ]
        for j in range(n):
            dec = rec.decoded[j] if rec.decoded is not None else ()
            seen = rec.seen[j] if rec.seen is not None else ()
            dset = set(dec)
            row += [fmt(dec), fmt([k for k in seen if k not in dset])]
        rows.append(row)
    return rows


def replay_header(n: int) -> List[str]:
    head = ["slot", "queue", "transmitted", "channel"]
    for j in range(n):
        name = receiver_name(j, n)
        head += [f"{name}_decoded", f"{name}_seen_not_decoded"]
    return head
