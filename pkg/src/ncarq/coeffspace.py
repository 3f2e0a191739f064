"""Coefficient vectors and incremental RREF knowledge bases.

A coefficient vector is a plain ``dict`` mapping a global packet index
(1-based arrival order) to a nonzero field element.  Zero entries are never
stored.  A :class:`KnowledgeBasis` keeps a set of such vectors in reduced
row echelon form, keyed by pivot column, so that "has the node seen packet
k" is a dictionary lookup.
"""

from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

from .field import PrimeField

Coeffs = Dict[int, int]


class OracleScaleError(RuntimeError):
    """Raised when exhaustive span enumeration would be too large."""


class NotSeenError(KeyError):
    pass


def make_vector(entries: dict, f: PrimeField) -> Coeffs:
    """Normalize ``entries`` into a coefficient vector over ``f``."""
    out = {}
    for k, c in entries.items():
        if k < 1:
            raise ValueError(f"packet indices are 1-based, got {k}")
        c %= f.q
        if c:
            out[int(k)] = c
    return out


def from_dense(row: Sequence[int], f: PrimeField, columns: Optional[Sequence[int]] = None) -> Coeffs:
    """Build a vector from a dense row; ``columns`` gives the global index of each position."""
    if columns is None:
        columns = range(1, len(row) + 1)
    return make_vector(dict(zip(columns, row)), f)


def leading_index(v: Coeffs) -> Optional[int]:
    return min(v) if v else None


def combine(terms: Iterable[tuple], f: PrimeField) -> Coeffs:
    """Sum of ``c * v`` over ``(c, v)`` pairs."""
    q = f.q
    acc: Coeffs = {}
    for c, v in terms:
        c %= q
        if not c:
            continue
        for k, x in v.items():
            y = (acc.get(k, 0) + c * x) % q
            if y:
                acc[k] = y
            else:
                acc.pop(k, None)
    return acc


def format_vector(v: Coeffs) -> str:
    """Render as ``p1+2*p3``; the zero vector renders as ``0``."""
    if not v:
        return "0"
    parts = []
    for k in sorted(v):
        c = v[k]
        parts.append(f"p{k}" if c == 1 else f"{c}*p{k}")
    return "+".join(parts)


class KnowledgeBasis:
    """RREF basis of a node's knowledge space.

    ``rows`` maps each pivot column to its row; the row's entry at the pivot
    is 1 and no other row has a nonzero entry in that column.  When the
    basis is created with ``track_payloads=True`` every row also carries the
    matching combination of payload symbols, updated by the same row
    operations.
    """

    __slots__ = ("field", "rows", "payloads")

    def __init__(self, field: PrimeField, track_payloads: bool = False):
        self.field = field
        self.rows: Dict[int, Coeffs] = {}
        self.payloads: Optional[Dict[int, List[int]]] = {} if track_payloads else None

    @classmethod
    def from_vectors(cls, f: PrimeField, vectors: Iterable) -> "KnowledgeBasis":
        b = cls(f)
        for v in vectors:
            if not isinstance(v, dict):
                v = from_dense(v, f)
            b.insert(v)
        return b

    @property
    def pivots(self):
        return self.rows.keys()

    @property
    def rank(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeBasis):
            return NotImplemented
        return self.field == other.field and self.rows == other.rows

    def __repr__(self) -> str:
        body = ", ".join(format_vector(r) for r in self.ordered_rows())
        return f"KnowledgeBasis(q={self.field.q}, rows=[{body}])"

    def copy(self) -> "KnowledgeBasis":
        b = KnowledgeBasis(self.field)
        b.rows = {p: dict(r) for p, r in self.rows.items()}
        if self.payloads is not None:
            b.payloads = {p: list(x) for p, x in self.payloads.items()}
        return b

    def ordered_rows(self) -> List[Coeffs]:
        return [self.rows[p] for p in sorted(self.rows)]

    def columns(self) -> List[int]:
        cols = set()
        for r in self.rows.values():
            cols.update(r)
        return sorted(cols)

    def to_matrix(self, columns: Optional[Sequence[int]] = None) -> List[List[int]]:
        """Dense rows in pivot order over ``columns`` (local column order)."""
        if columns is None:
            columns = self.columns()
        return [[r.get(c, 0) for c in columns] for r in self.ordered_rows()]

    def reduce(self, v: Coeffs) -> Coeffs:
        """Return ``v`` minus its projection onto the pivot rows."""
        q = self.field.q
        rows = self.rows
        w = dict(v)
        for k in [k for k in v if k in rows]:
            c = w.pop(k)
            for col, rc in rows[k].items():
                if col != k:
                    x = (w.get(col, 0) - c * rc) % q
                    if x:
                        w[col] = x
                    else:
                        del w[col]
        return w

    def contains(self, v: Coeffs) -> bool:
        return not self.reduce(v)

    def insert(self, v: Coeffs, payload: Optional[Sequence[int]] = None) -> Optional[int]:
        """Add ``v`` to the basis, keeping RREF.

        Returns the new pivot column if ``v`` was innovative, else ``None``.
        """
        q = self.field.q
        rows = self.rows
        track = self.payloads is not None
        if track:
            if payload is None:
                raise ValueError("basis tracks payloads; a payload is required")
            pl = list(payload)
            payloads = self.payloads
        w = dict(v)
        # Rows have zeros at every other pivot, so one pass suffices.
        for k in [k for k in v if k in rows]:
            c = w.pop(k)
            for col, rc in rows[k].items():
                if col != k:
                    x = (w.get(col, 0) - c * rc) % q
                    if x:
                        w[col] = x
                    else:
                        del w[col]
            if track:
                prow = payloads[k]
                for i, s in enumerate(prow):
                    pl[i] = (pl[i] - c * s) % q
        if not w:
            return None
        lead = min(w)
        c = w[lead]
        if c != 1:
            ic = self.field.inv(c)
            for col in w:
                w[col] = w[col] * ic % q
            if track:
                pl = [s * ic % q for s in pl]
        for p, row in rows.items():
            c = row.get(lead)
            if c:
                for col, x in w.items():
                    y = (row.get(col, 0) - c * x) % q
                    if y:
                        row[col] = y
                    else:
                        del row[col]
                if track:
                    prow = payloads[p]
                    for i, s in enumerate(pl):
                        prow[i] = (prow[i] - c * s) % q
        rows[lead] = w
        if track:
            payloads[lead] = pl
        return lead

    def is_seen(self, k: int) -> bool:
        return k in self.rows

    def witness(self, k: int) -> Coeffs:
        """The unique known combination ``p_k + (later unseen packets)``."""
        try:
            return self.rows[k]
        except KeyError:
            raise NotSeenError(f"packet {k} has not been seen") from None

    def is_decoded(self, k: int) -> bool:
        r = self.rows.get(k)
        return r is not None and len(r) == 1

    def decoded(self) -> List[int]:
        return sorted(p for p, r in self.rows.items() if len(r) == 1)

    def seen(self) -> List[int]:
        return sorted(self.rows)

    def project_out(self, drop: Iterable[int]) -> "KnowledgeBasis":
        """Remove the columns in ``drop`` along with their pivot rows (in place)."""
        drop = set(drop)
        if not drop:
            return self
        for d in drop:
            if self.rows.pop(d, None) is not None and self.payloads is not None:
                del self.payloads[d]
        for row in self.rows.values():
            for d in drop.intersection(row):
                del row[d]
        return self


def insert_vector(basis: KnowledgeBasis, v: Coeffs) -> tuple:
    innovative = basis.insert(v) is not None
    return basis, innovative


def is_seen(basis: KnowledgeBasis, k: int) -> bool:
    return basis.is_seen(k)


def witness_for(basis: KnowledgeBasis, k: int) -> Coeffs:
    return basis.witness(k)


def is_decoded(basis: KnowledgeBasis, k: int) -> bool:
    return basis.is_decoded(k)


def project_out(basis: KnowledgeBasis, drop: Iterable[int]) -> KnowledgeBasis:
    return basis.project_out(drop)


# --- exhaustive oracles (test scale only) -----------------------------------

ORACLE_BITS = 20


def enumerate_span(vectors: Sequence[Coeffs], f: PrimeField) -> Iterator[Coeffs]:
    """Yield every distinct vector in the span of ``vectors``."""
    vectors = [v for v in vectors if v]
    if len(vectors) * math.log2(f.q) > ORACLE_BITS:
        raise OracleScaleError(
            f"oracle scale exceeded: {f.q}^{len(vectors)} combinations"
        )
    seen = set()
    for coeffs in itertools.product(range(f.q), repeat=len(vectors)):
        v = combine(zip(coeffs, vectors), f)
        key = frozenset(v.items())
        if key not in seen:
            seen.add(key)
            yield v


def brute_force_seen(basis, k: int, f: Optional[PrimeField] = None) -> bool:
    """True iff some vector in the span has leading index ``k``.

    ``basis`` may be a :class:`KnowledgeBasis` or any list of spanning
    vectors (in which case ``f`` is required).
    """
    vectors, f = _generators(basis, f)
    return any(v and min(v) == k for v in enumerate_span(vectors, f))


def brute_force_witnesses(basis, k: int, f: Optional[PrimeField] = None) -> List[Coeffs]:
    """All span vectors of the form ``p_k + q`` with ``q`` over later unseen packets."""
    vectors, f = _generators(basis, f)
    span = list(enumerate_span(vectors, f))
    seen = {min(v) for v in span if v}
    return [
        v
        for v in span
        if v
        and min(v) == k
        and v[k] == 1
        and all(c > k and c not in seen for c in v if c != k)
    ]


def _generators(basis, f):
    if isinstance(basis, KnowledgeBasis):
        return list(basis.rows.values()), basis.field
    if f is None:
        raise ValueError("field required when passing raw vectors")
    return [v if isinstance(v, dict) else from_dense(v, f) for v in basis], f
