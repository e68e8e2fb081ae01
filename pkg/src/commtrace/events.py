"""Communication event taxonomy and the JSONL trace wire format.

A trace file is UTF-8 text with one JSON object per line.  The schema is a
reconstruction: interposer shims append lines without coordination, so the
format is line-oriented and order within a (comm, rank) stream is carried by
an explicit sequence counter rather than timestamps.

Keys required on every line::

    seq     int     per-(comm, rank) sequence counter
    ts      int     timestamp, nanoseconds (informational only)
    kind    str     "collective" | "send" | "recv" | "memcpy" | "um" | "zerocopy"
    comm    str     opaque communicator id
    nranks  int     communicator size N
    rank    int     caller rank, 0 <= rank < N
    dev     int     GPU device id of the caller

Collective lines add ``coll`` ("allreduce" | "broadcast" | "reduce" |
"reducescatter" | "allgather"), ``algo`` ("ring" | "tree" | "collnet" |
"auto"), ``count`` (elements), ``dtype``, and ``root`` (broadcast/reduce
only).  Send/recv lines add ``peer``, ``count``, ``dtype``.  Copy lines
(memcpy/um/zerocopy) add ``ckind`` ("h2d" | "d2h" | "d2d"), ``src`` and
``dst`` endpoints (``{"kind": "host"|"gpu"|"net", "idx": int}``) and
``bytes``.  Unknown keys are ignored.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable

from .errors import InvariantViolation, MalformedLine, SchemaViolation


class EndpointKind(Enum):
    HOST = "host"
    GPU = "gpu"
    NET_AGGREGATOR = "net"


@dataclass(frozen=True)
class Endpoint:
    """One terminus of a transfer: the host, a GPU, or the virtual in-network
    aggregator used by the collnet model."""

    kind: EndpointKind
    index: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise InvariantViolation(f"negative endpoint index {self.index}")
        if self.kind is not EndpointKind.GPU and self.index != 0:
            raise InvariantViolation(f"{self.kind.value} endpoint must have index 0")

    def to_wire(self) -> dict:
        return {"kind": self.kind.value, "idx": self.index}


HOST = Endpoint(EndpointKind.HOST)
NET_AGGREGATOR = Endpoint(EndpointKind.NET_AGGREGATOR)


def gpu(index: int) -> Endpoint:
    return Endpoint(EndpointKind.GPU, index)


class CollectiveKind(Enum):
    ALLREDUCE = "allreduce"
    BROADCAST = "broadcast"
    REDUCE = "reduce"
    REDUCESCATTER = "reducescatter"
    ALLGATHER = "allgather"


#: Collectives that carry a root rank.
ROOTED = frozenset({CollectiveKind.BROADCAST, CollectiveKind.REDUCE})


class Algorithm(Enum):
    """Transfer schedule of a collective.  AUTO defers the ring/tree choice to
    the analyzer's size policy; tree and collnet exist only for allreduce."""

    RING = "ring"
    TREE = "tree"
    COLLNET = "collnet"
    AUTO = "auto"


class DataType(Enum):
    INT8 = "int8"
    UINT8 = "uint8"
    INT32 = "int32"
    UINT32 = "uint32"
    INT64 = "int64"
    UINT64 = "uint64"
    FLOAT16 = "float16"
    BFLOAT16 = "bfloat16"
    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @property
    def width_bytes(self) -> int:
        return _DTYPE_WIDTH[self]


_DTYPE_WIDTH = {
    DataType.INT8: 1,
    DataType.UINT8: 1,
    DataType.INT32: 4,
    DataType.UINT32: 4,
    DataType.INT64: 8,
    DataType.UINT64: 8,
    DataType.FLOAT16: 2,
    DataType.BFLOAT16: 2,
    DataType.FLOAT32: 4,
    DataType.FLOAT64: 8,
}


class EventKind(Enum):
    COLLECTIVE = "collective"
    SEND = "send"
    RECV = "recv"
    MEMCPY = "memcpy"
    UNIFIED_MEMORY = "um"
    ZERO_COPY = "zerocopy"


#: Event kinds describing a host/device copy rather than an NCCL-style call.
COPY_KINDS = frozenset(
    {EventKind.MEMCPY, EventKind.UNIFIED_MEMORY, EventKind.ZERO_COPY}
)


class CopyKind(Enum):
    H2D = "h2d"
    D2H = "d2h"
    D2D = "d2d"


@dataclass(frozen=True)
class TraceEvent:
    """One logged communication action by one rank."""

    seq: int
    ts_ns: int
    kind: EventKind
    comm: str
    n_ranks: int
    rank: int
    device: int
    collective: CollectiveKind | None = None
    algorithm: Algorithm | None = None
    root: int | None = None
    peer: int | None = None
    count: int | None = None
    dtype: DataType | None = None
    copy_kind: CopyKind | None = None
    copy_src: Endpoint | None = None
    copy_dst: Endpoint | None = None
    bytes: int | None = None

    def validate(self) -> "TraceEvent":
        """Check per-event invariants; raises InvariantViolation."""
        if self.n_ranks < 1:
            raise InvariantViolation(f"nranks must be >= 1, got {self.n_ranks}")
        if not 0 <= self.rank < self.n_ranks:
            raise InvariantViolation(
                f"rank {self.rank} outside [0, {self.n_ranks})"
            )
        if self.seq < 0 or self.device < 0:
            raise InvariantViolation("seq and dev must be non-negative")
        if self.kind is EventKind.COLLECTIVE:
            self._validate_collective()
        elif self.kind in (EventKind.SEND, EventKind.RECV):
            self._validate_p2p()
        else:
            self._validate_copy()
        return self

    def _validate_collective(self):
        if self.collective is None or self.algorithm is None:
            raise InvariantViolation("collective event needs coll and algo")
        if self.count is None or self.dtype is None:
            raise InvariantViolation("collective event needs count and dtype")
        if self.count < 0:
            raise InvariantViolation("count must be non-negative")
        if self.algorithm in (Algorithm.TREE, Algorithm.COLLNET):
            if self.collective is not CollectiveKind.ALLREDUCE:
                raise InvariantViolation(
                    f"{self.algorithm.value} is only valid for allreduce"
                )
        if self.collective in ROOTED:
            if self.root is None:
                raise InvariantViolation(
                    f"{self.collective.value} event needs a root rank"
                )
            if not 0 <= self.root < self.n_ranks:
                raise InvariantViolation(f"root {self.root} outside [0, N)")
        elif self.root is not None:
            raise InvariantViolation(
                f"root is only valid for broadcast/reduce, not {self.collective.value}"
            )
        if self.peer is not None or self.copy_kind is not None:
            raise InvariantViolation("collective event carries no peer/copy fields")

    def _validate_p2p(self):
        if self.peer is None or self.count is None or self.dtype is None:
            raise InvariantViolation("send/recv event needs peer, count and dtype")
        if self.peer == self.rank:
            raise InvariantViolation("peer must differ from rank")
        if not 0 <= self.peer < self.n_ranks:
            raise InvariantViolation(f"peer {self.peer} outside [0, N)")
        if self.count < 0:
            raise InvariantViolation("count must be non-negative")

    def _validate_copy(self):
        if self.copy_kind is None or self.copy_src is None or self.copy_dst is None:
            raise InvariantViolation("copy event needs ckind, src and dst")
        if self.bytes is None or self.bytes < 0:
            raise InvariantViolation("copy event needs non-negative bytes")
        want = {
            CopyKind.H2D: (EndpointKind.HOST, EndpointKind.GPU),
            CopyKind.D2H: (EndpointKind.GPU, EndpointKind.HOST),
            CopyKind.D2D: (EndpointKind.GPU, EndpointKind.GPU),
        }[self.copy_kind]
        if (self.copy_src.kind, self.copy_dst.kind) != want:
            raise InvariantViolation(
                f"{self.copy_kind.value} copy must go "
                f"{want[0].value} -> {want[1].value}"
            )
        if self.copy_kind is CopyKind.D2D and self.copy_src == self.copy_dst:
            raise InvariantViolation("d2d copy must connect two distinct GPUs")

    @property
    def payload_bytes(self) -> int:
        """Bytes named by the call itself (count * element width, or the
        explicit byte count for copies).  Collective wire semantics are
        applied later, at grouping."""
        if self.kind in COPY_KINDS:
            return self.bytes or 0
        return (self.count or 0) * (self.dtype.width_bytes if self.dtype else 0)


# Canonical wire serialization.  Key order is fixed so that identical event
# lists produce identical bytes.

def _event_to_obj(ev: TraceEvent) -> dict:
    obj = {
        "seq": ev.seq,
        "ts": ev.ts_ns,
        "kind": ev.kind.value,
        "comm": ev.comm,
        "nranks": ev.n_ranks,
        "rank": ev.rank,
        "dev": ev.device,
    }
    if ev.kind is EventKind.COLLECTIVE:
        obj["coll"] = ev.collective.value
        obj["algo"] = ev.algorithm.value
        obj["count"] = ev.count
        obj["dtype"] = ev.dtype.value
        if ev.root is not None:
            obj["root"] = ev.root
    elif ev.kind in (EventKind.SEND, EventKind.RECV):
        obj["peer"] = ev.peer
        obj["count"] = ev.count
        obj["dtype"] = ev.dtype.value
    else:
        obj["ckind"] = ev.copy_kind.value
        obj["src"] = ev.copy_src.to_wire()
        obj["dst"] = ev.copy_dst.to_wire()
        obj["bytes"] = ev.bytes
    return obj


def write_trace(events: Iterable[TraceEvent]) -> bytes:
    """Serialize events to the canonical JSONL byte stream.

    Raises InvariantViolation on an invalid event.  parse_trace inverts this
    exactly (round-trip identity).
    """
    out = io.StringIO()
    for ev in events:
        ev.validate()
        out.write(json.dumps(_event_to_obj(ev), separators=(",", ":")))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def _need(obj: dict, key: str, typ, line_no: int):
    if key not in obj:
        raise SchemaViolation(line_no, key, "missing")
    val = obj[key]
    # bool is an int subclass; a JSON true/false is never a valid count.
    if not isinstance(val, typ) or isinstance(val, bool):
        raise SchemaViolation(line_no, key, f"expected {typ.__name__}")
    return val


def _need_enum(obj: dict, key: str, enum_cls, line_no: int):
    raw = _need(obj, key, str, line_no)
    try:
        return enum_cls(raw)
    except ValueError:
        raise SchemaViolation(line_no, key, f"unknown value {raw!r}") from None


def _need_endpoint(obj: dict, key: str, line_no: int) -> Endpoint:
    raw = _need(obj, key, dict, line_no)
    kind = _need_enum(raw, "kind", EndpointKind, line_no)
    idx = _need(raw, "idx", int, line_no)
    try:
        return Endpoint(kind, idx)
    except InvariantViolation as exc:
        raise SchemaViolation(line_no, key, str(exc)) from None


def _event_from_obj(obj: dict, line_no: int) -> TraceEvent:
    kind = _need_enum(obj, "kind", EventKind, line_no)
    fields = dict(
        seq=_need(obj, "seq", int, line_no),
        ts_ns=_need(obj, "ts", int, line_no),
        kind=kind,
        comm=_need(obj, "comm", str, line_no),
        n_ranks=_need(obj, "nranks", int, line_no),
        rank=_need(obj, "rank", int, line_no),
        device=_need(obj, "dev", int, line_no),
    )
    if kind is EventKind.COLLECTIVE:
        fields["collective"] = _need_enum(obj, "coll", CollectiveKind, line_no)
        fields["algorithm"] = _need_enum(obj, "algo", Algorithm, line_no)
        fields["count"] = _need(obj, "count", int, line_no)
        fields["dtype"] = _need_enum(obj, "dtype", DataType, line_no)
        if "root" in obj or fields["collective"] in ROOTED:
            fields["root"] = _need(obj, "root", int, line_no)
    elif kind in (EventKind.SEND, EventKind.RECV):
        fields["peer"] = _need(obj, "peer", int, line_no)
        fields["count"] = _need(obj, "count", int, line_no)
        fields["dtype"] = _need_enum(obj, "dtype", DataType, line_no)
    else:
        fields["copy_kind"] = _need_enum(obj, "ckind", CopyKind, line_no)
        fields["copy_src"] = _need_endpoint(obj, "src", line_no)
        fields["copy_dst"] = _need_endpoint(obj, "dst", line_no)
        fields["bytes"] = _need(obj, "bytes", int, line_no)
    return TraceEvent(**fields)


def parse_trace(source: IO[bytes] | bytes | str) -> list[TraceEvent]:
    """Parse a JSONL trace stream into validated events, in file order.

    Unknown keys are ignored.  Raises MalformedLine on broken JSON,
    SchemaViolation on a missing or ill-typed required field, and
    InvariantViolation when a field combination is semantically invalid.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    events: list[TraceEvent] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, exc.msg) from None
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, "not a JSON object")
        ev = _event_from_obj(obj, line_no)
        try:
            ev.validate()
        except InvariantViolation as exc:
            raise InvariantViolation(f"line {line_no}: {exc}") from None
        events.append(ev)
    return events


def parse_trace_file(path) -> list[TraceEvent]:
    with open(path, "rb") as fh:
        return parse_trace(fh)
