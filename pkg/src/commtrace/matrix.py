"""Communication matrices and per-primitive statistics.

The matrix is a (d+1) x (d+1) grid of directed byte counters: row = source,
column = destination, index 0 is the host and GPU g lives at index g+1.  The
(0,0) cell is reserved and always zero.  When collnet traffic exists the grid
grows one extra row/column for the virtual aggregator at index d+1.

Counters are plain Python integers checked against a 64-bit bound: silently
wrapping byte totals would be worse than failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decompose import (
    Decomposition,
    decompose_copy,
    decompose_instance,
    decompose_p2p,
    match_p2p,
    DEFAULT_TREE_THRESHOLD,
)
from .errors import EndpointOutOfRange
from .events import (
    CollectiveKind,
    Endpoint,
    EndpointKind,
    EventKind,
    TraceEvent,
)
from .grouping import CollectiveInstance, Diagnostic, group_collectives

_INT64_MAX = (1 << 63) - 1

#: Primitive keys used by per-primitive matrices and the stats table.
COLLECTIVE_TYPES = tuple(k.value for k in CollectiveKind)
SENDRECV = "sendrecv"
EXPLICIT = "explicit_transfer"
UNIFIED = "unified_memory"
ZEROCOPY = "zero_copy"
ALL_TYPES = COLLECTIVE_TYPES + (SENDRECV, EXPLICIT, UNIFIED, ZEROCOPY)

_COPY_TYPE = {
    EventKind.MEMCPY: EXPLICIT,
    EventKind.UNIFIED_MEMORY: UNIFIED,
    EventKind.ZERO_COPY: ZEROCOPY,
}


class CommMatrix:
    """Directed byte matrix over host, GPUs, and optionally the aggregator."""

    def __init__(self, d: int, with_aggregator: bool = False):
        if d < 0:
            raise ValueError("device count must be non-negative")
        self.d = d
        self.with_aggregator = with_aggregator
        size = self.size
        self._cells = [[0] * size for _ in range(size)]

    @property
    def size(self) -> int:
        return self.d + 1 + (1 if self.with_aggregator else 0)

    @classmethod
    def from_rows(cls, d: int, rows, with_aggregator: bool = False) -> "CommMatrix":
        out = cls(d, with_aggregator)
        if len(rows) != out.size or any(len(r) != out.size for r in rows):
            raise ValueError(f"expected {out.size}x{out.size} rows")
        out._cells = [[int(v) for v in row] for row in rows]
        return out

    def labels(self) -> list[str]:
        out = ["host"] + [f"gpu{g}" for g in range(self.d)]
        if self.with_aggregator:
            out.append("net")
        return out

    def index_of(self, ep: Endpoint) -> int:
        if ep.kind is EndpointKind.HOST:
            return 0
        if ep.kind is EndpointKind.GPU:
            if ep.index >= self.d:
                raise EndpointOutOfRange(
                    f"gpu{ep.index} does not fit a {self.d}-GPU matrix"
                )
            return ep.index + 1
        if not self.with_aggregator:
            self.widen()
        return self.d + 1

    def widen(self):
        """Grow the aggregator row/column; existing cells are preserved."""
        if self.with_aggregator:
            return
        self.with_aggregator = True
        for row in self._cells:
            row.append(0)
        self._cells.append([0] * self.size)

    def __getitem__(self, key: tuple[int, int]) -> int:
        i, j = key
        return self._cells[i][j]

    def add(self, src: Endpoint, dst: Endpoint, nbytes: int):
        i, j = self.index_of(src), self.index_of(dst)
        total = self._cells[i][j] + nbytes
        if total > _INT64_MAX:
            raise OverflowError(f"cell ({i},{j}) exceeds 64-bit byte counter")
        self._cells[i][j] = total

    def rows(self) -> list[list[int]]:
        return [list(row) for row in self._cells]

    def as_array(self) -> np.ndarray:
        return np.array(self._cells, dtype=np.int64)

    @property
    def max_cell(self) -> int:
        return max(max(row) for row in self._cells)

    def row_sum(self, i: int) -> int:
        return sum(self._cells[i])

    def col_sum(self, j: int) -> int:
        return sum(row[j] for row in self._cells)

    def symmetrized(self) -> "CommMatrix":
        """Undirected view: cell (i,j) becomes bytes moved in either direction."""
        out = CommMatrix(self.d, self.with_aggregator)
        n = self.size
        for i in range(n):
            for j in range(n):
                out._cells[i][j] = self._cells[i][j] + self._cells[j][i]
        return out

    def copy(self) -> "CommMatrix":
        out = CommMatrix(self.d, self.with_aggregator)
        out._cells = [list(row) for row in self._cells]
        return out

    def __eq__(self, other):
        return (
            isinstance(other, CommMatrix)
            and self.d == other.d
            and self.with_aggregator == other.with_aggregator
            and self._cells == other._cells
        )

    def __repr__(self):
        return f"CommMatrix(d={self.d}, aggregator={self.with_aggregator})"


def accumulate(matrix: CommMatrix, dec: Decomposition) -> CommMatrix:
    """Add a decomposition's transfers into the matrix (in place)."""
    for t in dec.transfers:
        matrix.add(t.src, t.dst, t.bytes)
    return matrix


def merge(a: CommMatrix, b: CommMatrix) -> CommMatrix:
    """Cellwise sum; widens when only one side has the aggregator."""
    if a.d != b.d:
        raise EndpointOutOfRange(f"matrix sizes differ: d={a.d} vs d={b.d}")
    out = a.copy()
    if b.with_aggregator:
        out.widen()
    bn = b.size
    for i in range(bn):
        for j in range(bn):
            v = out._cells[i][j] + b._cells[i][j]
            if v > _INT64_MAX:
                raise OverflowError(f"cell ({i},{j}) exceeds 64-bit byte counter")
            out._cells[i][j] = v
    return out


@dataclass(frozen=True)
class TypeStats:
    call_count: int = 0
    payload_bytes: int = 0
    wire_bytes: int = 0


@dataclass
class StatsSummary:
    """Call counts and sizes per communication type.

    Both the logical payload (S per call) and the modeled wire traffic are
    reported; published "total size" tables are ambiguous about which they
    mean, so we emit the two candidates side by side.
    """

    types: dict[str, TypeStats] = field(
        default_factory=lambda: {t: TypeStats() for t in ALL_TYPES}
    )
    instances: int = 0
    diagnostics: int = 0

    def get(self, type_key: str) -> TypeStats:
        return self.types[type_key]


@dataclass(frozen=True)
class ModelConfig:
    """Knobs of the decomposition model.

    The ring order applies to communicators whose size matches its length
    (identity elsewhere); NCCL derives rings from hardware topology, which is
    replaced here by explicit configuration.
    """

    ring_order: tuple[int, ...] | None = None
    tree_threshold: int = DEFAULT_TREE_THRESHOLD

    def ring_for(self, n_ranks: int):
        if self.ring_order is not None and len(self.ring_order) == n_ranks:
            return self.ring_order
        return None


def _typed_decompositions(
    instances: list[CollectiveInstance],
    events: list[TraceEvent],
    config: ModelConfig,
):
    """Yield (type key, payload bytes, decomposition) for every call, plus
    p2p diagnostics as a trailing list."""
    out = []
    for inst in instances:
        dec = decompose_instance(
            inst,
            ring_order=config.ring_for(inst.n_ranks),
            tree_threshold=config.tree_threshold,
        )
        out.append((inst.collective.value, inst.payload_bytes, dec))
    pairs, p2p_diags = match_p2p(events)
    for send, recv in pairs:
        dec = decompose_p2p(send, recv)
        out.append((SENDRECV, send.count * send.dtype.width_bytes, dec))
    for ev in events:
        if ev.kind in _COPY_TYPE:
            out.append((_COPY_TYPE[ev.kind], ev.bytes, decompose_copy(ev)))
    return out, p2p_diags


def infer_device_count(events: list[TraceEvent]) -> int:
    """Smallest d that fits every device id and GPU endpoint in the trace."""
    top = -1
    for ev in events:
        top = max(top, ev.device)
        for ep in (ev.copy_src, ev.copy_dst):
            if ep is not None and ep.kind is EndpointKind.GPU:
                top = max(top, ep.index)
    return top + 1


def split_by_primitive(
    instances: list[CollectiveInstance],
    events: list[TraceEvent],
    d: int | None = None,
    config: ModelConfig = ModelConfig(),
) -> dict[str, CommMatrix]:
    """One matrix per communication type actually present in the trace."""
    if d is None:
        d = infer_device_count(events)
    typed, _ = _typed_decompositions(instances, events, config)
    matrices: dict[str, CommMatrix] = {}
    for type_key, _, dec in typed:
        if type_key not in matrices:
            matrices[type_key] = CommMatrix(d)
        accumulate(matrices[type_key], dec)
    return matrices


def summarize(
    instances: list[CollectiveInstance],
    events: list[TraceEvent],
    config: ModelConfig = ModelConfig(),
    diagnostics: list[Diagnostic] | None = None,
) -> StatsSummary:
    """Call counts, payload bytes, and modeled wire bytes per type."""
    typed, p2p_diags = _typed_decompositions(instances, events, config)
    counts = {t: 0 for t in ALL_TYPES}
    payload = {t: 0 for t in ALL_TYPES}
    wire = {t: 0 for t in ALL_TYPES}
    for type_key, pay, dec in typed:
        counts[type_key] += 1
        payload[type_key] += pay
        wire[type_key] += dec.total_bytes
    n_diags = len(p2p_diags) + (len(diagnostics) if diagnostics else 0)
    return StatsSummary(
        types={
            t: TypeStats(counts[t], payload[t], wire[t]) for t in ALL_TYPES
        },
        instances=len(instances),
        diagnostics=n_diags,
    )


@dataclass
class AnalysisResult:
    """Everything the analyze pipeline produces for one trace."""

    d: int
    instances: list[CollectiveInstance]
    diagnostics: list[Diagnostic]
    combined: CommMatrix
    per_primitive: dict[str, CommMatrix]
    stats: StatsSummary


def analyze_events(
    events: list[TraceEvent],
    d: int | None = None,
    config: ModelConfig = ModelConfig(),
) -> AnalysisResult:
    """Group, decompose, and accumulate a parsed trace."""
    if d is None:
        d = infer_device_count(events)
    instances, group_diags = group_collectives(events)
    typed, p2p_diags = _typed_decompositions(instances, events, config)

    combined = CommMatrix(d)
    per_primitive: dict[str, CommMatrix] = {}
    counts = {t: 0 for t in ALL_TYPES}
    payload = {t: 0 for t in ALL_TYPES}
    wire = {t: 0 for t in ALL_TYPES}
    for type_key, pay, dec in typed:
        accumulate(combined, dec)
        if type_key not in per_primitive:
            per_primitive[type_key] = CommMatrix(d)
        accumulate(per_primitive[type_key], dec)
        counts[type_key] += 1
        payload[type_key] += pay
        wire[type_key] += dec.total_bytes

    diagnostics = group_diags + p2p_diags
    stats = StatsSummary(
        types={t: TypeStats(counts[t], payload[t], wire[t]) for t in ALL_TYPES},
        instances=len(instances),
        diagnostics=len(diagnostics),
    )
    return AnalysisResult(d, instances, diagnostics, combined, per_primitive, stats)
