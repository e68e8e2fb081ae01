"""Grouping of per-rank collective events into logical collective instances.

Ranks of a communicator issue collectives in identical order, so the k-th
collective event of every rank (by its own sequence counter) belongs to the
same logical call.  Timestamps are never consulted: clocks across devices are
not comparable.  Incomplete or argument-incompatible groups become
diagnostics, not errors, so traces from crashed runs stay analyzable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import InvariantViolation
from .events import (
    Algorithm,
    CollectiveKind,
    DataType,
    EventKind,
    TraceEvent,
)


@dataclass(frozen=True)
class CollectiveInstance:
    """One logical collective call, assembled from N per-rank events."""

    comm: str
    ordinal: int
    collective: CollectiveKind
    algorithm: Algorithm
    n_ranks: int
    count: int
    dtype: DataType
    root: int | None = None
    per_rank_devices: tuple[int, ...] = ()

    @property
    def payload_bytes(self) -> int:
        """Logical data size S of the call.

        For allgather/reducescatter ``count`` is the per-rank block count, so
        the payload is N blocks; for the others it is the full buffer.
        """
        block = self.count * self.dtype.width_bytes
        if self.collective in (
            CollectiveKind.ALLGATHER,
            CollectiveKind.REDUCESCATTER,
        ):
            return self.n_ranks * block
        return block

    def device_of(self, rank: int) -> int:
        return self.per_rank_devices[rank]

    def with_algorithm(self, algorithm: Algorithm) -> "CollectiveInstance":
        return replace(self, algorithm=algorithm)


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal problem found while grouping or matching events."""

    reason: str  # "incomplete" | "incompatible_arguments" | "duplicate_device"
    #             | "unmatched_send" | "unmatched_recv" | "mismatched_p2p"
    comm: str
    ordinal: int | None
    detail: str
    events: tuple[TraceEvent, ...] = field(default=())

    def __str__(self):
        where = f"comm={self.comm}"
        if self.ordinal is not None:
            where += f" ordinal={self.ordinal}"
        return f"{self.reason}: {where}: {self.detail}"


def _signature(ev: TraceEvent):
    return (ev.collective, ev.algorithm, ev.count, ev.dtype, ev.root)


def group_collectives(
    events: list[TraceEvent],
) -> tuple[list[CollectiveInstance], list[Diagnostic]]:
    """Match per-rank collective events into instances.

    Returns instances in (communicator first-seen, ordinal) order plus
    diagnostics for incomplete or incompatible groups.  Raises
    InvariantViolation on structural corruption: duplicate sequence numbers
    within one (comm, rank) stream, or a communicator whose events disagree
    on its size.
    """
    comm_order: list[str] = []
    streams: dict[str, dict[int, list[TraceEvent]]] = {}
    comm_sizes: dict[str, int] = {}

    for ev in events:
        if ev.kind is not EventKind.COLLECTIVE:
            continue
        if ev.comm not in streams:
            streams[ev.comm] = {}
            comm_sizes[ev.comm] = ev.n_ranks
            comm_order.append(ev.comm)
        elif comm_sizes[ev.comm] != ev.n_ranks:
            raise InvariantViolation(
                f"comm {ev.comm!r}: events disagree on nranks "
                f"({comm_sizes[ev.comm]} vs {ev.n_ranks})"
            )
        streams[ev.comm].setdefault(ev.rank, []).append(ev)

    instances: list[CollectiveInstance] = []
    diagnostics: list[Diagnostic] = []

    for comm in comm_order:
        n = comm_sizes[comm]
        per_rank = streams[comm]
        for rank, evs in per_rank.items():
            evs.sort(key=lambda e: e.seq)
            for a, b in zip(evs, evs[1:]):
                if a.seq == b.seq:
                    raise InvariantViolation(
                        f"comm {comm!r} rank {rank}: duplicate seq {a.seq}"
                    )

        depth = max(len(evs) for evs in per_rank.values())
        for ordinal in range(depth):
            group = {
                rank: evs[ordinal]
                for rank, evs in per_rank.items()
                if ordinal < len(evs)
            }
            if len(group) < n:
                missing = sorted(set(range(n)) - set(group))
                diagnostics.append(
                    Diagnostic(
                        "incomplete",
                        comm,
                        ordinal,
                        f"missing ranks {missing}",
                        tuple(group[r] for r in sorted(group)),
                    )
                )
                continue
            sigs = {_signature(ev) for ev in group.values()}
            if len(sigs) > 1:
                diagnostics.append(
                    Diagnostic(
                        "incompatible_arguments",
                        comm,
                        ordinal,
                        "ranks disagree on (collective, algo, count, dtype, root)",
                        tuple(group[r] for r in sorted(group)),
                    )
                )
                continue
            devices = tuple(group[r].device for r in range(n))
            if len(set(devices)) < n:
                diagnostics.append(
                    Diagnostic(
                        "duplicate_device",
                        comm,
                        ordinal,
                        f"ranks share GPU devices: {devices}",
                        tuple(group[r] for r in range(n)),
                    )
                )
                continue
            proto = group[0]
            instances.append(
                CollectiveInstance(
                    comm=comm,
                    ordinal=ordinal,
                    collective=proto.collective,
                    algorithm=proto.algorithm,
                    n_ranks=n,
                    count=proto.count,
                    dtype=proto.dtype,
                    root=proto.root,
                    per_rank_devices=devices,
                )
            )

    return instances, diagnostics
