"""Algorithm-aware decomposition of collective calls into per-pair transfers.

Each collective instance is converted into directed (source endpoint,
destination endpoint, bytes) attributions according to its transfer schedule:

* ring: every rank talks only to its ring successor.  The payload is split
  into N blocks of ceil(S/N) bytes (trailing blocks shrink to fit) and the
  per-edge totals are the sums of the blocks each rank forwards over the
  schedule.  With N | S every rank sends and receives 2(N-1)S/N for
  allreduce and (N-1)S/N for allgather/reducescatter.
* tree: two spanning binary trees each carry half the payload through a
  reduce phase (child to parent) and a broadcast phase (parent to child).
* collnet: in-network reduction, modeled as every rank exchanging the full
  payload with a virtual aggregator endpoint.

Byte totals are the whole story here: reduction arithmetic, timing, and
channel selection are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    InvalidConfig,
    InvariantViolation,
    MissingRoot,
    DegenerateTree,
    WrongAlgorithm,
)
from .events import (
    Algorithm,
    CollectiveKind,
    Endpoint,
    EventKind,
    NET_AGGREGATOR,
    TraceEvent,
    gpu,
)
from .grouping import CollectiveInstance, Diagnostic
from .trees import DoubleBinaryTree, build_double_binary_tree

#: Auto algorithm selection: tree below this payload size, ring at or above.
DEFAULT_TREE_THRESHOLD = 1 << 20


@dataclass(frozen=True)
class PairTransfer:
    """Directed byte attribution between two distinct endpoints."""

    src: Endpoint
    dst: Endpoint
    bytes: int

    def __post_init__(self):
        if self.src == self.dst:
            raise InvariantViolation("transfer endpoints must differ")
        if self.bytes < 0:
            raise InvariantViolation("transfer bytes must be non-negative")


@dataclass(frozen=True)
class Decomposition:
    """Pairwise transfers of one call plus per-rank byte totals.

    Rank totals cover rank-attributed traffic (collectives, send/recv); for
    plain copies the endpoints carry the attribution and the rank maps stay
    empty.  Collnet traffic to and from the aggregator is counted on the rank
    side only, so the sum of rank totals equals half the transfer bytes there.
    """

    transfers: tuple[PairTransfer, ...] = ()
    sent_by_rank: dict[int, int] = field(default_factory=dict)
    recv_by_rank: dict[int, int] = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(t.bytes for t in self.transfers)

    def by_pair(self) -> dict[tuple[Endpoint, Endpoint], int]:
        agg: dict[tuple[Endpoint, Endpoint], int] = {}
        for t in self.transfers:
            key = (t.src, t.dst)
            agg[key] = agg.get(key, 0) + t.bytes
        return agg


def _transfers_from_edges(
    edges: dict[tuple[int, int], int], devices
) -> tuple[PairTransfer, ...]:
    """Turn rank->rank byte totals into device-endpoint transfers, sorted."""
    items = sorted(edges.items())
    return tuple(
        PairTransfer(gpu(devices[a]), gpu(devices[b]), nbytes)
        for (a, b), nbytes in items
        if nbytes > 0
    )


def _zero_totals(n: int) -> dict[int, int]:
    return {r: 0 for r in range(n)}


def _ring_blocks(total: int, n: int) -> list[int]:
    """Block sizes for an n-way split: ceil(total/n) with trailing shrink."""
    chunk = -(-total // n) if total else 0
    return [max(0, min(chunk, total - i * chunk)) for i in range(n)]


def _check_ring_order(order, n: int) -> tuple[int, ...]:
    if order is None:
        return tuple(range(n))
    order = tuple(order)
    if sorted(order) != list(range(n)):
        raise InvalidConfig(f"ring order {order} is not a permutation of 0..{n - 1}")
    return order


def _require(inst: CollectiveInstance, collective: CollectiveKind, algorithm: Algorithm):
    if inst.collective is not collective:
        raise WrongAlgorithm(
            f"expected {collective.value}, got {inst.collective.value}"
        )
    if inst.algorithm is not algorithm:
        raise WrongAlgorithm(
            f"instance uses {inst.algorithm.value}, not {algorithm.value}"
        )


def decompose_allreduce_ring(
    inst: CollectiveInstance, ring_order=None
) -> Decomposition:
    """Ring allreduce: N-1 reduce-scatter steps then N-1 allgather steps.

    Over the schedule, the rank at ring position p forwards every block
    except blocks p+1 and p+2 twice-complemented, giving the per-edge total
    2S - b[p+1] - b[p+2]; with N | S this is 2(N-1)S/N on every edge.
    """
    _require(inst, CollectiveKind.ALLREDUCE, Algorithm.RING)
    n, s = inst.n_ranks, inst.payload_bytes
    sent, recv = _zero_totals(n), _zero_totals(n)
    if n == 1 or s == 0:
        return Decomposition((), sent, recv)
    order = _check_ring_order(ring_order, n)
    blocks = _ring_blocks(s, n)
    edges: dict[tuple[int, int], int] = {}
    for p in range(n):
        out = 2 * s - blocks[(p + 1) % n] - blocks[(p + 2) % n]
        src, dst = order[p], order[(p + 1) % n]
        edges[(src, dst)] = out
        sent[src] += out
        recv[dst] += out
    return Decomposition(_transfers_from_edges(edges, inst.per_rank_devices), sent, recv)


def decompose_allgather_ring(
    inst: CollectiveInstance, ring_order=None
) -> Decomposition:
    """Ring allgather: N-1 steps, each rank forwarding one block per step."""
    _require(inst, CollectiveKind.ALLGATHER, Algorithm.RING)
    return _single_phase_ring(inst, ring_order, skip_offset=1)


def decompose_reducescatter_ring(
    inst: CollectiveInstance, ring_order=None
) -> Decomposition:
    """Ring reduce-scatter: the allgather schedule run in reduce direction."""
    _require(inst, CollectiveKind.REDUCESCATTER, Algorithm.RING)
    return _single_phase_ring(inst, ring_order, skip_offset=0)


def _single_phase_ring(inst, ring_order, skip_offset: int) -> Decomposition:
    # Position p forwards every block except one; which one differs between
    # allgather (p+1, its own gathered block) and reduce-scatter (p, the
    # block it keeps).
    n, s = inst.n_ranks, inst.payload_bytes
    sent, recv = _zero_totals(n), _zero_totals(n)
    if n == 1 or s == 0:
        return Decomposition((), sent, recv)
    order = _check_ring_order(ring_order, n)
    blocks = _ring_blocks(s, n)
    edges: dict[tuple[int, int], int] = {}
    for p in range(n):
        out = s - blocks[(p + skip_offset) % n]
        src, dst = order[p], order[(p + 1) % n]
        edges[(src, dst)] = out
        sent[src] += out
        recv[dst] += out
    return Decomposition(_transfers_from_edges(edges, inst.per_rank_devices), sent, recv)


def decompose_broadcast_ring(
    inst: CollectiveInstance, ring_order=None
) -> Decomposition:
    """Broadcast pipelined along the ring: N-1 hops of S starting at the root."""
    _require(inst, CollectiveKind.BROADCAST, Algorithm.RING)
    return _pipeline_ring(inst, ring_order, toward_root=False)


def decompose_reduce_ring(inst: CollectiveInstance, ring_order=None) -> Decomposition:
    """Reduce along the ring: N-1 hops of S converging on the root."""
    _require(inst, CollectiveKind.REDUCE, Algorithm.RING)
    return _pipeline_ring(inst, ring_order, toward_root=True)


def _pipeline_ring(inst, ring_order, toward_root: bool) -> Decomposition:
    n, s = inst.n_ranks, inst.payload_bytes
    sent, recv = _zero_totals(n), _zero_totals(n)
    if inst.root is None:
        raise MissingRoot(f"{inst.collective.value} instance has no root")
    if n == 1 or s == 0:
        return Decomposition((), sent, recv)
    order = _check_ring_order(ring_order, n)
    root_pos = order.index(inst.root)
    # Broadcast flows root -> ... -> last; reduce flows first -> ... -> root.
    start = root_pos + 1 if toward_root else root_pos
    edges: dict[tuple[int, int], int] = {}
    for t in range(n - 1):
        src = order[(start + t) % n]
        dst = order[(start + t + 1) % n]
        edges[(src, dst)] = s
        sent[src] += s
        recv[dst] += s
    return Decomposition(_transfers_from_edges(edges, inst.per_rank_devices), sent, recv)


def decompose_allreduce_tree(
    inst: CollectiveInstance, dbt: DoubleBinaryTree | None = None
) -> Decomposition:
    """Tree allreduce: each spanning tree carries half of S up (reduce) and
    back down (broadcast).  With the default construction and even N, the two
    tree roots move S each and every other rank moves 2S each way."""
    _require(inst, CollectiveKind.ALLREDUCE, Algorithm.TREE)
    n, s = inst.n_ranks, inst.payload_bytes
    sent, recv = _zero_totals(n), _zero_totals(n)
    if n == 1 or s == 0:
        return Decomposition((), sent, recv)
    if dbt is None:
        dbt = build_double_binary_tree(n)
    if dbt.n_ranks != n or not dbt.spans(n):
        raise DegenerateTree(f"tree does not span ranks 0..{n - 1}")
    shares = (s - s // 2, s // 2)
    edges: dict[tuple[int, int], int] = {}
    for tree, share in zip(dbt.trees, shares):
        if share == 0:
            continue
        for rank, parent in tree.parent.items():
            if parent is None:
                continue
            # reduce leg: child -> parent; broadcast leg: parent -> child
            for a, b in ((rank, parent), (parent, rank)):
                edges[(a, b)] = edges.get((a, b), 0) + share
                sent[a] += share
                recv[b] += share
    return Decomposition(_transfers_from_edges(edges, inst.per_rank_devices), sent, recv)


def decompose_allreduce_collnet(inst: CollectiveInstance) -> Decomposition:
    """Collnet allreduce: every rank exchanges S with the virtual aggregator,
    2S of traffic touching each rank regardless of communicator size."""
    _require(inst, CollectiveKind.ALLREDUCE, Algorithm.COLLNET)
    n, s = inst.n_ranks, inst.payload_bytes
    sent, recv = _zero_totals(n), _zero_totals(n)
    if s == 0:
        return Decomposition((), sent, recv)
    transfers = []
    for r in range(n):
        dev = gpu(inst.device_of(r))
        transfers.append(PairTransfer(dev, NET_AGGREGATOR, s))
        transfers.append(PairTransfer(NET_AGGREGATOR, dev, s))
        sent[r] += s
        recv[r] += s
    return Decomposition(tuple(transfers), sent, recv)


def select_algorithm(
    inst: CollectiveInstance, tree_threshold: int = DEFAULT_TREE_THRESHOLD
) -> Algorithm:
    """Resolve the algorithm for an auto-tagged instance.

    Only allreduce has a choice: tree below the size threshold, ring at or
    above it.  Collnet is never auto-selected; the other four collectives are
    always ring.
    """
    if inst.collective is not CollectiveKind.ALLREDUCE:
        return Algorithm.RING
    if inst.algorithm is not Algorithm.AUTO:
        return inst.algorithm
    return Algorithm.TREE if inst.payload_bytes < tree_threshold else Algorithm.RING


def decompose_instance(
    inst: CollectiveInstance,
    ring_order=None,
    dbt: DoubleBinaryTree | None = None,
    tree_threshold: int = DEFAULT_TREE_THRESHOLD,
) -> Decomposition:
    """Dispatch an instance to its algorithm model, resolving auto first."""
    if inst.algorithm is Algorithm.AUTO:
        inst = inst.with_algorithm(select_algorithm(inst, tree_threshold))
    coll, algo = inst.collective, inst.algorithm
    if coll is CollectiveKind.ALLREDUCE:
        if algo is Algorithm.RING:
            return decompose_allreduce_ring(inst, ring_order)
        if algo is Algorithm.TREE:
            return decompose_allreduce_tree(inst, dbt)
        return decompose_allreduce_collnet(inst)
    if algo is not Algorithm.RING:
        raise WrongAlgorithm(f"{coll.value} supports only the ring algorithm")
    if coll is CollectiveKind.BROADCAST:
        return decompose_broadcast_ring(inst, ring_order)
    if coll is CollectiveKind.REDUCE:
        return decompose_reduce_ring(inst, ring_order)
    if coll is CollectiveKind.ALLGATHER:
        return decompose_allgather_ring(inst, ring_order)
    return decompose_reducescatter_ring(inst, ring_order)


def decompose_p2p(send: TraceEvent, recv: TraceEvent) -> Decomposition:
    """A matched send/recv pair: one transfer of count * width bytes."""
    if send.kind is not EventKind.SEND or recv.kind is not EventKind.RECV:
        raise InvariantViolation("decompose_p2p needs a (send, recv) pair")
    if (
        send.comm != recv.comm
        or send.peer != recv.rank
        or recv.peer != send.rank
        or send.count != recv.count
        or send.dtype != recv.dtype
    ):
        raise InvariantViolation("send/recv events are not counterparts")
    nbytes = send.count * send.dtype.width_bytes
    transfers: tuple[PairTransfer, ...] = ()
    if send.device != recv.device:
        transfers = (PairTransfer(gpu(send.device), gpu(recv.device), nbytes),)
    return Decomposition(
        transfers,
        {send.rank: nbytes},
        {recv.rank: nbytes},
    )


def match_p2p(
    events: list[TraceEvent],
) -> tuple[list[tuple[TraceEvent, TraceEvent]], list[Diagnostic]]:
    """Pair sends with recvs per (comm, src rank, dst rank) channel, in
    sequence order.  Leftovers and argument mismatches become diagnostics."""
    sends: dict[tuple[str, int, int], list[TraceEvent]] = {}
    recvs: dict[tuple[str, int, int], list[TraceEvent]] = {}
    for ev in events:
        if ev.kind is EventKind.SEND:
            sends.setdefault((ev.comm, ev.rank, ev.peer), []).append(ev)
        elif ev.kind is EventKind.RECV:
            recvs.setdefault((ev.comm, ev.peer, ev.rank), []).append(ev)

    pairs: list[tuple[TraceEvent, TraceEvent]] = []
    diagnostics: list[Diagnostic] = []
    for key in sorted(set(sends) | set(recvs)):
        comm, src, dst = key
        ss = sorted(sends.get(key, []), key=lambda e: e.seq)
        rr = sorted(recvs.get(key, []), key=lambda e: e.seq)
        for k, (s_ev, r_ev) in enumerate(zip(ss, rr)):
            if s_ev.count != r_ev.count or s_ev.dtype != r_ev.dtype:
                diagnostics.append(
                    Diagnostic(
                        "mismatched_p2p",
                        comm,
                        k,
                        f"send({src}->{dst}) count/dtype disagree with recv",
                        (s_ev, r_ev),
                    )
                )
                continue
            pairs.append((s_ev, r_ev))
        for s_ev in ss[len(rr):]:
            diagnostics.append(
                Diagnostic(
                    "unmatched_send",
                    comm,
                    None,
                    f"send {src}->{dst} seq {s_ev.seq} has no recv",
                    (s_ev,),
                )
            )
        for r_ev in rr[len(ss):]:
            diagnostics.append(
                Diagnostic(
                    "unmatched_recv",
                    comm,
                    None,
                    f"recv {src}->{dst} seq {r_ev.seq} has no send",
                    (r_ev,),
                )
            )
    return pairs, diagnostics


def decompose_copy(event: TraceEvent) -> Decomposition:
    """An explicit or implicit copy: one transfer along its recorded endpoints."""
    if event.kind is EventKind.COLLECTIVE or event.kind in (
        EventKind.SEND,
        EventKind.RECV,
    ):
        raise InvariantViolation("decompose_copy needs a copy-kind event")
    return Decomposition(
        (PairTransfer(event.copy_src, event.copy_dst, event.bytes),), {}, {}
    )
