"""Brute-force step simulator for the ring and double-binary-tree schedules.

This is the reference the algebraic models in `decompose` are tested against,
so it deliberately shares no arithmetic with them: payload blocks come from
interval slicing, per-step sends are walked one by one, and the simulation
tracks which ranks' contributions each buffer holds, asserting that the
algorithm actually completes (every rank ends with fully reduced/gathered
data) before any byte totals are reported.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateTree, MissingRoot
from .events import CollectiveKind, gpu
from .decompose import Decomposition, PairTransfer
from .trees import DoubleBinaryTree, build_double_binary_tree

Send = tuple[int, int, int]  # (src rank, dst rank, chunk bytes)


@dataclass(frozen=True)
class StepLog:
    """Chunk sends grouped by simulation step, in temporal order."""

    steps: tuple[tuple[int, tuple[Send, ...]], ...] = ()

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def all_sends(self) -> list[Send]:
        return [s for _, sends in self.steps for s in sends]


class _LogBuilder:
    def __init__(self):
        self.steps = []
        self.index = 0

    def step(self, sends: list[Send]):
        sends = [s for s in sends if s[2] > 0]
        if sends:
            self.steps.append((self.index, tuple(sends)))
            self.index += 1

    def build(self) -> StepLog:
        return StepLog(tuple(self.steps))


def _slice_blocks(total: int, n: int) -> list[int]:
    """Split [0, total) into n contiguous intervals of ceil(total/n), last
    ones truncated; returns interval lengths."""
    if total == 0:
        return [0] * n
    width = (total + n - 1) // n
    bounds = [min(total, i * width) for i in range(n + 1)]
    return [bounds[i + 1] - bounds[i] for i in range(n)]


def simulate_ring(
    collective: CollectiveKind,
    n: int,
    payload: int,
    root: int | None = None,
    ring_order=None,
) -> StepLog:
    """Run the ring schedule step by step and log every chunk send.

    allreduce: N-1 reduce-scatter steps then N-1 allgather steps;
    allgather / reducescatter: the single corresponding phase;
    broadcast / reduce: N-1 forwarding hops of the whole payload.
    """
    order = tuple(ring_order) if ring_order is not None else tuple(range(n))
    assert sorted(order) == list(range(n)), "ring order must be a permutation"
    log = _LogBuilder()
    if n <= 1 or payload == 0:
        return log.build()
    rank_at = list(order)
    succ = {p: (p + 1) % n for p in range(n)}

    if collective in (CollectiveKind.BROADCAST, CollectiveKind.REDUCE):
        if root is None:
            raise MissingRoot(f"{collective.value} needs a root")
        root_pos = order.index(root)
        has_data = {p: False for p in range(n)}
        if collective is CollectiveKind.BROADCAST:
            has_data[root_pos] = True
            start = root_pos
        else:
            # reduce: the chain starts right after the root and ends on it
            start = (root_pos + 1) % n
            has_data[start] = True
            seen = {rank_at[start]}
        for t in range(n - 1):
            src = (start + t) % n
            dst = succ[src]
            assert has_data[src], "pipeline hop from a rank without data"
            has_data[dst] = True
            if collective is CollectiveKind.REDUCE:
                seen.add(rank_at[dst])
            log.step([(rank_at[src], rank_at[dst], payload)])
        if collective is CollectiveKind.REDUCE:
            assert seen == set(range(n)), "reduce chain missed a rank"
        return log.build()

    blocks = _slice_blocks(payload, n)

    def run_phase(block_of, merge):
        for t in range(n - 1):
            sends = []
            outgoing = {}
            for p in range(n):
                blk = block_of(p, t)
                outgoing[p] = (blk, state[p][blk].copy())
                sends.append((rank_at[p], rank_at[succ[p]], blocks[blk]))
            for p in range(n):  # lockstep: deliveries after all sends
                blk, payload_set = outgoing[p]
                merge(succ[p], blk, payload_set)
            log.step(sends)

    if collective is CollectiveKind.ALLREDUCE:
        # state[p][blk] = ranks whose contribution position p holds for blk
        state = [[{p} for _ in range(n)] for p in range(n)]
        run_phase(
            lambda p, t: (p - t) % n,
            lambda q, blk, inc: state[q][blk].update(inc),
        )
        full = set(range(n))
        for p in range(n):
            assert state[p][(p + 1) % n] == full, "reduce-scatter incomplete"

        def overwrite(q, blk, inc):
            assert inc == full, "allgather phase forwarded a partial block"
            state[q][blk] = inc

        run_phase(lambda p, t: (p + 1 - t) % n, overwrite)
        assert all(state[p][b] == full for p in range(n) for b in range(n))
    elif collective is CollectiveKind.ALLGATHER:
        # state[p][blk] = {blk} once position p holds that block
        state = [[{p} if b == p else set() for b in range(n)] for p in range(n)]

        def deliver(q, blk, inc):
            assert inc, "allgather forwarded a block it does not hold"
            state[q][blk] = inc

        run_phase(lambda p, t: (p - t) % n, deliver)
        assert all(state[p][b] == {b} for p in range(n) for b in range(n))
    elif collective is CollectiveKind.REDUCESCATTER:
        state = [[{p} for _ in range(n)] for p in range(n)]
        run_phase(
            lambda p, t: (p - t - 1) % n,
            lambda q, blk, inc: state[q][blk].update(inc),
        )
        full = set(range(n))
        for p in range(n):
            assert state[p][p] == full, "reduce-scatter missed contributions"
    else:
        raise ValueError(f"no ring simulation for {collective}")
    return log.build()


def simulate_tree(n: int, payload: int, dbt: DoubleBinaryTree | None = None) -> StepLog:
    """Run tree allreduce step by step: per tree, a bottom-up reduce phase
    (children send before parents) then a top-down broadcast phase."""
    log = _LogBuilder()
    if n <= 1 or payload == 0:
        return log.build()
    if dbt is None:
        dbt = build_double_binary_tree(n)
    if not dbt.spans(n):
        raise DegenerateTree(f"tree does not span ranks 0..{n - 1}")
    half = payload >> 1
    shares = (payload - half, half)
    everyone = set(range(n))

    for tree, share in zip(dbt.trees, shares):
        if share == 0:
            continue
        heights: dict[int, int] = {}

        def height(r: int) -> int:
            if r not in heights:
                ch = tree.children[r]
                heights[r] = 1 + max((height(c) for c in ch), default=-1)
            return heights[r]

        # reduce: a node fires once its whole subtree has reported
        gathered = {r: {r} for r in range(n)}
        for step in range(height(tree.root)):
            sends = []
            for r in range(n):
                parent = tree.parent[r]
                if parent is not None and height(r) == step:
                    expect = 1 + sum(len(gathered[c]) for c in tree.children[r])
                    assert len(gathered[r]) == expect, "node fired before children"
                    gathered[parent].update(gathered[r])
                    sends.append((r, parent, share))
            log.step(sends)
        assert gathered[tree.root] == everyone, "reduce phase missed a rank"

        # broadcast: the root's result walks back down, level by level
        has_result = {r: r == tree.root for r in range(n)}
        depth = {tree.root: 0}
        frontier = [tree.root]
        while frontier:
            nxt = []
            sends = []
            for r in frontier:
                assert has_result[r]
                for c in tree.children[r]:
                    depth[c] = depth[r] + 1
                    has_result[c] = True
                    sends.append((r, c, share))
                    nxt.append(c)
            log.step(sends)
            frontier = nxt
        assert all(has_result.values()), "broadcast phase missed a rank"
    return log.build()


def aggregate(log: StepLog, devices=None) -> Decomposition:
    """Sum chunk sends by directed rank pair into a decomposition.

    ``devices`` maps rank to GPU id (identity when omitted), mirroring how
    the model attaches instances to devices.
    """
    edges: dict[tuple[int, int], int] = {}
    sent: dict[int, int] = {}
    recv: dict[int, int] = {}
    for src, dst, nbytes in log.all_sends():
        edges[(src, dst)] = edges.get((src, dst), 0) + nbytes
        sent[src] = sent.get(src, 0) + nbytes
        recv[dst] = recv.get(dst, 0) + nbytes
    dev = (lambda r: r) if devices is None else (lambda r: devices[r])
    transfers = tuple(
        PairTransfer(gpu(dev(a)), gpu(dev(b)), nbytes)
        for (a, b), nbytes in sorted(edges.items())
        if nbytes > 0
    )
    return Decomposition(transfers, sent, recv)
