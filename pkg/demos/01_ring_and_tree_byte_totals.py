"""Per-rank byte totals of the three allreduce schedules.

Walks one allreduce call through the ring, double-binary-tree, and collnet
models and prints what each rank sends and receives, next to the closed-form
expectations: ring moves 2(N-1)S/N per rank, the tree moves S on the two tree
roots and 2S everywhere else, collnet exchanges S each way with the
in-network aggregator.
"""

import numpy as np

from commtrace import (
    Algorithm,
    CollectiveKind,
    CollectiveInstance,
    DataType,
    decompose_allreduce_collnet,
    decompose_allreduce_ring,
    decompose_allreduce_tree,
)

N = 8
S = 1 << 20  # 1 MiB payload


def instance(algorithm):
    return CollectiveInstance(
        comm="demo", ordinal=0, collective=CollectiveKind.ALLREDUCE,
        algorithm=algorithm, n_ranks=N, count=S, dtype=DataType.INT8,
        per_rank_devices=tuple(range(N)),
    )


def show(title, dec, expected):
    sent = np.array([dec.sent_by_rank[r] for r in range(N)])
    recv = np.array([dec.recv_by_rank[r] for r in range(N)])
    print(f"\n{title}")
    print(f"  sent per rank: {sent}")
    print(f"  recv per rank: {recv}")
    print(f"  expected     : {expected}")
    assert (sent == expected).all() and (recv == expected).all()


print(f"allreduce, N={N} ranks, S={S} bytes")

ring = decompose_allreduce_ring(instance(Algorithm.RING))
show("ring: every rank forwards 2(N-1)/N of the payload",
     ring, np.full(N, 2 * (N - 1) * S // N))

tree = decompose_allreduce_tree(instance(Algorithm.TREE))
expected = np.where(np.isin(np.arange(N), (0, N - 1)), S, 2 * S)
show("double binary tree: the two tree roots move S, everyone else 2S",
     tree, expected)

collnet = decompose_allreduce_collnet(instance(Algorithm.COLLNET))
show("collnet: S up to the aggregator and S back, per rank",
     collnet, np.full(N, S))

print("\nring edges (only successor links carry traffic):")
for t in ring.transfers:
    print(f"  gpu{t.src.index} -> gpu{t.dst.index}: {t.bytes} bytes")
