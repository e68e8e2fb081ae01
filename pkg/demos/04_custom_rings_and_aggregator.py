"""Ring order configuration and the collnet aggregator column.

The analyzer replaces hardware topology detection with an explicit ring
permutation: the same trace lights up different matrix cells depending on
which ring the communicator is assumed to use.  Collnet traffic widens the
matrix with a virtual aggregator endpoint ("net") instead of any GPU pair.
"""

from commtrace import (
    Algorithm,
    CollectiveKind,
    CollectiveInstance,
    CommMatrix,
    DataType,
    accumulate,
    decompose_allreduce_collnet,
    decompose_allreduce_ring,
)


def inst(algorithm, n=4, s=4096):
    return CollectiveInstance(
        comm="demo", ordinal=0, collective=CollectiveKind.ALLREDUCE,
        algorithm=algorithm, n_ranks=n, count=s, dtype=DataType.INT8,
        per_rank_devices=tuple(range(n)),
    )


def dump(title, matrix):
    print(f"\n{title}")
    labels = matrix.labels()
    print("      " + "  ".join(f"{l:>6s}" for l in labels))
    for label, row in zip(labels, matrix.rows()):
        print(f"{label:>6s}" + "  ".join(f"{v:6d}" for v in row))


for order in (None, (0, 2, 1, 3)):
    m = CommMatrix(4)
    accumulate(m, decompose_allreduce_ring(inst(Algorithm.RING), ring_order=order))
    dump(f"ring allreduce, ring order = {order or 'identity'}", m)

m = CommMatrix(4)
accumulate(m, decompose_allreduce_collnet(inst(Algorithm.COLLNET)))
dump("collnet allreduce: traffic flows through the aggregator column", m)
