"""Chunk-level walkthrough of the ring allreduce schedule.

The step oracle simulates the schedule one lockstep at a time: N-1
reduce-scatter steps in which every rank pushes one payload block to its
successor, then N-1 allgather steps that circulate the finished blocks.
Printing the log makes the 2(N-1) send/receive structure visible, and
aggregating it reproduces the algebraic model exactly.
"""

from commtrace import (
    CollectiveKind,
    CollectiveInstance,
    Algorithm,
    DataType,
    aggregate,
    decompose_allreduce_ring,
    simulate_ring,
)

N, S = 3, 9  # three ranks, three 3-byte blocks

log = simulate_ring(CollectiveKind.ALLREDUCE, N, S)
print(f"ring allreduce, N={N}, S={S}: {log.n_steps} steps "
      f"(= 2(N-1) = {2 * (N - 1)})\n")
for idx, sends in log.steps:
    phase = "reduce-scatter" if idx < N - 1 else "allgather"
    pretty = ", ".join(f"{a}->{b}:{nbytes}B" for a, b, nbytes in sends)
    print(f"  step {idx} ({phase:14s}): {pretty}")

oracle = aggregate(log)
inst = CollectiveInstance(
    comm="demo", ordinal=0, collective=CollectiveKind.ALLREDUCE,
    algorithm=Algorithm.RING, n_ranks=N, count=S, dtype=DataType.INT8,
    per_rank_devices=tuple(range(N)),
)
model = decompose_allreduce_ring(inst)

def edges(dec):
    flat = {(s.index, d.index): b for (s, d), b in dec.by_pair().items()}
    return dict(sorted(flat.items()))


print("\naggregated oracle edges :", edges(oracle))
print("algebraic model edges   :", edges(model))
assert oracle.by_pair() == model.by_pair()
print("\nmodel == oracle, transfer for transfer")
