"""Synthetic trace generation for data-parallel training workloads.

Two profiles are modeled: an image-classification run whose gradient exchange
uses bucketed allreduce (many medium calls, few setup broadcasts), and a
machine-translation-like run dominated by a huge number of small explicit
host/device copies next to large allreduce calls.

Gradient bucketing packs consecutive gradient tensors into one allreduce call
while walking the tensors in reverse order, mirroring backward-pass readiness.
A bucket closes when the next tensor would push it past the cap; a tensor
larger than the cap travels alone.  The per-iteration call count therefore
lands between 1 (cap swallows everything) and D (cap below every tensor).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import InvalidConfig
from .events import (
    Algorithm,
    CollectiveKind,
    CopyKind,
    DataType,
    EventKind,
    HOST,
    TraceEvent,
    gpu,
)

GRADIENT_DTYPE = DataType.FLOAT32


@dataclass(frozen=True)
class TrainingConfig:
    """Shape of one synthetic data-parallel training run."""

    n_gpus: int
    tensor_sizes_bytes: tuple[int, ...]
    iterations_per_epoch: int
    bucket_cap_bytes: int
    epochs: int = 1
    broadcast_init: bool = False
    algorithm: Algorithm = Algorithm.RING
    #: per iteration: (number of h2d copies, bytes each), or None
    explicit_h2d_per_iteration: tuple[int, int] | None = None
    dtype: DataType = GRADIENT_DTYPE
    comm: str = "comm0"

    def validate(self) -> "TrainingConfig":
        if self.n_gpus < 1:
            raise InvalidConfig("n_gpus must be >= 1")
        if not self.tensor_sizes_bytes:
            raise InvalidConfig("at least one tensor is required")
        if any(s <= 0 for s in self.tensor_sizes_bytes):
            raise InvalidConfig("tensor sizes must be positive")
        if self.bucket_cap_bytes <= 0:
            raise InvalidConfig("bucket cap must be positive")
        if self.iterations_per_epoch < 1 or self.epochs < 1:
            raise InvalidConfig("iterations and epochs must be >= 1")
        if self.explicit_h2d_per_iteration is not None:
            cnt, nbytes = self.explicit_h2d_per_iteration
            if cnt < 1 or nbytes < 0:
                raise InvalidConfig("explicit h2d spec must be (count >= 1, bytes >= 0)")
        return self


def plan_buckets(tensor_sizes_bytes, cap_bytes: int) -> list[int]:
    """Greedy reverse-order packing; returns bucket byte sums in call order."""
    buckets: list[int] = []
    current = 0
    for size in reversed(tuple(tensor_sizes_bytes)):
        if size > cap_bytes:
            if current:
                buckets.append(current)
                current = 0
            buckets.append(size)
            continue
        if current and current + size > cap_bytes:
            buckets.append(current)
            current = 0
        current += size
    if current:
        buckets.append(current)
    return buckets


class _TraceBuilder:
    """Emits events with per-(comm, rank) sequence and timestamp counters."""

    def __init__(self):
        self.events: list[TraceEvent] = []
        self._seq: dict[tuple[str, int], int] = {}
        self._ts: dict[tuple[str, int], int] = {}

    def _next(self, comm: str, rank: int) -> tuple[int, int]:
        key = (comm, rank)
        seq = self._seq.get(key, 0)
        ts = self._ts.get(key, 0)
        self._seq[key] = seq + 1
        self._ts[key] = ts + 1
        return seq, ts

    def collective(self, comm, n, collective, algorithm, count, dtype, root=None):
        for rank in range(n):
            seq, ts = self._next(comm, rank)
            self.events.append(
                TraceEvent(
                    seq=seq,
                    ts_ns=ts,
                    kind=EventKind.COLLECTIVE,
                    comm=comm,
                    n_ranks=n,
                    rank=rank,
                    device=rank,
                    collective=collective,
                    algorithm=algorithm,
                    count=count,
                    dtype=dtype,
                    root=root,
                )
            )

    def h2d(self, comm, n, rank, nbytes):
        seq, ts = self._next(comm, rank)
        self.events.append(
            TraceEvent(
                seq=seq,
                ts_ns=ts,
                kind=EventKind.MEMCPY,
                comm=comm,
                n_ranks=n,
                rank=rank,
                device=rank,
                copy_kind=CopyKind.H2D,
                copy_src=HOST,
                copy_dst=gpu(rank),
                bytes=nbytes,
            )
        )

    def d2h(self, comm, n, rank, nbytes):
        seq, ts = self._next(comm, rank)
        self.events.append(
            TraceEvent(
                seq=seq,
                ts_ns=ts,
                kind=EventKind.MEMCPY,
                comm=comm,
                n_ranks=n,
                rank=rank,
                device=rank,
                copy_kind=CopyKind.D2H,
                copy_src=gpu(rank),
                copy_dst=HOST,
                bytes=nbytes,
            )
        )


def _elements(nbytes: int, dtype: DataType) -> int:
    return -(-nbytes // dtype.width_bytes)


def generate_training_trace(cfg: TrainingConfig, seed: int = 0) -> list[TraceEvent]:
    """Generate the event stream of one training run.

    The schedule is a pure function of the config; the seed is reserved for
    presets that randomize auxiliary transfer sizes on top of it.
    """
    cfg.validate()
    del seed  # deterministic core schedule
    b = _TraceBuilder()
    n = cfg.n_gpus
    buckets = plan_buckets(cfg.tensor_sizes_bytes, cfg.bucket_cap_bytes)

    if cfg.broadcast_init:
        for size in cfg.tensor_sizes_bytes:
            b.collective(
                cfg.comm, n, CollectiveKind.BROADCAST, Algorithm.RING,
                _elements(size, cfg.dtype), cfg.dtype, root=0,
            )
    for _ in range(cfg.epochs):
        for _ in range(cfg.iterations_per_epoch):
            if cfg.explicit_h2d_per_iteration is not None:
                cnt, nbytes = cfg.explicit_h2d_per_iteration
                for i in range(cnt):
                    b.h2d(cfg.comm, n, i % n, nbytes)
            for bucket_bytes in buckets:
                b.collective(
                    cfg.comm, n, CollectiveKind.ALLREDUCE, cfg.algorithm,
                    _elements(bucket_bytes, cfg.dtype), cfg.dtype,
                )
    return b.events


def allreduce_calls_per_epoch(cfg: TrainingConfig) -> int:
    return len(plan_buckets(cfg.tensor_sizes_bytes, cfg.bucket_cap_bytes)) * (
        cfg.iterations_per_epoch
    )


def _resnet18_tensor_bytes() -> tuple[int, ...]:
    """Gradient tensor sizes (bytes) of an 18-layer residual classifier."""
    sizes = [64 * 3 * 7 * 7, 64, 64]  # stem conv + bn weight/bias

    def block(cin, cout, downsample):
        out = [cout * cin * 9, cout, cout, cout * cout * 9, cout, cout]
        if downsample:
            out += [cout * cin, cout, cout]
        return out

    for cin, cout in ((64, 64), (64, 128), (128, 256), (256, 512)):
        sizes += block(cin, cout, downsample=cin != cout)
        sizes += block(cout, cout, downsample=False)
    sizes += [512 * 1000, 1000]  # classifier head
    return tuple(s * 4 for s in sizes)


def resnet_like_preset(d: int) -> TrainingConfig:
    """Bucketed data-parallel image classification profile.

    One epoch issues iterations x buckets allreduce calls next to one setup
    broadcast per tensor, so allreduce dominates both call count and traffic.
    """
    return TrainingConfig(
        n_gpus=d,
        tensor_sizes_bytes=_resnet18_tensor_bytes(),
        iterations_per_epoch=587,
        bucket_cap_bytes=25 << 20,
        broadcast_init=True,
        algorithm=Algorithm.RING,
        explicit_h2d_per_iteration=(d, 192 << 10),
    )


#: Full-scale call counts of the translation-model profile; presets scale
#: the two big ones and keep the small setup collectives exact.
GNMT_FULL_COUNTS = {
    "allreduce": 30739,
    "broadcast": 5,
    "allgather": 3,
    "explicit_transfer": 778694,
}
_GNMT_BROADCAST_BYTES = 122_400_000  # 612 MB over 5 setup broadcasts
_GNMT_ALLGATHER_TOTAL_BYTES = 1_000_000
_GNMT_ALLREDUCE_BYTES = 119_126_000  # mean gradient-exchange payload


@dataclass(frozen=True)
class GnmtPlan:
    """Scaled translation-model event plan: the bucketed-allreduce config plus
    the auxiliary setup collectives and explicit-copy schedule."""

    config: TrainingConfig
    broadcast_calls: int
    broadcast_count: int
    allgather_calls: int
    allgather_count: int
    explicit_calls: int
    explicit_bytes_range: tuple[int, int] = (1 << 10, 40 << 10)


def gnmt_like_preset(d: int, scale: float = 0.001) -> GnmtPlan:
    """Translation-model profile at a configurable scale.

    Call-count structure is preserved: explicit copies outnumber allreduce
    calls by ~25x, and exactly five broadcasts plus three allgathers happen
    at setup.  At scale 1/1000 the counts come out 31/5/3/779.
    """
    if d < 1:
        raise InvalidConfig("d must be >= 1")
    n_allreduce = max(1, round(GNMT_FULL_COUNTS["allreduce"] * scale))
    n_explicit = max(1, round(GNMT_FULL_COUNTS["explicit_transfer"] * scale))
    config = TrainingConfig(
        n_gpus=d,
        tensor_sizes_bytes=(_GNMT_ALLREDUCE_BYTES,),
        iterations_per_epoch=n_allreduce,
        bucket_cap_bytes=_GNMT_ALLREDUCE_BYTES,
        algorithm=Algorithm.RING,
    )
    return GnmtPlan(
        config=config,
        broadcast_calls=GNMT_FULL_COUNTS["broadcast"],
        broadcast_count=_elements(_GNMT_BROADCAST_BYTES, GRADIENT_DTYPE),
        allgather_calls=GNMT_FULL_COUNTS["allgather"],
        allgather_count=max(
            1, round(_GNMT_ALLGATHER_TOTAL_BYTES / (4 * d))
        ),
        explicit_calls=n_explicit,
    )


def generate_gnmt_trace(d: int, scale: float = 0.001, seed: int = 0) -> list[TraceEvent]:
    """Assemble the full translation-model trace from its plan.

    Explicit-copy sizes are drawn from the plan's range with the given seed;
    everything else is scheduled deterministically.
    """
    plan = gnmt_like_preset(d, scale)
    cfg = plan.config
    rng = random.Random(seed)
    b = _TraceBuilder()
    n = cfg.n_gpus

    for _ in range(plan.broadcast_calls):
        b.collective(
            cfg.comm, n, CollectiveKind.BROADCAST, Algorithm.RING,
            plan.broadcast_count, GRADIENT_DTYPE, root=0,
        )
    for _ in range(plan.allgather_calls):
        b.collective(
            cfg.comm, n, CollectiveKind.ALLGATHER, Algorithm.RING,
            plan.allgather_count, GRADIENT_DTYPE,
        )

    # Spread copies across gradient-exchange rounds, as input loading would be.
    n_rounds = cfg.iterations_per_epoch
    lo, hi = plan.explicit_bytes_range
    quota = [plan.explicit_calls // n_rounds] * n_rounds
    for i in range(plan.explicit_calls % n_rounds):
        quota[i] += 1
    for round_idx in range(n_rounds):
        for i in range(quota[round_idx]):
            nbytes = rng.randint(lo, hi)
            rank = rng.randrange(n)
            if rng.random() < 0.9:
                b.h2d(cfg.comm, n, rank, nbytes)
            else:
                b.d2h(cfg.comm, n, rank, nbytes)
        b.collective(
            cfg.comm, n, CollectiveKind.ALLREDUCE, cfg.algorithm,
            _elements(_GNMT_ALLREDUCE_BYTES, GRADIENT_DTYPE), GRADIENT_DTYPE,
        )
    return b.events
