import pytest

from commtrace.events import (
    Algorithm,
    CollectiveKind,
    CopyKind,
    DataType,
    EventKind,
    HOST,
    TraceEvent,
    gpu,
)
from commtrace.grouping import CollectiveInstance


def make_instance(
    collective=CollectiveKind.ALLREDUCE,
    algorithm=Algorithm.RING,
    n=4,
    count=1024,
    dtype=DataType.INT8,
    root=None,
    devices=None,
    comm="c0",
    ordinal=0,
):
    if devices is None:
        devices = tuple(range(n))
    return CollectiveInstance(
        comm=comm,
        ordinal=ordinal,
        collective=collective,
        algorithm=algorithm,
        n_ranks=n,
        count=count,
        dtype=dtype,
        root=root,
        per_rank_devices=devices,
    )


def collective_event(
    seq=0,
    rank=0,
    n=2,
    comm="c0",
    collective=CollectiveKind.ALLREDUCE,
    algorithm=Algorithm.RING,
    count=256,
    dtype=DataType.FLOAT32,
    root=None,
    device=None,
    ts=0,
):
    return TraceEvent(
        seq=seq,
        ts_ns=ts,
        kind=EventKind.COLLECTIVE,
        comm=comm,
        n_ranks=n,
        rank=rank,
        device=rank if device is None else device,
        collective=collective,
        algorithm=algorithm,
        count=count,
        dtype=dtype,
        root=root,
    )


def p2p_event(kind, seq=0, rank=0, peer=1, n=2, count=256, dtype=DataType.FLOAT32, comm="c0"):
    return TraceEvent(
        seq=seq,
        ts_ns=0,
        kind=kind,
        comm=comm,
        n_ranks=n,
        rank=rank,
        device=rank,
        peer=peer,
        count=count,
        dtype=dtype,
    )


def h2d_event(seq=0, rank=0, n=4, dst_gpu=0, nbytes=4096, comm="c0"):
    return TraceEvent(
        seq=seq,
        ts_ns=0,
        kind=EventKind.MEMCPY,
        comm=comm,
        n_ranks=n,
        rank=rank,
        device=rank,
        copy_kind=CopyKind.H2D,
        copy_src=HOST,
        copy_dst=gpu(dst_gpu),
        bytes=nbytes,
    )


def pair_map(dec):
    """(src index-or-'net', dst, bytes) view of a decomposition for asserts."""
    def key(ep):
        return ep.index if ep.kind.value == "gpu" else ep.kind.value
    return {(key(s), key(d)): b for (s, d), b in dec.by_pair().items()}


@pytest.fixture
def tmp_trace(tmp_path):
    def write(data: bytes, name="trace.jsonl"):
        path = tmp_path / name
        path.write_bytes(data)
        return path
    return write
