"""Synthetic workload generation: bucketing rules, presets, determinism."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from commtrace.errors import InvalidConfig
from commtrace.events import CollectiveKind, EventKind, write_trace, parse_trace
from commtrace.grouping import group_collectives
from commtrace.workload import (
    TrainingConfig,
    allreduce_calls_per_epoch,
    generate_gnmt_trace,
    generate_training_trace,
    gnmt_like_preset,
    plan_buckets,
    resnet_like_preset,
)


def _cfg(tensors, cap, iters=1, **kw):
    return TrainingConfig(
        n_gpus=kw.pop("n_gpus", 2),
        tensor_sizes_bytes=tuple(tensors),
        iterations_per_epoch=iters,
        bucket_cap_bytes=cap,
        **kw,
    )


def _allreduce_count(events):
    return sum(
        1 for e in events
        if e.kind is EventKind.COLLECTIVE
        and e.collective is CollectiveKind.ALLREDUCE and e.rank == 0
    )


def test_one_bucket_when_cap_swallows_all():
    cfg = _cfg([10, 20, 30], cap=100, iters=7)
    assert allreduce_calls_per_epoch(cfg) == 7
    assert _allreduce_count(generate_training_trace(cfg)) == 7


def test_naive_bound_when_cap_below_every_tensor():
    cfg = _cfg([10, 20, 30], cap=5, iters=4)
    assert allreduce_calls_per_epoch(cfg) == 3 * 4
    assert _allreduce_count(generate_training_trace(cfg)) == 12


def test_reverse_walk_packing_example():
    assert plan_buckets((10, 20, 30), 35) == [30, 30]  # {30}, {20, 10}
    cfg = _cfg([10, 20, 30], cap=35)
    assert allreduce_calls_per_epoch(cfg) == 2


def test_oversized_tensor_travels_alone():
    assert plan_buckets((100, 2, 3), 10) == [5, 100]


def test_invalid_configs():
    with pytest.raises(InvalidConfig):
        _cfg([], cap=10).validate()
    with pytest.raises(InvalidConfig):
        _cfg([5], cap=0).validate()
    with pytest.raises(InvalidConfig):
        _cfg([0], cap=10).validate()
    with pytest.raises(InvalidConfig):
        _cfg([5], cap=10, iters=0).validate()


@given(
    st.lists(st.integers(1, 1000), min_size=1, max_size=30),
    st.integers(1, 2000),
    st.integers(1, 2000),
)
def test_bucket_monotonicity(tensors, cap_a, cap_b):
    lo, hi = sorted((cap_a, cap_b))
    assert len(plan_buckets(tensors, hi)) <= len(plan_buckets(tensors, lo))


@given(
    st.lists(st.integers(1, 1000), min_size=1, max_size=30),
    st.integers(1, 2000),
    st.integers(1, 5),
)
def test_bucket_count_bounds(tensors, cap, iters):
    cfg = _cfg(tensors, cap=cap, iters=iters)
    calls = allreduce_calls_per_epoch(cfg)
    assert iters <= calls <= len(tensors) * iters


def test_buckets_conserve_bytes():
    tensors = (7, 13, 64, 3, 3, 100)
    assert sum(plan_buckets(tensors, 64)) == sum(tensors)


def test_trace_is_deterministic():
    cfg = resnet_like_preset(4)
    a = write_trace(generate_training_trace(cfg, seed=3))
    b = write_trace(generate_training_trace(cfg, seed=3))
    assert a == b
    g1 = write_trace(generate_gnmt_trace(4, seed=9))
    g2 = write_trace(generate_gnmt_trace(4, seed=9))
    assert g1 == g2


def test_generated_trace_validates_and_groups_cleanly():
    cfg = _cfg([40, 80, 120], cap=100, iters=3, n_gpus=4,
               broadcast_init=True, explicit_h2d_per_iteration=(4, 1024))
    events = generate_training_trace(cfg)
    reparsed = parse_trace(write_trace(events))
    assert reparsed == events
    instances, diags = group_collectives(reparsed)
    assert not diags
    # 3 init broadcasts + 3 buckets (120 alone, 80, 40) x 3 iterations
    assert len(instances) == 3 + 3 * 3
    assert all(i.n_ranks == 4 for i in instances)


def test_broadcast_init_roots_and_epochs():
    cfg = _cfg([16], cap=16, iters=2, n_gpus=2, broadcast_init=True, epochs=3)
    events = generate_training_trace(cfg)
    instances, _ = group_collectives(events)
    bcasts = [i for i in instances if i.collective is CollectiveKind.BROADCAST]
    ars = [i for i in instances if i.collective is CollectiveKind.ALLREDUCE]
    assert len(bcasts) == 1 and bcasts[0].root == 0
    assert len(ars) == 2 * 3  # per-epoch schedule repeats


def test_gnmt_preset_scaled_counts():
    events = generate_gnmt_trace(8, scale=0.001, seed=0)
    instances, diags = group_collectives(events)
    assert not diags
    by_kind = {}
    for i in instances:
        by_kind[i.collective] = by_kind.get(i.collective, 0) + 1
    assert by_kind[CollectiveKind.ALLREDUCE] == 31
    assert by_kind[CollectiveKind.BROADCAST] == 5
    assert by_kind[CollectiveKind.ALLGATHER] == 3
    explicit = sum(1 for e in events if e.kind is EventKind.MEMCPY)
    assert explicit == 779


def test_gnmt_count_ordering_matches_profile():
    events = generate_gnmt_trace(8, scale=0.001, seed=0)
    instances, _ = group_collectives(events)
    counts = {}
    for i in instances:
        counts[i.collective] = counts.get(i.collective, 0) + 1
    explicit = sum(1 for e in events if e.kind is EventKind.MEMCPY)
    assert explicit > counts[CollectiveKind.ALLREDUCE] > counts[
        CollectiveKind.BROADCAST
    ] > counts[CollectiveKind.ALLGATHER]


def test_gnmt_single_gpu_collectives_are_zero_traffic():
    from commtrace.matrix import analyze_events

    events = generate_gnmt_trace(1, scale=0.001, seed=0)
    result = analyze_events(events)
    for name in ("allreduce", "broadcast", "allgather"):
        assert result.per_primitive[name].max_cell == 0
    assert result.per_primitive["explicit_transfer"].max_cell > 0


def test_resnet_preset_shape():
    cfg = resnet_like_preset(8)
    assert len(cfg.tensor_sizes_bytes) == 62
    assert sum(cfg.tensor_sizes_bytes) == 46_758_048
    assert len(plan_buckets(cfg.tensor_sizes_bytes, cfg.bucket_cap_bytes)) == 2
    assert allreduce_calls_per_epoch(cfg) == 1174
