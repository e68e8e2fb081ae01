"""Trace-driven analysis of inter-GPU collective and P2P communication.

Pipeline: parse a JSONL trace, group per-rank collective events into logical
instances, decompose each call into per-pair byte transfers with
algorithm-aware models (ring, double binary tree, collnet), accumulate
communication matrices, and report statistics and heatmaps.
"""

from .errors import (
    DegenerateTree,
    EndpointOutOfRange,
    InvalidConfig,
    InvariantViolation,
    MalformedLine,
    MissingRoot,
    SchemaViolation,
    TraceError,
    WrongAlgorithm,
)
from .events import (
    Algorithm,
    CollectiveKind,
    CopyKind,
    DataType,
    Endpoint,
    EndpointKind,
    EventKind,
    HOST,
    NET_AGGREGATOR,
    TraceEvent,
    gpu,
    parse_trace,
    parse_trace_file,
    write_trace,
)
from .grouping import CollectiveInstance, Diagnostic, group_collectives
from .trees import DoubleBinaryTree, Tree, build_double_binary_tree
from .decompose import (
    Decomposition,
    PairTransfer,
    decompose_allgather_ring,
    decompose_allreduce_collnet,
    decompose_allreduce_ring,
    decompose_allreduce_tree,
    decompose_broadcast_ring,
    decompose_copy,
    decompose_instance,
    decompose_p2p,
    decompose_reduce_ring,
    decompose_reducescatter_ring,
    match_p2p,
    select_algorithm,
    DEFAULT_TREE_THRESHOLD,
)
from .oracle import StepLog, aggregate, simulate_ring, simulate_tree
from .matrix import (
    AnalysisResult,
    CommMatrix,
    ModelConfig,
    StatsSummary,
    TypeStats,
    accumulate,
    analyze_events,
    infer_device_count,
    merge,
    split_by_primitive,
    summarize,
)
from .workload import (
    GnmtPlan,
    TrainingConfig,
    generate_gnmt_trace,
    generate_training_trace,
    gnmt_like_preset,
    plan_buckets,
    resnet_like_preset,
)
from .heatmap import DEFAULT_STOPS, RenderSpec, render_heatmap, write_heatmap

__version__ = "0.1.0"
