"""Command-line front end: analyze, gen, verify, render.

analyze runs the full pipeline (parse, group, decompose, accumulate) and
writes matrices, statistics, diagnostics, and optional heatmaps; gen emits
synthetic workload traces; verify prints model vs. step-oracle totals for one
collective; render turns an emitted matrix file back into a heatmap.

Exit codes: 0 success, 1 I/O failure, 2 validation failure (for analyze, no
output files are written in that case).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import workload
from .decompose import DEFAULT_TREE_THRESHOLD, decompose_instance
from .errors import TraceError
from .events import (
    Algorithm,
    CollectiveKind,
    DataType,
    parse_trace,
    write_trace,
)
from .grouping import CollectiveInstance
from .heatmap import LINEAR, LOG, RenderSpec, render_heatmap
from .matrix import (
    ALL_TYPES,
    AnalysisResult,
    CommMatrix,
    ModelConfig,
    analyze_events,
)
from .oracle import aggregate, simulate_ring, simulate_tree

OUT_DIR_ENV = "COMSCRIBE_OUT"

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2


# ---------------------------------------------------------------- matrix I/O

def matrix_to_csv(matrix: CommMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    labels = matrix.labels()
    writer.writerow([""] + labels)
    for label, row in zip(labels, matrix.rows()):
        writer.writerow([label] + row)
    return out.getvalue()


def matrix_from_csv(text: str) -> CommMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    labels = rows[0][1:]
    with_agg = bool(labels) and labels[-1] == "net"
    d = len(labels) - 1 - (1 if with_agg else 0)
    return CommMatrix.from_rows(d, [row[1:] for row in rows[1:]], with_agg)


def matrix_to_json(matrix: CommMatrix, meta: dict | None = None) -> str:
    obj = {
        "d": matrix.d,
        "aggregator": matrix.with_aggregator,
        "labels": matrix.labels(),
        "cells": matrix.rows(),
    }
    if meta:
        obj.update(meta)
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def matrix_from_json(text: str) -> CommMatrix:
    obj = json.loads(text)
    return CommMatrix.from_rows(obj["d"], obj["cells"], obj.get("aggregator", False))


def stats_to_json(result: AnalysisResult, meta: dict) -> str:
    obj = {
        "types": {
            t: {
                "calls": st.call_count,
                "payload_bytes": st.payload_bytes,
                "wire_bytes": st.wire_bytes,
            }
            for t, st in result.stats.types.items()
        },
        "instances": result.stats.instances,
        "diagnostics": result.stats.diagnostics,
    }
    obj.update(meta)
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def stats_to_csv(result: AnalysisResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["type", "calls", "payload_bytes", "wire_bytes"])
    for t in ALL_TYPES:
        st = result.stats.types[t]
        writer.writerow([t, st.call_count, st.payload_bytes, st.wire_bytes])
    return out.getvalue()


# ------------------------------------------------------------------- analyze

def _parse_ring_perm(text: str | None):
    if not text:
        return None
    return tuple(int(x) for x in text.split(","))


def cmd_analyze(args) -> int:
    out_dir = Path(args.out or os.environ.get(OUT_DIR_ENV) or ".")
    config = ModelConfig(
        ring_order=_parse_ring_perm(args.ring_perm),
        tree_threshold=args.tree_threshold,
    )
    try:
        events = []
        digest = hashlib.sha256()
        for path in args.trace:
            raw = Path(path).read_bytes()
            digest.update(raw)
            events.extend(parse_trace(raw))
        result = analyze_events(events, d=args.gpus, config=config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    meta = {"trace_digest": f"sha256:{digest.hexdigest()}", "symmetrized": args.symmetrize}
    matrices: dict[str, CommMatrix] = {"combined": result.combined}
    if args.split_per_primitive:
        for name, m in result.per_primitive.items():
            matrices[name] = m
    if args.symmetrize:
        matrices = {name: m.symmetrized() for name, m in matrices.items()}

    spec = RenderSpec(scale=args.scale)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, m in matrices.items():
            if args.format in ("csv", "both"):
                (out_dir / f"matrix_{name}.csv").write_text(matrix_to_csv(m))
            if args.format in ("json", "both"):
                (out_dir / f"matrix_{name}.json").write_text(matrix_to_json(m, meta))
            if args.heatmap:
                (out_dir / f"heatmap_{name}.svg").write_text(render_heatmap(m, spec))
        (out_dir / "stats.json").write_text(stats_to_json(result, meta))
        if args.format in ("csv", "both"):
            (out_dir / "stats.csv").write_text(stats_to_csv(result))
        diags = [
            {
                "reason": dg.reason,
                "comm": dg.comm,
                "ordinal": dg.ordinal,
                "detail": dg.detail,
            }
            for dg in result.diagnostics
        ]
        (out_dir / "diagnostics.json").write_text(
            json.dumps(diags, sort_keys=True, indent=2) + "\n"
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    print(
        f"analyzed {len(events)} events -> {result.stats.instances} instances, "
        f"{result.stats.diagnostics} diagnostics, d={result.d}"
    )
    for dg in result.diagnostics:
        print(f"warning: {dg}", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------- gen

def _config_from_json(path: str) -> workload.TrainingConfig:
    obj = json.loads(Path(path).read_text())
    return workload.TrainingConfig(
        n_gpus=obj["n_gpus"],
        tensor_sizes_bytes=tuple(obj["tensor_sizes_bytes"]),
        iterations_per_epoch=obj["iterations_per_epoch"],
        bucket_cap_bytes=obj["bucket_cap_bytes"],
        epochs=obj.get("epochs", 1),
        broadcast_init=obj.get("broadcast_init", False),
        algorithm=Algorithm(obj.get("algorithm", "ring")),
        explicit_h2d_per_iteration=(
            tuple(obj["explicit_h2d_per_iteration"])
            if obj.get("explicit_h2d_per_iteration")
            else None
        ),
        dtype=DataType(obj.get("dtype", "float32")),
    )


def cmd_gen(args) -> int:
    try:
        if args.preset == "gnmt-like":
            events = workload.generate_gnmt_trace(args.gpus, args.scale, args.seed)
        elif args.preset == "resnet-like":
            cfg = workload.resnet_like_preset(args.gpus)
            events = workload.generate_training_trace(cfg, args.seed)
        elif args.config:
            events = workload.generate_training_trace(
                _config_from_json(args.config), args.seed
            )
        elif args.tensor_bytes:
            cfg = workload.TrainingConfig(
                n_gpus=args.gpus,
                tensor_sizes_bytes=tuple(
                    int(x) for x in args.tensor_bytes.split(",")
                ),
                iterations_per_epoch=args.iters,
                bucket_cap_bytes=args.bucket_bytes,
                epochs=args.epochs,
                broadcast_init=args.broadcast_init,
                algorithm=Algorithm(args.algo),
            )
            events = workload.generate_training_trace(cfg, args.seed)
        else:
            print("error: need --preset, --config, or --tensor-bytes", file=sys.stderr)
            return EXIT_INVALID
        data = write_trace(events)
        Path(args.out).write_bytes(data)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"wrote {len(events)} events to {args.out}")
    return EXIT_OK


# -------------------------------------------------------------------- verify

def _closed_form(collective: CollectiveKind, algo: Algorithm, n: int, s: int):
    """Expected per-rank sent bytes when N divides S, None when no closed form
    applies."""
    if algo is Algorithm.COLLNET:
        return s
    if algo is Algorithm.TREE:
        return None  # classes {S, 2S}, checked separately
    if n == 1:
        return 0
    if collective is CollectiveKind.ALLREDUCE:
        return 2 * (n - 1) * s // n if s % n == 0 else None
    if collective in (CollectiveKind.ALLGATHER, CollectiveKind.REDUCESCATTER):
        return (n - 1) * s // n if s % n == 0 else None
    return None  # broadcast/reduce totals are per-edge, not per-rank uniform


def cmd_verify(args) -> int:
    try:
        collective = CollectiveKind(args.collective)
        algo = Algorithm(args.algo)
        n, s = args.ranks, args.bytes
        ring_order = _parse_ring_perm(args.ring_perm)
        root = args.root
        if collective in (CollectiveKind.BROADCAST, CollectiveKind.REDUCE) and root is None:
            root = 0
        count, dtype = s, DataType.INT8
        if collective in (CollectiveKind.ALLGATHER, CollectiveKind.REDUCESCATTER):
            if s % n:
                print("error: bytes must be divisible by ranks for this collective",
                      file=sys.stderr)
                return EXIT_INVALID
            count = s // n
        inst = CollectiveInstance(
            comm="verify", ordinal=0, collective=collective, algorithm=algo,
            n_ranks=n, count=count, dtype=dtype, root=root,
            per_rank_devices=tuple(range(n)),
        )
        model = decompose_instance(inst, ring_order=ring_order)
        if algo is Algorithm.TREE:
            log = simulate_tree(n, s)
        elif algo is Algorithm.COLLNET:
            log = None
        else:
            log = simulate_ring(collective, n, s, root=root, ring_order=ring_order)
        oracle = aggregate(log) if log is not None else None
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    print(f"collective={collective.value} algo={algo.value} N={n} S={s}")
    ok = True
    for r in range(n):
        m_sent = model.sent_by_rank.get(r, 0)
        m_recv = model.recv_by_rank.get(r, 0)
        line = f"rank {r}: model sent={m_sent} recv={m_recv}"
        if oracle is not None:
            o_sent = oracle.sent_by_rank.get(r, 0)
            o_recv = oracle.recv_by_rank.get(r, 0)
            line += f" | oracle sent={o_sent} recv={o_recv}"
        print(line)
    if oracle is not None:
        same = model.by_pair() == oracle.by_pair()
        print(f"model == oracle (transfer-for-transfer): {'yes' if same else 'NO'}")
        ok &= same
    else:
        print("oracle: n/a (collnet is model-defined)")
    cf = _closed_form(collective, algo, n, s)
    if cf is not None:
        match = all(
            model.sent_by_rank.get(r, 0) == cf and model.recv_by_rank.get(r, 0) == cf
            for r in range(n)
        )
        print(f"closed form per-rank bytes: {cf} -> {'match' if match else 'MISMATCH'}")
        ok &= match
    if algo is Algorithm.TREE and n >= 2 and n % 2 == 0 and (n & (n - 1)) == 0:
        totals = sorted(model.sent_by_rank.values())
        want = sorted([s, s] + [2 * s] * (n - 2))
        match = totals == want
        print(f"tree classes {{S, 2S}}: {'match' if match else 'MISMATCH'}")
        ok &= match
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_INVALID


# -------------------------------------------------------------------- render

def cmd_render(args) -> int:
    try:
        path = Path(args.matrix)
        text = path.read_text()
        matrix = (
            matrix_from_json(text)
            if path.suffix == ".json"
            else matrix_from_csv(text)
        )
        spec = RenderSpec(scale=args.scale, cell_px=args.cell_px)
        Path(args.out).write_text(render_heatmap(matrix, spec))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commtrace",
        description="Analyze inter-GPU communication traces into matrices and stats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="trace file(s) -> matrices, stats, heatmaps")
    p.add_argument("trace", nargs="+", help="JSONL trace file(s)")
    p.add_argument("-o", "--out", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p.add_argument("--gpus", type=int, default=None, help="device count (default: inferred)")
    p.add_argument("--split-per-primitive", action="store_true")
    p.add_argument("--symmetrize", action="store_true",
                   help="emit undirected matrices (M + M^T)")
    p.add_argument("--ring-perm", help="comma-separated ring order, e.g. 0,2,1,3")
    p.add_argument("--tree-threshold", type=int, default=DEFAULT_TREE_THRESHOLD,
                   help="auto algorithm: tree below this payload size")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--heatmap", action="store_true", help="also write SVG heatmaps")
    p.add_argument("--scale", choices=(LOG, LINEAR), default=LOG)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen", help="generate a synthetic workload trace")
    p.add_argument("--preset", choices=("resnet-like", "gnmt-like"))
    p.add_argument("--gpus", type=int, default=8)
    p.add_argument("--scale", type=float, default=0.001,
                   help="call-count scale for gnmt-like")
    p.add_argument("--config", help="TrainingConfig as a JSON file")
    p.add_argument("--tensor-bytes", help="comma-separated gradient tensor sizes")
    p.add_argument("--bucket-bytes", type=int, default=25 << 20)
    p.add_argument("--iters", type=int, default=1)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--broadcast-init", action="store_true")
    p.add_argument("--algo", choices=[a.value for a in Algorithm], default="ring")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="model vs. step-oracle totals for one call")
    p.add_argument("collective", choices=[c.value for c in CollectiveKind])
    p.add_argument("algo", choices=("ring", "tree", "collnet"))
    p.add_argument("ranks", type=int)
    p.add_argument("bytes", type=int)
    p.add_argument("--root", type=int, default=None)
    p.add_argument("--ring-perm")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="matrix CSV/JSON -> SVG heatmap")
    p.add_argument("matrix")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--scale", choices=(LOG, LINEAR), default=LOG)
    p.add_argument("--cell-px", type=int, default=44)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
