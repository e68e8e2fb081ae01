/**
 * Interposing shim over the NCCL-style API surface.
 *
 * Wraps the collective and point-to-point entry points of a library object:
 * each intercepted call appends one JSONL trace line (the analyzer's wire
 * format) *before* forwarding to the real implementation, never altering
 * arguments and passing the return status through unchanged. The dynamic
 * loader trick of a preloaded .so maps here to handing the application a
 * wrapped module surface.
 *
 * Environment:
 *   COMSCRIBE_OUT      sink path (default "comscribe_trace.jsonl")
 *   COMSCRIBE_DISABLE  "1" silences logging entirely
 *
 * A sink that cannot be written disables logging with a single warning; the
 * application's calls keep forwarding regardless.
 */

import { appendFileSync } from "node:fs";
import * as real from "./mocknccl.js";
import type { Buffer, NcclComm, NcclDataType, NcclRedOp, NcclResult } from "./mocknccl.js";

export type NcclApi = typeof real;

const DTYPE_NAMES: Record<number, string> = {
  [real.NcclDataType.ncclInt8]: "int8",
  [real.NcclDataType.ncclUint8]: "uint8",
  [real.NcclDataType.ncclInt32]: "int32",
  [real.NcclDataType.ncclUint32]: "uint32",
  [real.NcclDataType.ncclInt64]: "int64",
  [real.NcclDataType.ncclUint64]: "uint64",
  [real.NcclDataType.ncclFloat16]: "float16",
  [real.NcclDataType.ncclBfloat16]: "bfloat16",
  [real.NcclDataType.ncclFloat32]: "float32",
  [real.NcclDataType.ncclFloat64]: "float64",
};

export interface InterposerOptions {
  /** Sink path; overrides COMSCRIBE_OUT. */
  sinkPath?: string;
  /** Timestamp source in nanoseconds (tests inject a deterministic one). */
  now?: () => number;
}

interface TraceFields {
  kind: "collective" | "send" | "recv";
  coll?: string;
  count: number;
  dtype: NcclDataType;
  root?: number;
  peer?: number;
}

export class Interposer {
  private readonly sinkPath: string;
  private readonly now: () => number;
  private readonly disabled: boolean;
  private sinkBroken = false;
  private readonly seq = new Map<string, number>();
  private readonly commIds = new WeakMap<object, string>();
  private readonly nonce = Math.floor(Math.random() * 0xffffffff)
    .toString(16)
    .padStart(8, "0");
  private nextComm = 0;

  constructor(opts: InterposerOptions = {}) {
    this.sinkPath =
      opts.sinkPath ?? process.env.COMSCRIBE_OUT ?? "comscribe_trace.jsonl";
    this.now = opts.now ?? (() => Number(process.hrtime.bigint()));
    this.disabled = process.env.COMSCRIBE_DISABLE === "1";
  }

  /** Stable-within-run communicator id: hex handle number plus a run nonce. */
  private commId(comm: NcclComm): string {
    const group = comm.group as object;
    let id = this.commIds.get(group);
    if (id === undefined) {
      id = `0x${(this.nextComm++).toString(16)}-${this.nonce}`;
      this.commIds.set(group, id);
    }
    return id;
  }

  private log(comm: NcclComm, fields: TraceFields): void {
    if (this.disabled || this.sinkBroken) return;
    const cid = this.commId(comm);
    const key = `${cid}:${comm.rank}`;
    const seq = this.seq.get(key) ?? 0;
    this.seq.set(key, seq + 1);
    const line: Record<string, unknown> = {
      seq,
      ts: this.now(),
      kind: fields.kind,
      comm: cid,
      nranks: comm.nranks,
      rank: comm.rank,
      dev: comm.device,
    };
    if (fields.kind === "collective") {
      line.coll = fields.coll;
      line.algo = "auto"; // the library's internal choice is not observable here
      line.count = fields.count;
      line.dtype = DTYPE_NAMES[fields.dtype];
      if (fields.root !== undefined) line.root = fields.root;
    } else {
      line.peer = fields.peer;
      line.count = fields.count;
      line.dtype = DTYPE_NAMES[fields.dtype];
    }
    try {
      appendFileSync(this.sinkPath, JSON.stringify(line) + "\n");
    } catch (err) {
      this.sinkBroken = true;
      console.error(
        `interposer: cannot write trace sink ${this.sinkPath}, logging disabled (${err})`
      );
    }
  }

  /** The wrapped API surface: same signatures, logging on the way through. */
  wrap(lib: NcclApi = real): NcclApi {
    const log = this.log.bind(this);
    return {
      ...lib,
      ncclAllReduce(sendbuff: Buffer, recvbuff: Buffer, count: number,
                    datatype: NcclDataType, op: NcclRedOp, comm: NcclComm): NcclResult {
        log(comm, { kind: "collective", coll: "allreduce", count, dtype: datatype });
        return lib.ncclAllReduce(sendbuff, recvbuff, count, datatype, op, comm);
      },
      ncclBroadcast(sendbuff: Buffer, recvbuff: Buffer, count: number,
                    datatype: NcclDataType, root: number, comm: NcclComm): NcclResult {
        log(comm, { kind: "collective", coll: "broadcast", count, dtype: datatype, root });
        return lib.ncclBroadcast(sendbuff, recvbuff, count, datatype, root, comm);
      },
      ncclReduce(sendbuff: Buffer, recvbuff: Buffer, count: number,
                 datatype: NcclDataType, op: NcclRedOp, root: number,
                 comm: NcclComm): NcclResult {
        log(comm, { kind: "collective", coll: "reduce", count, dtype: datatype, root });
        return lib.ncclReduce(sendbuff, recvbuff, count, datatype, op, root, comm);
      },
      ncclAllGather(sendbuff: Buffer, recvbuff: Buffer, sendcount: number,
                    datatype: NcclDataType, comm: NcclComm): NcclResult {
        log(comm, { kind: "collective", coll: "allgather", count: sendcount, dtype: datatype });
        return lib.ncclAllGather(sendbuff, recvbuff, sendcount, datatype, comm);
      },
      ncclReduceScatter(sendbuff: Buffer, recvbuff: Buffer, recvcount: number,
                        datatype: NcclDataType, op: NcclRedOp, comm: NcclComm): NcclResult {
        log(comm, { kind: "collective", coll: "reducescatter", count: recvcount, dtype: datatype });
        return lib.ncclReduceScatter(sendbuff, recvbuff, recvcount, datatype, op, comm);
      },
      ncclSend(sendbuff: Buffer, count: number, datatype: NcclDataType,
               peer: number, comm: NcclComm): NcclResult {
        log(comm, { kind: "send", count, dtype: datatype, peer });
        return lib.ncclSend(sendbuff, count, datatype, peer, comm);
      },
      ncclRecv(recvbuff: Buffer, count: number, datatype: NcclDataType,
               peer: number, comm: NcclComm): NcclResult {
        log(comm, { kind: "recv", count, dtype: datatype, peer });
        return lib.ncclRecv(recvbuff, count, datatype, peer, comm);
      },
    };
  }
}

/** One-call install: returns the wrapped library surface. */
export function installInterposer(
  opts: InterposerOptions = {},
  lib: NcclApi = real
): NcclApi {
  return new Interposer(opts).wrap(lib);
}
