/**
 * Mock NCCL-style collective library, GPU-free.
 *
 * One process owns every "device": ncclCommInitAll hands out one communicator
 * handle per rank, and a collective executes once all ranks of the
 * communicator have called it with compatible arguments (real values are
 * reduced/copied, so callers can verify results end to end). Interleaved
 * per-rank call orders are fine; execution fires on the last participant.
 */

export const ncclSuccess = 0;
export const ncclInvalidArgument = 4;
export const ncclInvalidUsage = 5;
export type NcclResult = number;

export enum NcclDataType {
  ncclInt8 = 0,
  ncclUint8 = 1,
  ncclInt32 = 2,
  ncclUint32 = 3,
  ncclInt64 = 4,
  ncclUint64 = 5,
  ncclFloat16 = 6,
  ncclBfloat16 = 7,
  ncclFloat32 = 8,
  ncclFloat64 = 9,
}

export enum NcclRedOp {
  ncclSum = 0,
  ncclProd = 1,
  ncclMax = 2,
  ncclMin = 3,
}

export interface Buffer {
  readonly length: number;
  [index: number]: number;
}

interface PendingCollective {
  kind: string;
  count: number;
  datatype: NcclDataType;
  op?: NcclRedOp;
  root?: number;
  sendbufs: (Buffer | null)[];
  recvbufs: (Buffer | null)[];
  joined: Set<number>;
}

interface PendingP2P {
  buf: Buffer;
  count: number;
  datatype: NcclDataType;
}

class CommGroup {
  readonly nranks: number;
  readonly queue: PendingCollective[] = [];
  readonly sends = new Map<string, PendingP2P[]>();
  readonly recvs = new Map<string, PendingP2P[]>();

  constructor(nranks: number) {
    this.nranks = nranks;
  }
}

export class NcclComm {
  constructor(
    readonly group: CommGroup,
    readonly rank: number,
    readonly device: number
  ) {}

  get nranks(): number {
    return this.group.nranks;
  }
}

export function ncclCommInitAll(nranks: number): NcclComm[] {
  if (nranks < 1) throw new Error("nranks must be >= 1");
  const group = new CommGroup(nranks);
  return Array.from({ length: nranks }, (_, r) => new NcclComm(group, r, r));
}

export function ncclCommCount(comm: NcclComm): number {
  return comm.nranks;
}

export function ncclCommUserRank(comm: NcclComm): number {
  return comm.rank;
}

function reduceValues(values: number[], op: NcclRedOp): number {
  switch (op) {
    case NcclRedOp.ncclSum:
      return values.reduce((a, b) => a + b, 0);
    case NcclRedOp.ncclProd:
      return values.reduce((a, b) => a * b, 1);
    case NcclRedOp.ncclMax:
      return values.reduce((a, b) => Math.max(a, b));
    case NcclRedOp.ncclMin:
      return values.reduce((a, b) => Math.min(a, b));
  }
}

function execute(pending: PendingCollective, nranks: number): void {
  const { kind, count } = pending;
  const send = pending.sendbufs as Buffer[];
  const recv = pending.recvbufs as Buffer[];
  if (kind === "allreduce") {
    for (let i = 0; i < count; i++) {
      const v = reduceValues(send.map((b) => b[i]), pending.op!);
      for (let r = 0; r < nranks; r++) recv[r][i] = v;
    }
  } else if (kind === "broadcast") {
    for (let i = 0; i < count; i++) {
      const v = send[pending.root!][i];
      for (let r = 0; r < nranks; r++) recv[r][i] = v;
    }
  } else if (kind === "reduce") {
    for (let i = 0; i < count; i++) {
      recv[pending.root!][i] = reduceValues(send.map((b) => b[i]), pending.op!);
    }
  } else if (kind === "allgather") {
    for (let r = 0; r < nranks; r++) {
      for (let i = 0; i < count; i++) {
        const v = send[r][i];
        for (let q = 0; q < nranks; q++) recv[q][r * count + i] = v;
      }
    }
  } else if (kind === "reducescatter") {
    for (let r = 0; r < nranks; r++) {
      for (let i = 0; i < count; i++) {
        recv[r][i] = reduceValues(
          send.map((b) => b[r * count + i]),
          pending.op!
        );
      }
    }
  }
}

function joinCollective(
  comm: NcclComm,
  desc: Omit<PendingCollective, "sendbufs" | "recvbufs" | "joined">,
  sendbuf: Buffer | null,
  recvbuf: Buffer | null
): NcclResult {
  const group = comm.group;
  let op = group.queue.find((p) => !p.joined.has(comm.rank));
  if (op === undefined) {
    op = {
      ...desc,
      sendbufs: new Array(group.nranks).fill(null),
      recvbufs: new Array(group.nranks).fill(null),
      joined: new Set(),
    };
    group.queue.push(op);
  } else if (
    op.kind !== desc.kind ||
    op.count !== desc.count ||
    op.datatype !== desc.datatype ||
    op.op !== desc.op ||
    op.root !== desc.root
  ) {
    return ncclInvalidUsage; // ranks disagree on the collective's arguments
  }
  op.joined.add(comm.rank);
  op.sendbufs[comm.rank] = sendbuf;
  op.recvbufs[comm.rank] = recvbuf;
  if (op.joined.size === group.nranks) {
    execute(op, group.nranks);
    group.queue.splice(group.queue.indexOf(op), 1);
  }
  return ncclSuccess;
}

export function ncclAllReduce(
  sendbuff: Buffer,
  recvbuff: Buffer,
  count: number,
  datatype: NcclDataType,
  op: NcclRedOp,
  comm: NcclComm
): NcclResult {
  return joinCollective(
    comm,
    { kind: "allreduce", count, datatype, op },
    sendbuff,
    recvbuff
  );
}

export function ncclBroadcast(
  sendbuff: Buffer,
  recvbuff: Buffer,
  count: number,
  datatype: NcclDataType,
  root: number,
  comm: NcclComm
): NcclResult {
  if (root < 0 || root >= comm.nranks) return ncclInvalidArgument;
  return joinCollective(
    comm,
    { kind: "broadcast", count, datatype, root },
    sendbuff,
    recvbuff
  );
}

export function ncclReduce(
  sendbuff: Buffer,
  recvbuff: Buffer,
  count: number,
  datatype: NcclDataType,
  op: NcclRedOp,
  root: number,
  comm: NcclComm
): NcclResult {
  if (root < 0 || root >= comm.nranks) return ncclInvalidArgument;
  return joinCollective(
    comm,
    { kind: "reduce", count, datatype, op, root },
    sendbuff,
    recvbuff
  );
}

export function ncclAllGather(
  sendbuff: Buffer,
  recvbuff: Buffer,
  sendcount: number,
  datatype: NcclDataType,
  comm: NcclComm
): NcclResult {
  return joinCollective(
    comm,
    { kind: "allgather", count: sendcount, datatype },
    sendbuff,
    recvbuff
  );
}

export function ncclReduceScatter(
  sendbuff: Buffer,
  recvbuff: Buffer,
  recvcount: number,
  datatype: NcclDataType,
  op: NcclRedOp,
  comm: NcclComm
): NcclResult {
  return joinCollective(
    comm,
    { kind: "reducescatter", count: recvcount, datatype, op },
    sendbuff,
    recvbuff
  );
}

export function ncclSend(
  sendbuff: Buffer,
  count: number,
  datatype: NcclDataType,
  peer: number,
  comm: NcclComm
): NcclResult {
  if (peer < 0 || peer >= comm.nranks || peer === comm.rank)
    return ncclInvalidArgument;
  const group = comm.group;
  const key = `${comm.rank}->${peer}`;
  const waiting = group.recvs.get(key);
  if (waiting && waiting.length > 0) {
    const rx = waiting.shift()!;
    if (rx.count !== count || rx.datatype !== datatype) return ncclInvalidUsage;
    for (let i = 0; i < count; i++) rx.buf[i] = sendbuff[i];
  } else {
    const q = group.sends.get(key) ?? [];
    q.push({ buf: sendbuff, count, datatype });
    group.sends.set(key, q);
  }
  return ncclSuccess;
}

export function ncclRecv(
  recvbuff: Buffer,
  count: number,
  datatype: NcclDataType,
  peer: number,
  comm: NcclComm
): NcclResult {
  if (peer < 0 || peer >= comm.nranks || peer === comm.rank)
    return ncclInvalidArgument;
  const group = comm.group;
  const key = `${peer}->${comm.rank}`;
  const queued = group.sends.get(key);
  if (queued && queued.length > 0) {
    const tx = queued.shift()!;
    if (tx.count !== count || tx.datatype !== datatype) return ncclInvalidUsage;
    for (let i = 0; i < count; i++) recvbuff[i] = tx.buf[i];
  } else {
    const q = group.recvs.get(key) ?? [];
    q.push({ buf: recvbuff, count, datatype });
    group.recvs.set(key, q);
  }
  return ncclSuccess;
}
