import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { spawnSync } from "node:child_process";
import { afterEach, describe, expect, test } from "vitest";

import * as nccl from "../src/mocknccl.js";
import { Interposer, installInterposer } from "../src/shim.js";
import {
  NcclDataType,
  NcclRedOp,
  ncclCommInitAll,
  ncclInvalidArgument,
  ncclSuccess,
} from "../src/mocknccl.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const PY_SRC = resolve(HERE, "..", "..", "src");

function tempSink(name = "trace.jsonl"): string {
  return join(mkdtempSync(join(tmpdir(), "interposer-")), name);
}

function readLines(path: string): Record<string, any>[] {
  return readFileSync(path, "utf-8")
    .trim()
    .split("\n")
    .map((l) => JSON.parse(l));
}

afterEach(() => {
  delete process.env.COMSCRIBE_DISABLE;
});

describe("mock library semantics", () => {
  test("allreduce sums across ranks", () => {
    const comms = ncclCommInitAll(3);
    const sends = [0, 1, 2].map((r) => Float32Array.from([r + 1, 10 * (r + 1)]));
    const recvs = comms.map(() => new Float32Array(2));
    for (const c of comms) {
      expect(
        nccl.ncclAllReduce(sends[c.rank], recvs[c.rank], 2,
          NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c)
      ).toBe(ncclSuccess);
    }
    for (const r of recvs) expect(Array.from(r)).toEqual([6, 60]);
  });

  test("broadcast copies the root buffer", () => {
    const comms = ncclCommInitAll(2);
    const recvs = comms.map(() => new Float32Array(3));
    const rootBuf = Float32Array.from([7, 8, 9]);
    for (const c of comms) {
      nccl.ncclBroadcast(
        c.rank === 1 ? rootBuf : new Float32Array(3),
        recvs[c.rank], 3, NcclDataType.ncclFloat32, 1, c
      );
    }
    expect(Array.from(recvs[0])).toEqual([7, 8, 9]);
  });

  test("allgather orders blocks by rank", () => {
    const comms = ncclCommInitAll(2);
    const recvs = comms.map(() => new Float32Array(4));
    for (const c of comms) {
      nccl.ncclAllGather(
        Float32Array.from([c.rank + 1, c.rank + 1]),
        recvs[c.rank], 2, NcclDataType.ncclFloat32, c
      );
    }
    expect(Array.from(recvs[0])).toEqual([1, 1, 2, 2]);
  });

  test("send/recv pair moves data either call order", () => {
    const comms = ncclCommInitAll(2);
    const rx = new Float32Array(2);
    expect(
      nccl.ncclSend(Float32Array.from([5, 6]), 2, NcclDataType.ncclFloat32, 1, comms[0])
    ).toBe(ncclSuccess);
    expect(
      nccl.ncclRecv(rx, 2, NcclDataType.ncclFloat32, 0, comms[1])
    ).toBe(ncclSuccess);
    expect(Array.from(rx)).toEqual([5, 6]);
    expect(
      nccl.ncclSend(rx, 2, NcclDataType.ncclFloat32, 0, comms[0])
    ).toBe(ncclInvalidArgument); // self-send
  });
});

describe("interposer logging", () => {
  test("one line per rank per collective, fields intact", () => {
    const sink = tempSink();
    const api = installInterposer({ sinkPath: sink, now: () => 1234 });
    const comms = api.ncclCommInitAll(2);
    const recvs = comms.map(() => new Float32Array(256));
    for (const c of comms) {
      api.ncclAllReduce(new Float32Array(256), recvs[c.rank], 256,
        NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c);
    }
    const lines = readLines(sink);
    expect(lines).toHaveLength(2);
    for (const [i, line] of lines.entries()) {
      expect(line).toMatchObject({
        seq: 0, ts: 1234, kind: "collective", nranks: 2, rank: i, dev: i,
        coll: "allreduce", algo: "auto", count: 256, dtype: "float32",
      });
      expect(typeof line.comm).toBe("string");
    }
    expect(lines[0].comm).toBe(lines[1].comm);
  });

  test("broadcast line carries the root", () => {
    const sink = tempSink();
    const api = installInterposer({ sinkPath: sink });
    const comms = api.ncclCommInitAll(2);
    for (const c of comms) {
      api.ncclBroadcast(new Float32Array(4), new Float32Array(4), 4,
        NcclDataType.ncclFloat32, 1, c);
    }
    for (const line of readLines(sink)) expect(line.root).toBe(1);
  });

  test("sequence counters increase per (comm, rank)", () => {
    const sink = tempSink();
    const api = installInterposer({ sinkPath: sink });
    const comms = api.ncclCommInitAll(2);
    for (let k = 0; k < 2; k++) {
      for (const c of comms) {
        api.ncclAllReduce(new Float32Array(1), new Float32Array(1), 1,
          NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c);
      }
    }
    const byRank = new Map<number, number[]>();
    for (const line of readLines(sink)) {
      byRank.set(line.rank, [...(byRank.get(line.rank) ?? []), line.seq]);
    }
    expect(byRank.get(0)).toEqual([0, 1]);
    expect(byRank.get(1)).toEqual([0, 1]);
  });

  test("send/recv lines carry the peer", () => {
    const sink = tempSink();
    const api = installInterposer({ sinkPath: sink });
    const comms = api.ncclCommInitAll(2);
    api.ncclSend(new Float64Array(16), 16, NcclDataType.ncclFloat64, 1, comms[0]);
    api.ncclRecv(new Float64Array(16), 16, NcclDataType.ncclFloat64, 0, comms[1]);
    const [tx, rx] = readLines(sink);
    expect(tx).toMatchObject({ kind: "send", peer: 1, count: 16, dtype: "float64" });
    expect(rx).toMatchObject({ kind: "recv", peer: 0, count: 16, dtype: "float64" });
  });

  test("forwarding result identical with and without the shim", () => {
    const bare = ncclCommInitAll(2);
    const bareSends = [0, 1].map((r) => Float32Array.from([r + 1, r + 2]));
    const bareRecvs = bare.map(() => new Float32Array(2));
    for (const c of bare) {
      nccl.ncclAllReduce(bareSends[c.rank], bareRecvs[c.rank], 2,
        NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c);
    }

    const api = installInterposer({ sinkPath: tempSink() });
    const wrapped = api.ncclCommInitAll(2);
    const sends = [0, 1].map((r) => Float32Array.from([r + 1, r + 2]));
    const recvs = wrapped.map(() => new Float32Array(2));
    for (const c of wrapped) {
      expect(
        api.ncclAllReduce(sends[c.rank], recvs[c.rank], 2,
          NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c)
      ).toBe(ncclSuccess);
    }
    expect(recvs.map((r) => Array.from(r))).toEqual(
      bareRecvs.map((r) => Array.from(r))
    );
    // error statuses pass through untouched
    expect(
      api.ncclBroadcast(new Float32Array(1), new Float32Array(1), 1,
        NcclDataType.ncclFloat32, 9, wrapped[0])
    ).toBe(ncclInvalidArgument);
  });

  test("COMSCRIBE_DISABLE=1 silences logging", () => {
    process.env.COMSCRIBE_DISABLE = "1";
    const sink = tempSink();
    const api = installInterposer({ sinkPath: sink });
    const comms = api.ncclCommInitAll(1);
    api.ncclAllReduce(new Float32Array(1), new Float32Array(1), 1,
      NcclDataType.ncclFloat32, NcclRedOp.ncclSum, comms[0]);
    expect(existsSync(sink)).toBe(false);
  });

  test("unwritable sink warns once and keeps forwarding", () => {
    const dir = mkdtempSync(join(tmpdir(), "interposer-"));
    const api = installInterposer({ sinkPath: dir }); // a directory: append fails
    const comms = api.ncclCommInitAll(2);
    const recvs = comms.map(() => new Float32Array(1));
    const sends = comms.map((_, r) => Float32Array.from([r + 1]));
    for (const c of comms) {
      expect(
        api.ncclAllReduce(sends[c.rank], recvs[c.rank], 1,
          NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c)
      ).toBe(ncclSuccess);
    }
    expect(Array.from(recvs[0])).toEqual([3]);
  });

  test("communicator ids are distinct per communicator, stable per run", () => {
    const sink = tempSink();
    const interposer = new Interposer({ sinkPath: sink });
    const api = interposer.wrap();
    const a = api.ncclCommInitAll(1);
    const b = api.ncclCommInitAll(1);
    for (const comms of [a, b, a]) {
      api.ncclAllReduce(new Float32Array(1), new Float32Array(1), 1,
        NcclDataType.ncclFloat32, NcclRedOp.ncclSum, comms[0]);
    }
    const lines = readLines(sink);
    expect(lines[0].comm).not.toBe(lines[1].comm);
    expect(lines[0].comm).toBe(lines[2].comm);
  });
});

describe("analyzer round trip", () => {
  test("2 ranks, 3 allreduces + 1 broadcast -> 4 matched instances, no diagnostics", () => {
    const sink = tempSink("demo_trace.jsonl");
    const api = installInterposer({ sinkPath: sink });
    const comms = api.ncclCommInitAll(2);
    const COUNT = 4;
    for (let round = 0; round < 3; round++) {
      const recvs = comms.map(() => new Float32Array(COUNT));
      for (const c of comms) {
        api.ncclAllReduce(new Float32Array(COUNT), recvs[c.rank], COUNT,
          NcclDataType.ncclFloat32, NcclRedOp.ncclSum, c);
      }
    }
    for (const c of comms) {
      api.ncclBroadcast(new Float32Array(COUNT), new Float32Array(COUNT),
        COUNT, NcclDataType.ncclFloat32, 1, c);
    }

    const outDir = join(dirname(sink), "analysis");
    const run = spawnSync(
      "python3",
      ["-m", "commtrace", "analyze", sink, "-o", outDir, "--split-per-primitive"],
      { env: { ...process.env, PYTHONPATH: PY_SRC }, encoding: "utf-8" }
    );
    expect(run.status, run.stderr).toBe(0);

    const stats = JSON.parse(readFileSync(join(outDir, "stats.json"), "utf-8"));
    expect(stats.instances).toBe(4);
    expect(stats.diagnostics).toBe(0);
    expect(stats.types.allreduce.calls).toBe(3);
    expect(stats.types.broadcast.calls).toBe(1);
    const diags = JSON.parse(readFileSync(join(outDir, "diagnostics.json"), "utf-8"));
    expect(diags).toEqual([]);
  });

  test("every emitted line passes the analyzer's parser", () => {
    const sink = tempSink("all_calls.jsonl");
    const api = installInterposer({ sinkPath: sink });
    const comms = api.ncclCommInitAll(2);
    const dt = NcclDataType.ncclFloat32;
    const buf = () => new Float32Array(8);
    for (const c of comms) api.ncclAllReduce(buf(), buf(), 8, dt, NcclRedOp.ncclSum, c);
    for (const c of comms) api.ncclBroadcast(buf(), buf(), 8, dt, 0, c);
    for (const c of comms) api.ncclReduce(buf(), buf(), 8, dt, NcclRedOp.ncclMax, 1, c);
    for (const c of comms) api.ncclAllGather(buf(), new Float32Array(16), 8, dt, c);
    for (const c of comms) api.ncclReduceScatter(new Float32Array(16), buf(), 8, dt, NcclRedOp.ncclSum, c);
    api.ncclSend(buf(), 8, dt, 1, comms[0]);
    api.ncclRecv(buf(), 8, dt, 0, comms[1]);

    const probe = spawnSync(
      "python3",
      [
        "-c",
        "import sys; from commtrace import parse_trace_file, group_collectives;" +
          "evs = parse_trace_file(sys.argv[1]);" +
          "insts, diags = group_collectives(evs);" +
          "print(len(evs), len(insts), len(diags))",
        sink,
      ],
      { env: { ...process.env, PYTHONPATH: PY_SRC }, encoding: "utf-8" }
    );
    expect(probe.status, probe.stderr).toBe(0);
    expect(probe.stdout.trim()).toBe("12 5 0");
  });
});
