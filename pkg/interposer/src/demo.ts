/**
 * Two-rank demo program running through the shimmed library: three allreduce
 * calls followed by one broadcast. With COMSCRIBE_OUT set, the run leaves a
 * trace file the analyzer groups into exactly four collective instances.
 */

import { installInterposer } from "./shim.js";
import { NcclDataType, NcclRedOp, ncclSuccess } from "./mocknccl.js";

const nccl = installInterposer();

const comms = nccl.ncclCommInitAll(2);
const COUNT = 4;

for (let round = 0; round < 3; round++) {
  const sends = comms.map((_, r) =>
    Float32Array.from({ length: COUNT }, (_, i) => (r + 1) * (i + 1 + round))
  );
  const recvs = comms.map(() => new Float32Array(COUNT));
  for (const comm of comms) {
    const rc = nccl.ncclAllReduce(
      sends[comm.rank], recvs[comm.rank], COUNT,
      NcclDataType.ncclFloat32, NcclRedOp.ncclSum, comm
    );
    if (rc !== ncclSuccess) throw new Error(`allreduce failed: ${rc}`);
  }
  console.log(`allreduce round ${round}: rank sums = [${recvs[0]}]`);
}

const payload = Float32Array.from([3, 1, 4, 1]);
const outs = comms.map(() => new Float32Array(COUNT));
for (const comm of comms) {
  const rc = nccl.ncclBroadcast(
    comm.rank === 1 ? payload : new Float32Array(COUNT),
    outs[comm.rank], COUNT, NcclDataType.ncclFloat32, 1, comm
  );
  if (rc !== ncclSuccess) throw new Error(`broadcast failed: ${rc}`);
}
console.log(`broadcast from rank 1: rank 0 received [${outs[0]}]`);
