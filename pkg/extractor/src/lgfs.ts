/**
 * LGFS feature-store files, bit-compatible with the training pipeline.
 *
 * Layout (little-endian):
 *   "LGFS" | u32 version=1 | u8 kind (0 pooled, 1 spatial) | u8 rank
 *   | u16 reserved=0 | u32 n | u32 dims[rank] | f32 payload
 *   | u64 payload byte count
 * plus a sibling `<store>.ids.csv` with header `sample_id,row`.
 */

import { readFileSync, writeFileSync } from 'fs';

export type StoreKind = 'pooled' | 'spatial';

export interface FeatureStore {
  kind: StoreKind;
  dims: number[];
  ids: string[];
  /** row-major, length ids.length * prod(dims) */
  payload: Float32Array;
}

const MAGIC = Buffer.from('LGFS', 'ascii');
const VERSION = 1;

function prod(values: number[]): number {
  return values.reduce((a, b) => a * b, 1);
}

export function encodeLgfs(store: FeatureStore): Buffer {
  const rank = store.dims.length;
  const count = store.ids.length * prod(store.dims);
  if (store.payload.length !== count) {
    throw new Error(
      `payload has ${store.payload.length} values, expected ${count}`,
    );
  }
  const payloadBytes = count * 4;
  const buf = Buffer.alloc(4 + 12 + 4 * rank + payloadBytes + 8);
  let off = 0;
  MAGIC.copy(buf, off);
  off += 4;
  buf.writeUInt32LE(VERSION, off);
  off += 4;
  buf.writeUInt8(store.kind === 'pooled' ? 0 : 1, off);
  off += 1;
  buf.writeUInt8(rank, off);
  off += 1;
  buf.writeUInt16LE(0, off);
  off += 2;
  buf.writeUInt32LE(store.ids.length, off);
  off += 4;
  for (const d of store.dims) {
    buf.writeUInt32LE(d, off);
    off += 4;
  }
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(store.payload[i], off + 4 * i);
  }
  off += payloadBytes;
  buf.writeBigUInt64LE(BigInt(payloadBytes), off);
  return buf;
}

export function idIndexCsv(ids: string[]): string {
  const lines = ['sample_id,row'];
  ids.forEach((id, row) => {
    const safe = id.includes(',') || id.includes('"')
      ? '"' + id.replace(/"/g, '""') + '"'
      : id;
    lines.push(`${safe},${row}`);
  });
  return lines.join('\n') + '\n';
}

export function writeLgfs(store: FeatureStore, path: string): void {
  writeFileSync(path, encodeLgfs(store));
  writeFileSync(path + '.ids.csv', idIndexCsv(store.ids), 'utf-8');
}

/** Validating reader used by the tests to check emitted files. */
export function readLgfs(path: string): FeatureStore {
  const buf = readFileSync(path);
  if (!buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`bad magic ${buf.subarray(0, 4).toString('ascii')}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const kindCode = buf.readUInt8(8);
  if (kindCode !== 0 && kindCode !== 1) throw new Error(`bad kind ${kindCode}`);
  const rank = buf.readUInt8(9);
  if (buf.readUInt16LE(10) !== 0) throw new Error('reserved field not zero');
  const n = buf.readUInt32LE(12);
  let off = 16;
  const dims: number[] = [];
  for (let i = 0; i < rank; i++) {
    dims.push(buf.readUInt32LE(off));
    off += 4;
  }
  const count = n * prod(dims);
  const expected = count * 4;
  const actual = buf.length - off - 8;
  if (actual !== expected) {
    throw new Error(`payload length mismatch: expected ${expected}, got ${actual}`);
  }
  const payload = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    payload[i] = buf.readFloatLE(off + 4 * i);
  }
  off += expected;
  const footer = buf.readBigUInt64LE(off);
  if (footer !== BigInt(expected)) {
    throw new Error(`footer byte count ${footer} != payload bytes ${expected}`);
  }

  const csv = readFileSync(path + '.ids.csv', 'utf-8').trimEnd().split('\n');
  if (csv[0] !== 'sample_id,row') throw new Error('bad id index header');
  const ids = csv.slice(1).map((line) => {
    const cut = line.lastIndexOf(',');
    let id = line.slice(0, cut);
    if (id.startsWith('"') && id.endsWith('"')) {
      id = id.slice(1, -1).replace(/""/g, '"');
    }
    return id;
  });
  if (ids.length !== n) throw new Error(`id index has ${ids.length} rows, store has ${n}`);
  return { kind: kindCode === 0 ? 'pooled' : 'spatial', dims, ids, payload };
}
