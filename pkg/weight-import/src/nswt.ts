/**
 * The NSWT weight container: little-endian, strict.
 *
 * Layout: magic "NSWT", version u32, record count u32, then per record a
 * u16 name length, the UTF-8 name, a u8 kind tag and the kind's payload.
 * Conv records carry their (out, in, kh, kw) shape, the kernel floats in
 * C order and one bias per output channel; input-mean records carry one
 * float per channel; relu and pool records carry nothing.
 */

import {
  BadMagic,
  TrailingData,
  TruncatedFile,
  VersionUnsupported,
} from './errors.js';

export const MAGIC = 'NSWT';
export const VERSION = 1;

export const KIND_CONV = 0;
export const KIND_RELU = 1;
export const KIND_POOL = 2;
export const KIND_INPUT_MEAN = 3;

export interface ConvRecord {
  name: string;
  kind: typeof KIND_CONV;
  /** (out, in, kh, kw) */
  shape: [number, number, number, number];
  kernel: Float32Array;
  bias: Float32Array;
}

export interface PlainRecord {
  name: string;
  kind: typeof KIND_RELU | typeof KIND_POOL;
}

export interface InputMeanRecord {
  name: string;
  kind: typeof KIND_INPUT_MEAN;
  means: Float32Array;
}

export type WeightRecord = ConvRecord | PlainRecord | InputMeanRecord;

class Reader {
  private view: DataView;
  private pos = 0;

  constructor(private data: Uint8Array) {
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  }

  private need(n: number, what: string): number {
    if (this.pos + n > this.data.byteLength) {
      throw new TruncatedFile(`file ends inside ${what}`);
    }
    const at = this.pos;
    this.pos += n;
    return at;
  }

  bytes(n: number, what: string): Uint8Array {
    const at = this.need(n, what);
    return this.data.subarray(at, at + n);
  }

  u8(what: string): number {
    return this.view.getUint8(this.need(1, what));
  }

  u16(what: string): number {
    return this.view.getUint16(this.need(2, what), true);
  }

  u32(what: string): number {
    return this.view.getUint32(this.need(4, what), true);
  }

  f32(count: number, what: string): Float32Array {
    const at = this.need(4 * count, what);
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      out[i] = this.view.getFloat32(at + 4 * i, true);
    }
    return out;
  }

  get remaining(): number {
    return this.data.byteLength - this.pos;
  }
}

export function readWeights(data: Uint8Array): WeightRecord[] {
  const r = new Reader(data);
  const magic = new TextDecoder().decode(r.bytes(4, 'magic'));
  if (magic !== MAGIC) {
    throw new BadMagic('not an NSWT weight file');
  }
  const version = r.u32('version');
  if (version !== VERSION) {
    throw new VersionUnsupported(`version ${version} (supported: ${VERSION})`);
  }
  const count = r.u32('record count');
  const records: WeightRecord[] = [];
  for (let i = 0; i < count; i++) {
    const nameLen = r.u16(`record ${i} name length`);
    const name = new TextDecoder().decode(r.bytes(nameLen, `record ${i} name`));
    const kind = r.u8(`${name} kind`);
    if (kind === KIND_CONV) {
      const out = r.u32(`${name} out-channels`);
      const inC = r.u32(`${name} in-channels`);
      const kh = r.u32(`${name} kernel height`);
      const kw = r.u32(`${name} kernel width`);
      const kernel = r.f32(out * inC * kh * kw, `${name} kernel data`);
      const bias = r.f32(out, `${name} bias data`);
      records.push({ name, kind, shape: [out, inC, kh, kw], kernel, bias });
    } else if (kind === KIND_INPUT_MEAN) {
      const channels = r.u32(`${name} channel count`);
      records.push({ name, kind, means: r.f32(channels, `${name} means`) });
    } else if (kind === KIND_RELU || kind === KIND_POOL) {
      records.push({ name, kind });
    } else {
      throw new VersionUnsupported(`record '${name}' has unknown kind tag ${kind}`);
    }
  }
  if (r.remaining !== 0) {
    throw new TrailingData(
      `${r.remaining} bytes past the declared ${count} records`,
    );
  }
  return records;
}

export function writeWeights(records: WeightRecord[]): Uint8Array {
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  const scratch = new DataView(new ArrayBuffer(8));

  const pushU16 = (v: number) => {
    scratch.setUint16(0, v, true);
    chunks.push(new Uint8Array(scratch.buffer.slice(0, 2)));
  };
  const pushU32 = (...vs: number[]) => {
    for (const v of vs) {
      scratch.setUint32(0, v, true);
      chunks.push(new Uint8Array(scratch.buffer.slice(0, 4)));
    }
  };
  const pushU8 = (v: number) => {
    chunks.push(Uint8Array.of(v));
  };
  const pushF32 = (values: Float32Array) => {
    const buf = new Uint8Array(4 * values.length);
    const view = new DataView(buf.buffer);
    for (let i = 0; i < values.length; i++) {
      view.setFloat32(4 * i, values[i], true);
    }
    chunks.push(buf);
  };

  chunks.push(encoder.encode(MAGIC));
  pushU32(VERSION, records.length);
  for (const rec of records) {
    const rawName = encoder.encode(rec.name);
    pushU16(rawName.length);
    chunks.push(rawName);
    pushU8(rec.kind);
    if (rec.kind === KIND_CONV) {
      pushU32(...rec.shape);
      pushF32(rec.kernel);
      pushF32(rec.bias);
    } else if (rec.kind === KIND_INPUT_MEAN) {
      pushU32(rec.means.length);
      pushF32(rec.means);
    }
  }

  let total = 0;
  for (const c of chunks) total += c.length;
  const out = new Uint8Array(total);
  let at = 0;
  for (const c of chunks) {
    out.set(c, at);
    at += c.length;
  }
  return out;
}
