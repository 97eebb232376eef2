/**
 * Deterministic generation of the tiny bundled network's weights.
 *
 * A single xorshift64* stream seeded with TINY_VGG_SEED feeds the conv
 * kernels in chain order, C order within each (out, in, kh, kw) block;
 * each draw is uniform in (-s, s] with s = sqrt(2 / (in * kh * kw)),
 * rounded to float32 once. Biases and input means are zero. Repeated
 * runs are byte-identical.
 */

import {
  KIND_CONV,
  KIND_INPUT_MEAN,
  KIND_POOL,
  KIND_RELU,
  WeightRecord,
  writeWeights,
} from './nswt.js';

export const TINY_VGG_SEED = 0x5eedcafen;

const MASK64 = (1n << 64n) - 1n;
const MULT = 0x2545f4914f6cdd1dn;

export class XorShift64Star {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
    if (this.state === 0n) this.state = 1n;
  }

  nextU64(): bigint {
    let s = this.state;
    s ^= s >> 12n;
    s = (s ^ (s << 25n)) & MASK64;
    s ^= s >> 27n;
    this.state = s;
    return (s * MULT) & MASK64;
  }

  /** Uniform double in [0, 1) from the top 53 output bits. */
  nextUnit(): number {
    return Number(this.nextU64() >> 11n) * 2 ** -53;
  }
}

interface ChainLayer {
  name: string;
  kind: 'conv' | 'relu' | 'pool';
  in?: number;
  out?: number;
  kh?: number;
  kw?: number;
}

export const TINY_VGG_CHAIN: ChainLayer[] = [
  { name: 'conv1_1', kind: 'conv', in: 3, out: 8, kh: 3, kw: 3 },
  { name: 'relu1_1', kind: 'relu' },
  { name: 'pool1', kind: 'pool' },
  { name: 'conv2_1', kind: 'conv', in: 8, out: 16, kh: 3, kw: 3 },
  { name: 'relu2_1', kind: 'relu' },
  { name: 'pool2', kind: 'pool' },
  { name: 'conv3_1', kind: 'conv', in: 16, out: 32, kh: 3, kw: 3 },
  { name: 'relu3_1', kind: 'relu' },
  { name: 'pool3', kind: 'pool' },
  { name: 'conv4_1', kind: 'conv', in: 32, out: 32, kh: 3, kw: 3 },
  { name: 'relu4_1', kind: 'relu' },
  { name: 'conv4_2', kind: 'conv', in: 32, out: 32, kh: 3, kw: 3 },
  { name: 'conv5_1', kind: 'conv', in: 32, out: 32, kh: 3, kw: 3 },
];

export function generateTinyVggRecords(): WeightRecord[] {
  const rng = new XorShift64Star(TINY_VGG_SEED);
  const records: WeightRecord[] = [
    { name: 'input_mean', kind: KIND_INPUT_MEAN, means: new Float32Array(3) },
  ];
  for (const layer of TINY_VGG_CHAIN) {
    if (layer.kind === 'relu') {
      records.push({ name: layer.name, kind: KIND_RELU });
      continue;
    }
    if (layer.kind === 'pool') {
      records.push({ name: layer.name, kind: KIND_POOL });
      continue;
    }
    const { out, in: inC, kh, kw } = layer as Required<ChainLayer>;
    const fanIn = inC * kh * kw;
    const scale = Math.sqrt(2.0 / fanIn);
    const kernel = new Float32Array(out * inC * kh * kw);
    for (let i = 0; i < kernel.length; i++) {
      kernel[i] = Math.fround((2.0 * rng.nextUnit() - 1.0) * scale);
    }
    records.push({
      name: layer.name,
      kind: KIND_CONV,
      shape: [out, inC, kh, kw],
      kernel,
      bias: new Float32Array(out),
    });
  }
  return records;
}

export function generateTinyVggFile(): Uint8Array {
  return writeWeights(generateTinyVggRecords());
}
