import { readFileSync } from 'node:fs';
import { resolve } from 'node:path';

import { describe, expect, it } from 'vitest';

import {
  BadMagic,
  TrailingData,
  TruncatedFile,
  VersionUnsupported,
} from '../src/errors.js';
import {
  KIND_CONV,
  KIND_INPUT_MEAN,
  KIND_RELU,
  readWeights,
  WeightRecord,
  writeWeights,
} from '../src/nswt.js';

const TINY_VGG = resolve('../src/flowstyle/data/tiny_vgg.nswt');

function sampleRecords(): WeightRecord[] {
  return [
    { name: 'input_mean', kind: KIND_INPUT_MEAN, means: Float32Array.of(0.25, 0.5, 0.75) },
    {
      name: 'c1',
      kind: KIND_CONV,
      shape: [2, 3, 1, 1],
      kernel: Float32Array.from({ length: 6 }, (_, i) => i - 2.5),
      bias: Float32Array.of(0.125, -4),
    },
    { name: 'r1', kind: KIND_RELU },
  ];
}

describe('readWeights', () => {
  it('round-trips the committed network file byte for byte', () => {
    const original = readFileSync(TINY_VGG);
    const records = readWeights(original);
    expect(records[0].kind).toBe(KIND_INPUT_MEAN);
    expect(records).toHaveLength(14);
    expect(Buffer.compare(Buffer.from(writeWeights(records)), original)).toBe(0);
  });

  it('rejects a wrong magic', () => {
    const data = Buffer.from(readFileSync(TINY_VGG));
    data[0] = 0x58;
    expect(() => readWeights(data)).toThrow(BadMagic);
  });

  it('rejects an unsupported version', () => {
    const data = Buffer.from(readFileSync(TINY_VGG));
    data.writeUInt32LE(2, 4);
    expect(() => readWeights(data)).toThrow(VersionUnsupported);
  });

  it('rejects an unknown record kind tag', () => {
    const data = Buffer.from(writeWeights(sampleRecords()));
    // kind byte of the first record sits right after its 10-char name
    expect(data[12 + 2 + 10]).toBe(KIND_INPUT_MEAN);
    data[12 + 2 + 10] = 9;
    expect(() => readWeights(data)).toThrow(VersionUnsupported);
  });

  it('reports truncation at any cut point', () => {
    const full = readFileSync(TINY_VGG);
    const cuts = [];
    for (let i = 0; i < 16; i++) cuts.push(i);
    for (let i = 16; i < full.length; i += 997) cuts.push(i);
    for (const cut of cuts) {
      expect(() => readWeights(full.subarray(0, cut))).toThrow(TruncatedFile);
    }
  });

  it('flags bytes past the declared records', () => {
    const padded = Buffer.concat([readFileSync(TINY_VGG), Buffer.alloc(3)]);
    expect(() => readWeights(padded)).toThrow(TrailingData);
  });
});

describe('writeWeights', () => {
  it('reads back what it wrote', () => {
    const records = sampleRecords();
    const back = readWeights(writeWeights(records));
    expect(back).toHaveLength(3);
    expect(back[0]).toMatchObject({ name: 'input_mean', kind: KIND_INPUT_MEAN });
    expect(Array.from((back[0] as { means: Float32Array }).means)).toEqual([0.25, 0.5, 0.75]);
    const conv = back[1] as Extract<WeightRecord, { kind: typeof KIND_CONV }>;
    expect(conv.shape).toEqual([2, 3, 1, 1]);
    expect(Array.from(conv.kernel)).toEqual([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]);
    expect(Array.from(conv.bias)).toEqual([0.125, -4]);
    expect(back[2]).toEqual({ name: 'r1', kind: KIND_RELU });
  });

  it('is stable across repeated writes', () => {
    const a = writeWeights(sampleRecords());
    const b = writeWeights(sampleRecords());
    expect(Buffer.compare(Buffer.from(a), Buffer.from(b))).toBe(0);
  });
});
