import { readFileSync } from 'node:fs';
import { resolve } from 'node:path';

import { describe, expect, it } from 'vitest';

import { generateTinyVggFile, generateTinyVggRecords } from '../src/generate.js';
import { ConvRecord, KIND_CONV, KIND_INPUT_MEAN, readWeights } from '../src/nswt.js';

const TINY_VGG = resolve('../src/flowstyle/data/tiny_vgg.nswt');

describe('generateTinyVggFile', () => {
  it('matches the committed weight file byte for byte', () => {
    const generated = Buffer.from(generateTinyVggFile());
    expect(Buffer.compare(generated, readFileSync(TINY_VGG))).toBe(0);
  });

  it('is deterministic', () => {
    const a = Buffer.from(generateTinyVggFile());
    const b = Buffer.from(generateTinyVggFile());
    expect(Buffer.compare(a, b)).toBe(0);
  });
});

describe('generateTinyVggRecords', () => {
  it('leads with a zero input mean', () => {
    const first = generateTinyVggRecords()[0];
    expect(first.kind).toBe(KIND_INPUT_MEAN);
    expect(Array.from((first as { means: Float32Array }).means)).toEqual([0, 0, 0]);
  });

  it('lays out the chain with zero biases and bounded kernels', () => {
    const records = generateTinyVggRecords();
    const names = records.map((r) => r.name);
    expect(names).toEqual([
      'input_mean',
      'conv1_1', 'relu1_1', 'pool1',
      'conv2_1', 'relu2_1', 'pool2',
      'conv3_1', 'relu3_1', 'pool3',
      'conv4_1', 'relu4_1', 'conv4_2', 'conv5_1',
    ]);
    const convs = records.filter((r): r is ConvRecord => r.kind === KIND_CONV);
    expect(convs[0].shape).toEqual([8, 3, 3, 3]);
    expect(convs[convs.length - 1].shape).toEqual([32, 32, 3, 3]);
    for (const conv of convs) {
      const [, inC, kh, kw] = conv.shape;
      // values are uniform in +-sqrt(2 / fan_in)
      const limit = Math.sqrt(2 / (inC * kh * kw));
      for (const v of conv.kernel) {
        expect(Math.abs(v)).toBeLessThanOrEqual(limit);
      }
      expect(conv.bias.every((b) => b === 0)).toBe(true);
    }
  });

  it('round-trips through the container format', () => {
    const records = readWeights(generateTinyVggFile());
    expect(records).toHaveLength(14);
  });
});
