/**
 * Minimal reader for TensorFlow.js layers-model artifacts: a model.json
 * whose weightsManifest lists groups of named tensors, with the raw
 * values concatenated across each group's .bin shard files.
 *
 * Only float32 tensors are read; that is all a conv kernel/bias import
 * needs. Anything else in the manifest is reported, not guessed at.
 */

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';

import { ShapeMismatch } from './errors.js';

export interface SourceTensor {
  shape: number[];
  data: Float32Array;
}

interface ManifestWeight {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: ManifestWeight[];
}

export function readModelWeights(modelJsonPath: string): Map<string, SourceTensor> {
  const model = JSON.parse(readFileSync(modelJsonPath, 'utf-8'));
  const groups: ManifestGroup[] = model.weightsManifest ?? [];
  const dir = dirname(modelJsonPath);
  const tensors = new Map<string, SourceTensor>();

  for (const group of groups) {
    const shards = group.paths.map((p) => readFileSync(join(dir, p)));
    const blob = Buffer.concat(shards);
    let offset = 0;
    for (const weight of group.weights) {
      const count = weight.shape.reduce((a, b) => a * b, 1);
      if (weight.dtype !== 'float32') {
        throw new ShapeMismatch(
          `tensor ${weight.name} has dtype ${weight.dtype}; only float32 is supported`,
        );
      }
      if (offset + 4 * count > blob.length) {
        throw new ShapeMismatch(
          `shard data ends inside tensor ${weight.name}`,
        );
      }
      const data = new Float32Array(count);
      for (let i = 0; i < count; i++) {
        data[i] = blob.readFloatLE(offset + 4 * i);
      }
      offset += 4 * count;
      tensors.set(weight.name, { shape: weight.shape, data });
    }
  }
  return tensors;
}
