/**
 * Check an NSWT file against a reference activation dump.
 *
 * A fixture directory holds the probe image (image.json + image.f32)
 * and the expected per-layer activations (activations.json indexing
 * into activations.f32, all little-endian float32, row-major over
 * pixels with channels innermost). The file's network is run on the
 * probe image and each layer's maximum absolute deviation is reported.
 */

import { existsSync, readFileSync } from 'node:fs';
import { join } from 'node:path';

import { MissingFixture, ShapeMismatch } from './errors.js';
import { FeatureMap, runChain } from './forward.js';
import { readWeights } from './nswt.js';

export interface LayerDeviation {
  name: string;
  maxDeviation: number;
}

export interface VerifyReport {
  layers: LayerDeviation[];
  maxDeviation: number;
}

interface DumpedLayer {
  name: string;
  height: number;
  width: number;
  channels: number;
  offset: number;
}

function readF32File(path: string): Float32Array {
  const raw = readFileSync(path);
  const out = new Float32Array(raw.length / 4);
  for (let i = 0; i < out.length; i++) {
    out[i] = raw.readFloatLE(4 * i);
  }
  return out;
}

export function readFixtureImage(fixtureDir: string): FeatureMap {
  const metaPath = join(fixtureDir, 'image.json');
  const dataPath = join(fixtureDir, 'image.f32');
  if (!existsSync(metaPath) || !existsSync(dataPath)) {
    throw new MissingFixture(`no probe image under ${fixtureDir}`);
  }
  const meta = JSON.parse(readFileSync(metaPath, 'utf-8'));
  const data = readF32File(dataPath);
  if (data.length !== meta.height * meta.width * meta.channels) {
    throw new ShapeMismatch(
      `image.f32 holds ${data.length} floats for a ` +
      `${meta.height}x${meta.width}x${meta.channels} image`,
    );
  }
  return { height: meta.height, width: meta.width, channels: meta.channels, data };
}

export function verify(weightFile: Uint8Array, fixtureDir: string): VerifyReport {
  const indexPath = join(fixtureDir, 'activations.json');
  const blobPath = join(fixtureDir, 'activations.f32');
  if (!existsSync(indexPath) || !existsSync(blobPath)) {
    throw new MissingFixture(`no activation dump under ${fixtureDir}`);
  }
  const image = readFixtureImage(fixtureDir);
  const dump: DumpedLayer[] = JSON.parse(readFileSync(indexPath, 'utf-8')).layers;
  const blob = readF32File(blobPath);

  const acts = runChain(readWeights(weightFile), image);
  const layers: LayerDeviation[] = [];
  let worst = 0;
  for (const entry of dump) {
    const got = acts.get(entry.name);
    if (got === undefined) {
      throw new ShapeMismatch(`dump names layer '${entry.name}' absent from the file`);
    }
    const count = entry.height * entry.width * entry.channels;
    if (got.data.length !== count) {
      throw new ShapeMismatch(
        `layer ${entry.name}: file yields ${got.data.length} values, dump has ${count}`,
      );
    }
    let maxDev = 0;
    for (let i = 0; i < count; i++) {
      const dev = Math.abs(got.data[i] - blob[entry.offset + i]);
      if (dev > maxDev) maxDev = dev;
    }
    layers.push({ name: entry.name, maxDeviation: maxDev });
    if (maxDev > worst) worst = maxDev;
  }
  return { layers, maxDeviation: worst };
}
