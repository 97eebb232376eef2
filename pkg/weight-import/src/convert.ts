/**
 * Manifest-driven conversion of source-model tensors into NSWT records.
 *
 * The manifest declares the target chain layer by layer. Conv entries
 * name the source kernel/bias tensors; source kernels use the channels-
 * last (kh, kw, in, out) layout and are transposed to the container's
 * (out, in, kh, kw) order. The optional inputMean entry becomes the
 * leading input_mean record. Conversion is deterministic: the same
 * manifest and tensors always produce the same bytes.
 */

import { ShapeMismatch, UnknownSourceLayer } from './errors.js';
import {
  ConvRecord,
  KIND_CONV,
  KIND_INPUT_MEAN,
  KIND_POOL,
  KIND_RELU,
  WeightRecord,
  writeWeights,
} from './nswt.js';
import { SourceTensor } from './tfjs.js';

export interface ManifestConvLayer {
  name: string;
  kind: 'conv';
  in: number;
  out: number;
  kh: number;
  kw: number;
  /** source tensor holding the (kh, kw, in, out) kernel */
  kernel: string;
  /** source tensor holding the per-output-channel bias; omit for zeros */
  bias?: string;
}

export interface ManifestPlainLayer {
  name: string;
  kind: 'relu' | 'pool';
}

export type ManifestLayer = ManifestConvLayer | ManifestPlainLayer;

export interface ConvertManifest {
  layers: ManifestLayer[];
  /** per-channel input means; omitted means a zero mean per channel */
  inputMean?: number[];
  inputChannels?: number;
}

function lookup(tensors: Map<string, SourceTensor>, name: string): SourceTensor {
  const tensor = tensors.get(name);
  if (tensor === undefined) {
    throw new UnknownSourceLayer(`source tensor '${name}' not in the model`);
  }
  return tensor;
}

function sameShape(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

function convRecord(
  layer: ManifestConvLayer,
  tensors: Map<string, SourceTensor>,
): ConvRecord {
  const { out, in: inC, kh, kw } = layer;
  const source = lookup(tensors, layer.kernel);
  if (!sameShape(source.shape, [kh, kw, inC, out])) {
    throw new ShapeMismatch(
      `layer ${layer.name}: kernel '${layer.kernel}' has shape ` +
      `[${source.shape}], expected [${[kh, kw, inC, out]}]`,
    );
  }
  // (kh, kw, in, out) -> (out, in, kh, kw)
  const kernel = new Float32Array(out * inC * kh * kw);
  for (let y = 0; y < kh; y++) {
    for (let x = 0; x < kw; x++) {
      for (let c = 0; c < inC; c++) {
        for (let o = 0; o < out; o++) {
          kernel[((o * inC + c) * kh + y) * kw + x] =
            source.data[((y * kw + x) * inC + c) * out + o];
        }
      }
    }
  }

  let bias: Float32Array = new Float32Array(out);
  if (layer.bias !== undefined) {
    const biasTensor = lookup(tensors, layer.bias);
    if (!sameShape(biasTensor.shape, [out])) {
      throw new ShapeMismatch(
        `layer ${layer.name}: bias '${layer.bias}' has shape ` +
        `[${biasTensor.shape}], expected [${out}]`,
      );
    }
    bias = biasTensor.data;
  }
  return { name: layer.name, kind: KIND_CONV, shape: [out, inC, kh, kw], kernel, bias };
}

export function convert(
  manifest: ConvertManifest,
  tensors: Map<string, SourceTensor>,
): Uint8Array {
  const channels = manifest.inputChannels
    ?? (manifest.layers.find((l): l is ManifestConvLayer => l.kind === 'conv')?.in ?? 3);
  const means = new Float32Array(channels);
  if (manifest.inputMean !== undefined) {
    if (manifest.inputMean.length !== channels) {
      throw new ShapeMismatch(
        `inputMean has ${manifest.inputMean.length} entries for ${channels} channels`,
      );
    }
    means.set(manifest.inputMean);
  }

  const records: WeightRecord[] = [
    { name: 'input_mean', kind: KIND_INPUT_MEAN, means },
  ];
  for (const layer of manifest.layers) {
    if (layer.kind === 'conv') {
      records.push(convRecord(layer, tensors));
    } else {
      records.push({
        name: layer.name,
        kind: layer.kind === 'relu' ? KIND_RELU : KIND_POOL,
      });
    }
  }
  return writeWeights(records);
}
