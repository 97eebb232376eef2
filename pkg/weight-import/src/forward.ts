/**
 * Reference forward pass over a chain of NSWT records.
 *
 * Mirrors the consumer's semantics: subtract the per-channel input
 * means, then stride-1 zero-padded "same" convolutions, elementwise
 * relu and 2x2 stride-2 average pooling (odd trailing row/column
 * dropped). Values are rounded to float32 after each output so the
 * activations track a float32 pipeline to within accumulation order.
 */

import { ShapeMismatch } from './errors.js';
import {
  KIND_CONV,
  KIND_INPUT_MEAN,
  KIND_RELU,
  WeightRecord,
} from './nswt.js';

export interface FeatureMap {
  height: number;
  width: number;
  channels: number;
  /** row-major over pixels, channels innermost */
  data: Float32Array;
}

function convForward(x: FeatureMap, kernel: Float32Array, bias: Float32Array,
                     shape: [number, number, number, number]): FeatureMap {
  const [outC, inC, kh, kw] = shape;
  if (x.channels !== inC) {
    throw new ShapeMismatch(
      `conv expects ${inC} input channels, feature map has ${x.channels}`,
    );
  }
  const { height, width } = x;
  const top = (kh - 1) >> 1;
  const left = (kw - 1) >> 1;
  const out = new Float32Array(height * width * outC);
  for (let y = 0; y < height; y++) {
    for (let xPos = 0; xPos < width; xPos++) {
      for (let o = 0; o < outC; o++) {
        let acc = bias[o];
        for (let ky = 0; ky < kh; ky++) {
          const sy = y + ky - top;
          if (sy < 0 || sy >= height) continue;
          for (let kx = 0; kx < kw; kx++) {
            const sx = xPos + kx - left;
            if (sx < 0 || sx >= width) continue;
            const pixel = (sy * width + sx) * inC;
            const kBase = ((o * inC) * kh + ky) * kw + kx;
            for (let c = 0; c < inC; c++) {
              acc += x.data[pixel + c] * kernel[kBase + c * kh * kw];
            }
          }
        }
        out[(y * width + xPos) * outC + o] = Math.fround(acc);
      }
    }
  }
  return { height, width, channels: outC, data: out };
}

function reluForward(x: FeatureMap): FeatureMap {
  const data = new Float32Array(x.data.length);
  for (let i = 0; i < data.length; i++) {
    data[i] = x.data[i] > 0 ? x.data[i] : 0;
  }
  return { ...x, data };
}

function poolForward(x: FeatureMap): FeatureMap {
  const height = Math.floor(x.height / 2);
  const width = Math.floor(x.width / 2);
  if (height === 0 || width === 0) {
    throw new ShapeMismatch(
      `feature map ${x.height}x${x.width} too small to pool`,
    );
  }
  const c = x.channels;
  const data = new Float32Array(height * width * c);
  for (let y = 0; y < height; y++) {
    for (let xPos = 0; xPos < width; xPos++) {
      for (let ch = 0; ch < c; ch++) {
        const a = x.data[((2 * y) * x.width + 2 * xPos) * c + ch];
        const b = x.data[((2 * y) * x.width + 2 * xPos + 1) * c + ch];
        const d = x.data[((2 * y + 1) * x.width + 2 * xPos) * c + ch];
        const e = x.data[((2 * y + 1) * x.width + 2 * xPos + 1) * c + ch];
        data[(y * width + xPos) * c + ch] = Math.fround((a + b + d + e) * 0.25);
      }
    }
  }
  return { height, width, channels: c, data };
}

/** Run the chain; returns every layer's activations keyed by name. */
export function runChain(records: WeightRecord[], image: FeatureMap): Map<string, FeatureMap> {
  let means: Float32Array | null = null;
  for (const rec of records) {
    if (rec.kind === KIND_INPUT_MEAN) {
      means = rec.means;
      break;
    }
  }
  let x: FeatureMap = { ...image, data: Float32Array.from(image.data) };
  if (means !== null) {
    if (means.length !== x.channels) {
      throw new ShapeMismatch(
        `input means cover ${means.length} channels, image has ${x.channels}`,
      );
    }
    for (let i = 0; i < x.data.length; i++) {
      x.data[i] = Math.fround(x.data[i] - means[i % x.channels]);
    }
  }

  const acts = new Map<string, FeatureMap>();
  for (const rec of records) {
    if (rec.kind === KIND_INPUT_MEAN) continue;
    if (rec.kind === KIND_CONV) {
      x = convForward(x, rec.kernel, rec.bias, rec.shape);
    } else if (rec.kind === KIND_RELU) {
      x = reluForward(x);
    } else {
      x = poolForward(x);
    }
    acts.set(rec.name, x);
  }
  return acts;
}
