#!/usr/bin/env node
/**
 * weight-import - move pretrained conv weights into the NSWT container.
 *
 * Usage:
 *   weight-import generate --out tiny_vgg.nswt
 *   weight-import convert --model model.json --manifest manifest.json --out weights.nswt
 *   weight-import verify --weights weights.nswt --fixture fixtures/tiny-vgg [--limit 1e-4]
 *   weight-import info --file weights.nswt
 *
 * generate writes the deterministically seeded tiny network (always the
 * same bytes). convert maps a TensorFlow.js layers model onto a target
 * chain described by the manifest. verify runs a weight file on the
 * fixture's probe image and compares every layer against the stored
 * activations; exit code 1 if the worst deviation exceeds the limit.
 */

import { readFileSync, writeFileSync } from 'node:fs';

import { convert, ConvertManifest } from './convert.js';
import { WeightImportError } from './errors.js';
import { generateTinyVggFile } from './generate.js';
import { KIND_CONV, KIND_INPUT_MEAN, KIND_RELU, readWeights } from './nswt.js';
import { readModelWeights } from './tfjs.js';
import { verify } from './verify.js';

const USAGE = `usage: weight-import <generate|convert|verify|info> [options]
  generate --out <file>
  convert  --model <model.json> --manifest <manifest.json> --out <file>
  verify   --weights <file> --fixture <dir> [--limit <max-deviation>]
  info     --file <file>`;

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--') || i + 1 >= argv.length) {
      console.error(`unexpected argument: ${arg}\n${USAGE}`);
      process.exit(2);
    }
    flags.set(arg.slice(2), argv[++i]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    console.error(`missing --${name}\n${USAGE}`);
    process.exit(2);
  }
  return value;
}

function cmdGenerate(flags: Map<string, string>): number {
  const out = required(flags, 'out');
  writeFileSync(out, generateTinyVggFile());
  console.log(`wrote ${out}`);
  return 0;
}

function cmdConvert(flags: Map<string, string>): number {
  const manifest: ConvertManifest = JSON.parse(
    readFileSync(required(flags, 'manifest'), 'utf-8'),
  );
  const tensors = readModelWeights(required(flags, 'model'));
  const out = required(flags, 'out');
  writeFileSync(out, convert(manifest, tensors));
  console.log(`wrote ${out} (${manifest.layers.length} layers)`);
  return 0;
}

function cmdVerify(flags: Map<string, string>): number {
  const weights = readFileSync(required(flags, 'weights'));
  const limit = Number(flags.get('limit') ?? '1e-4');
  const report = verify(weights, required(flags, 'fixture'));
  for (const layer of report.layers) {
    console.log(`${layer.name.padEnd(12)} max deviation ${layer.maxDeviation.toExponential(3)}`);
  }
  console.log(`overall ${report.maxDeviation.toExponential(3)} (limit ${limit})`);
  return report.maxDeviation <= limit ? 0 : 1;
}

function cmdInfo(flags: Map<string, string>): number {
  const records = readWeights(readFileSync(required(flags, 'file')));
  let parameters = 0;
  for (const rec of records) {
    if (rec.kind === KIND_CONV) {
      const [out, inC, kh, kw] = rec.shape;
      const count = rec.kernel.length + rec.bias.length;
      parameters += count;
      console.log(`${rec.name.padEnd(12)} conv  ${inC}->${out} ${kh}x${kw}  ${count} parameters`);
    } else if (rec.kind === KIND_INPUT_MEAN) {
      // counted as parameters to agree with the renderer's weights-info
      parameters += rec.means.length;
      console.log(`${rec.name.padEnd(12)} input-mean  ${rec.means.length} channels`);
    } else {
      console.log(`${rec.name.padEnd(12)} ${rec.kind === KIND_RELU ? 'relu' : 'pool'}`);
    }
  }
  console.log(`${parameters} total parameters`);
  return 0;
}

function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === undefined || command === '--help' || command === '-h') {
    console.log(USAGE);
    return command === undefined ? 2 : 0;
  }
  const flags = parseFlags(rest);
  try {
    switch (command) {
      case 'generate':
        return cmdGenerate(flags);
      case 'convert':
        return cmdConvert(flags);
      case 'verify':
        return cmdVerify(flags);
      case 'info':
        return cmdInfo(flags);
      default:
        console.error(`unknown command: ${command}\n${USAGE}`);
        return 2;
    }
  } catch (err) {
    if (err instanceof WeightImportError || (err as NodeJS.ErrnoException).code) {
      console.error(`weight-import: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
}

process.exit(main(process.argv.slice(2)));
