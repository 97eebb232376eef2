export {
  BadMagic,
  MissingFixture,
  ShapeMismatch,
  TrailingData,
  TruncatedFile,
  UnknownSourceLayer,
  VersionUnsupported,
  WeightImportError,
} from './errors.js';
export {
  ConvRecord,
  InputMeanRecord,
  KIND_CONV,
  KIND_INPUT_MEAN,
  KIND_POOL,
  KIND_RELU,
  PlainRecord,
  readWeights,
  WeightRecord,
  writeWeights,
} from './nswt.js';
export { generateTinyVggFile, generateTinyVggRecords, XorShift64Star } from './generate.js';
export { readModelWeights, SourceTensor } from './tfjs.js';
export { convert, ConvertManifest, ManifestLayer } from './convert.js';
export { FeatureMap, runChain } from './forward.js';
export { verify, VerifyReport } from './verify.js';
