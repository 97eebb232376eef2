export class WeightImportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

export class BadMagic extends WeightImportError {}
export class VersionUnsupported extends WeightImportError {}
export class TruncatedFile extends WeightImportError {}
export class TrailingData extends WeightImportError {}
export class ShapeMismatch extends WeightImportError {}
export class UnknownSourceLayer extends WeightImportError {}
export class MissingFixture extends WeightImportError {}
