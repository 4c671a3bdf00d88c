export { BUNDLE_MAGIC, BUNDLE_VERSION, BundleFormatError, halfToFloat,
         loadBundleBytes, parseBundle } from './format.js';
export type { BundleManifest, ModelConfig, ParsedBundle,
              TensorEntry } from './format.js';
export { MAX_DECADE_BIN, RankTable, decadeBin } from './estimator.js';
export type { Strength } from './estimator.js';
export { CharModel, EvalSession, Vocab } from './model.js';
export { BAND_THRESHOLDS, Meter, band, loadMeter } from './meter.js';
export type { Band, MeterReport } from './meter.js';
