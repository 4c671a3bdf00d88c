/**
 * The strength meter: bundle loading, keystroke evaluation, display bands.
 *
 * Evaluation is client-side only; no input ever leaves the page. Reports
 * always describe the submitted input: submit() runs asynchronously with a
 * newest-input-wins policy, so a report for superseded input is never
 * rendered (the superseded promise resolves to null instead).
 */

import { loadBundleBytes, ParsedBundle } from './format.js';
import { RankTable, Strength } from './estimator.js';
import { CharModel, EvalSession } from './model.js';

/** Display convention only; the numeric estimate is the authoritative output. */
export type Band = 'weak' | 'medium' | 'strong';

export const BAND_THRESHOLDS = { medium: 1e6, strong: 1e12 };

export function band(guessNumber: number): Band {
  if (guessNumber >= BAND_THRESHOLDS.strong) return 'strong';
  if (guessNumber >= BAND_THRESHOLDS.medium) return 'medium';
  return 'weak';
}

export interface MeterReport {
  input: string;
  /** True when a numeric estimate was produced. */
  ok: boolean;
  badChars: { ch: string; index: number }[];
  truncated: boolean;
  strength?: Strength;
  band?: Band;
}

export class Meter {
  readonly model: CharModel;
  readonly table: RankTable;
  readonly scalingFactor: number;
  readonly modelId: string;
  readonly quantization: string;
  readonly loadMillis: number;
  private readonly session: EvalSession;
  private latestTicket = 0;

  constructor(bundle: ParsedBundle, startedAt?: number) {
    this.model = new CharModel(bundle);
    this.table = new RankTable(bundle.estLogProbs);
    this.scalingFactor = bundle.manifest.scaling_factor;
    this.modelId = bundle.manifest.estimator.model_id;
    this.quantization = bundle.manifest.quantization.kind;
    this.session = this.model.createSession();
    this.loadMillis = startedAt === undefined ? 0 : performance.now() - startedAt;
  }

  get charset(): string {
    return this.model.vocab.charset;
  }

  /** Evaluate the input now. Empty input yields a neutral report. */
  evaluate(input: string): MeterReport {
    if (input.length === 0) {
      return { input, ok: false, badChars: [], truncated: false };
    }
    const { ids, badChars } = this.model.vocab.encode(input);
    if (badChars.length > 0) {
      // No estimate for partially-unscorable input: flag the characters.
      return { input, ok: false, badChars, truncated: false };
    }
    const truncated = ids.length > this.model.maxChars;
    const scored = truncated ? ids.slice(0, this.model.maxChars) : ids;
    const logProb = this.session.score(scored);
    const strength = this.table.strength(logProb, this.scalingFactor);
    return {
      input, ok: true, badChars: [], truncated,
      strength, band: band(strength.guessNumber),
    };
  }

  /**
   * Queue an evaluation for this input. If another submit() arrives before
   * this one runs, the stale promise resolves to null (newest input wins).
   */
  submit(input: string): Promise<MeterReport | null> {
    const ticket = ++this.latestTicket;
    return new Promise((resolve) => {
      setTimeout(() => {
        resolve(ticket === this.latestTicket ? this.evaluate(input) : null);
      }, 0);
    });
  }
}

/** Parse bundle bytes into a ready meter, measuring the load time. */
export async function loadMeter(data: ArrayBuffer | Uint8Array): Promise<Meter> {
  const started = performance.now();
  const bundle = await loadBundleBytes(data);
  return new Meter(bundle, started);
}
