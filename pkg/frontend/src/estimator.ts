/**
 * Guess-number lookup over the bundle's Monte Carlo table.
 *
 * The table holds n sampled log-probabilities sorted descending, plus
 * cumulative importance weights (estimated count of distinct strings at
 * least as probable as each sample) and cumulative squared weights for the
 * standard error. A query counts the samples strictly more probable than
 * the password and reads the matching cumulative weight.
 */

export const MAX_DECADE_BIN = 20;

export interface Strength {
  guessNumber: number;
  log10GuessNumber: number;
  decadeBin: number;
  standardError: number;
  rawGuessNumber: number;
  logProb: number;
}

export function decadeBin(guessNumber: number): number {
  const b = Math.floor(Math.log10(Math.max(guessNumber, 1)));
  return Math.min(Math.max(b, 0), MAX_DECADE_BIN);
}

export class RankTable {
  readonly n: number;
  private readonly cumWeights: Float64Array;
  private readonly cumSqWeights: Float64Array;

  /**
   * The bundle also stores single-precision cumulative tables, but those
   * saturate once a sample is less likely than about exp(-89).  The
   * command-line evaluator rebuilds the cumulatives in double precision
   * from the stored log-probabilities, so the meter does the same to stay
   * in agreement.
   */
  constructor(private readonly logProbsDesc: Float32Array) {
    this.n = logProbsDesc.length;
    if (this.n < 1) {
      throw new Error('estimator table must be non-empty');
    }
    this.cumWeights = new Float64Array(this.n);
    this.cumSqWeights = new Float64Array(this.n);
    let cum = 0;
    let cumSq = 0;
    for (let i = 0; i < this.n; i++) {
      const w = Math.exp(-logProbsDesc[i]) / this.n;
      cum += w;
      cumSq += w * w;
      this.cumWeights[i] = cum;
      this.cumSqWeights[i] = cumSq;
    }
  }

  /** Number of samples with log-probability strictly above logp. */
  rankIndex(logp: number): number {
    // Descending array: find the first index whose value is <= logp.
    let lo = 0;
    let hi = this.n;
    while (lo < hi) {
      const mid = (lo + hi) >>> 1;
      if (this.logProbsDesc[mid] > logp) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  guessNumber(logp: number): number {
    const k = this.rankIndex(logp);
    return k > 0 ? this.cumWeights[k - 1] : 0;
  }

  standardError(logp: number): number {
    const k = this.rankIndex(logp);
    if (k === 0) return 0;
    const est = this.cumWeights[k - 1];
    const variance = this.cumSqWeights[k - 1] - (est * est) / this.n;
    return Math.sqrt(Math.max(variance, 0));
  }

  /** Full report: raw estimate, then the scaled-and-floored display value. */
  strength(logp: number, scalingFactor: number): Strength {
    const raw = this.guessNumber(logp);
    const scaled = Math.max(raw / scalingFactor, 1);
    return {
      guessNumber: scaled,
      log10GuessNumber: Math.log10(scaled),
      decadeBin: decadeBin(scaled),
      standardError: this.standardError(logp) / scalingFactor,
      rawGuessNumber: raw,
      logProb: logp,
    };
  }
}
