/**
 * Character-level decoder inference from dequantized bundle tensors.
 *
 * The architecture mirrors the exporter: token plus position embeddings,
 * pre-layer-norm blocks (masked multi-head self-attention, then a GELU MLP),
 * a final layer norm, and logits through the tied token embedding (or a
 * separate output head when untied). All arithmetic runs in doubles over the
 * float32 weights.
 *
 * Scoring is incremental: an EvalSession keeps per-layer key/value rows and
 * per-position logits, so a keystroke that extends or edits the input only
 * recomputes positions from the first changed one.
 */

import { BundleFormatError, ModelConfig, ParsedBundle } from './format.js';

const LN_EPS = 1e-5;
const SPECIAL_COUNT = 5;

export class Vocab {
  readonly charset: string;
  readonly size: number;
  readonly padId: number;
  readonly sosId: number;
  readonly eosId: number;
  private readonly charToId = new Map<string, number>();

  constructor(tokens: string[]) {
    const chars = tokens.slice(0, tokens.length - SPECIAL_COUNT);
    this.charset = chars.join('');
    this.size = tokens.length;
    this.padId = chars.length;
    this.sosId = chars.length + 1;
    this.eosId = chars.length + 2;
    chars.forEach((c, i) => this.charToId.set(c, i));
  }

  /** Character ids for an input; out-of-charset characters come back flagged. */
  encode(input: string): { ids: number[]; badChars: { ch: string; index: number }[] } {
    const ids: number[] = [];
    const badChars: { ch: string; index: number }[] = [];
    for (let i = 0; i < input.length; i++) {
      const id = this.charToId.get(input[i]);
      if (id === undefined) {
        badChars.push({ ch: input[i], index: i });
      } else {
        ids.push(id);
      }
    }
    return { ids, badChars };
  }
}

function erf(x: number): number {
  // Abramowitz-Stegun 7.1.26, 1.5e-7 absolute error: on par with the
  // float32 error function the exporter's forward pass uses.
  const sign = x < 0 ? -1 : 1;
  const ax = Math.abs(x);
  const t = 1 / (1 + 0.3275911 * ax);
  const poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741
    + t * (-1.453152027 + t * 1.061405429))));
  return sign * (1 - poly * Math.exp(-ax * ax));
}

function gelu(x: number): number {
  return 0.5 * x * (1 + erf(x / Math.SQRT2));
}

function layerNorm(x: Float64Array, w: Float32Array, b: Float32Array,
                   out: Float64Array): void {
  const n = x.length;
  let mean = 0;
  for (let i = 0; i < n; i++) mean += x[i];
  mean /= n;
  let variance = 0;
  for (let i = 0; i < n; i++) {
    const d = x[i] - mean;
    variance += d * d;
  }
  variance /= n;
  const inv = 1 / Math.sqrt(variance + LN_EPS);
  for (let i = 0; i < n; i++) {
    out[i] = (x[i] - mean) * inv * w[i] + b[i];
  }
}

/** y = W x + b with W stored row-major as (rows, cols). */
function matvec(w: Float32Array, b: Float32Array | null, x: Float64Array,
                out: Float64Array, rows: number, cols: number): void {
  for (let r = 0; r < rows; r++) {
    let s = b === null ? 0 : b[r];
    const base = r * cols;
    for (let i = 0; i < cols; i++) {
      s += w[base + i] * x[i];
    }
    out[r] = s;
  }
}

interface BlockWeights {
  ln1w: Float32Array; ln1b: Float32Array;
  qw: Float32Array; qb: Float32Array;
  kw: Float32Array; kb: Float32Array;
  vw: Float32Array; vb: Float32Array;
  ow: Float32Array; ob: Float32Array;
  ln2w: Float32Array; ln2b: Float32Array;
  fc1w: Float32Array; fc1b: Float32Array;
  fc2w: Float32Array; fc2b: Float32Array;
}

export class CharModel {
  readonly cfg: ModelConfig;
  readonly vocab: Vocab;
  private readonly tokEmb: Float32Array;
  private readonly posEmb: Float32Array;
  private readonly blocks: BlockWeights[];
  private readonly lnfW: Float32Array;
  private readonly lnfB: Float32Array;
  private readonly headW: Float32Array;

  constructor(bundle: ParsedBundle) {
    this.cfg = bundle.manifest.config;
    this.vocab = new Vocab(bundle.manifest.vocabulary);
    const get = (name: string): Float32Array => {
      const t = bundle.tensors.get(name);
      if (!t) throw new BundleFormatError(`bundle is missing tensor ${name}`);
      return t.values;
    };
    this.tokEmb = get('token_embedding');
    this.posEmb = get('position_embedding');
    this.blocks = [];
    for (let i = 0; i < this.cfg.layers; i++) {
      const p = `block${i}.`;
      this.blocks.push({
        ln1w: get(p + 'ln1.weight'), ln1b: get(p + 'ln1.bias'),
        qw: get(p + 'q.weight'), qb: get(p + 'q.bias'),
        kw: get(p + 'k.weight'), kb: get(p + 'k.bias'),
        vw: get(p + 'v.weight'), vb: get(p + 'v.bias'),
        ow: get(p + 'out.weight'), ob: get(p + 'out.bias'),
        ln2w: get(p + 'ln2.weight'), ln2b: get(p + 'ln2.bias'),
        fc1w: get(p + 'fc1.weight'), fc1b: get(p + 'fc1.bias'),
        fc2w: get(p + 'fc2.weight'), fc2b: get(p + 'fc2.bias'),
      });
    }
    this.lnfW = get('final_norm.weight');
    this.lnfB = get('final_norm.bias');
    this.headW = this.cfg.tie_output_embedding
      ? this.tokEmb : get('output_head.weight');
  }

  /** Longest password the model can score: [SOS] + chars + [EOS] positions. */
  get maxChars(): number {
    return this.cfg.max_positions - 2;
  }

  createSession(): EvalSession {
    return new EvalSession(this, this.tokEmb, this.posEmb, this.blocks,
                           this.lnfW, this.lnfB, this.headW);
  }
}

export class EvalSession {
  private ids: number[] = [];
  private readonly kCache: Float64Array[] = [];
  private readonly vCache: Float64Array[] = [];
  private readonly logitsByPos: Float64Array[] = [];
  // Scratch buffers reused across tokens to keep keystrokes allocation-free.
  private readonly x: Float64Array;
  private readonly h: Float64Array;
  private readonly q: Float64Array;
  private readonly kRow: Float64Array;
  private readonly vRow: Float64Array;
  private readonly attnOut: Float64Array;
  private readonly proj: Float64Array;
  private readonly inner: Float64Array;
  private readonly scores: Float64Array;

  constructor(private readonly model: CharModel,
              private readonly tokEmb: Float32Array,
              private readonly posEmb: Float32Array,
              private readonly blocks: BlockWeights[],
              private readonly lnfW: Float32Array,
              private readonly lnfB: Float32Array,
              private readonly headW: Float32Array) {
    const { embed_dim: e, intermediate_dim: inter, max_positions: mp,
            layers } = model.cfg;
    for (let i = 0; i < layers; i++) {
      this.kCache.push(new Float64Array(mp * e));
      this.vCache.push(new Float64Array(mp * e));
    }
    this.x = new Float64Array(e);
    this.h = new Float64Array(e);
    this.q = new Float64Array(e);
    this.kRow = new Float64Array(e);
    this.vRow = new Float64Array(e);
    this.attnOut = new Float64Array(e);
    this.proj = new Float64Array(e);
    this.inner = new Float64Array(inter);
    this.scores = new Float64Array(mp);
  }

  /**
   * Natural-log model probability of the complete password given as char
   * ids (start and end transitions included). Reuses every position before
   * the first edit since the previous call.
   */
  score(charIds: number[]): number {
    const vocab = this.model.vocab;
    const full = [vocab.sosId, ...charIds];
    if (full.length > this.model.cfg.max_positions - 1) {
      throw new BundleFormatError(
        `sequence of ${charIds.length} characters exceeds the position limit`);
    }
    let common = 0;
    while (common < this.ids.length && common < full.length
           && this.ids[common] === full[common]) {
      common++;
    }
    for (let t = common; t < full.length; t++) {
      this.forwardOne(full[t], t);
    }
    this.ids = full;

    let total = 0;
    for (let t = 1; t < full.length; t++) {
      total += this.logProbAt(t - 1, full[t]);
    }
    total += this.logProbAt(full.length - 1, vocab.eosId);
    return total;
  }

  /** log softmax of the logits at a position, evaluated for one token id. */
  private logProbAt(pos: number, tokenId: number): number {
    const logits = this.logitsByPos[pos];
    let max = -Infinity;
    for (let i = 0; i < logits.length; i++) {
      if (logits[i] > max) max = logits[i];
    }
    let sum = 0;
    for (let i = 0; i < logits.length; i++) {
      sum += Math.exp(logits[i] - max);
    }
    return logits[tokenId] - max - Math.log(sum);
  }

  private forwardOne(tokenId: number, t: number): void {
    const { embed_dim: e, intermediate_dim: inter, heads,
            vocab_size: vocabSize } = this.model.cfg;
    const dk = e / heads;
    const invSqrtDk = 1 / Math.sqrt(dk);
    const x = this.x;
    for (let i = 0; i < e; i++) {
      x[i] = this.tokEmb[tokenId * e + i] + this.posEmb[t * e + i];
    }
    for (let layer = 0; layer < this.blocks.length; layer++) {
      const w = this.blocks[layer];
      const kc = this.kCache[layer];
      const vc = this.vCache[layer];
      layerNorm(x, w.ln1w, w.ln1b, this.h);
      matvec(w.qw, w.qb, this.h, this.q, e, e);
      matvec(w.kw, w.kb, this.h, this.kRow, e, e);
      matvec(w.vw, w.vb, this.h, this.vRow, e, e);
      kc.set(this.kRow, t * e);
      vc.set(this.vRow, t * e);
      for (let head = 0; head < heads; head++) {
        const base = head * dk;
        let maxScore = -Infinity;
        for (let j = 0; j <= t; j++) {
          let s = 0;
          const kBase = j * e + base;
          for (let d = 0; d < dk; d++) {
            s += this.q[base + d] * kc[kBase + d];
          }
          s *= invSqrtDk;
          this.scores[j] = s;
          if (s > maxScore) maxScore = s;
        }
        let denom = 0;
        for (let j = 0; j <= t; j++) {
          this.scores[j] = Math.exp(this.scores[j] - maxScore);
          denom += this.scores[j];
        }
        for (let d = 0; d < dk; d++) {
          this.attnOut[base + d] = 0;
        }
        for (let j = 0; j <= t; j++) {
          const weight = this.scores[j] / denom;
          const vBase = j * e + base;
          for (let d = 0; d < dk; d++) {
            this.attnOut[base + d] += weight * vc[vBase + d];
          }
        }
      }
      matvec(w.ow, w.ob, this.attnOut, this.proj, e, e);
      for (let i = 0; i < e; i++) x[i] += this.proj[i];
      layerNorm(x, w.ln2w, w.ln2b, this.h);
      matvec(w.fc1w, w.fc1b, this.h, this.inner, inter, e);
      for (let i = 0; i < inter; i++) {
        this.inner[i] = gelu(this.inner[i]);
      }
      matvec(w.fc2w, w.fc2b, this.inner, this.proj, e, inter);
      for (let i = 0; i < e; i++) x[i] += this.proj[i];
    }
    layerNorm(x, this.lnfW, this.lnfB, this.h);
    if (!this.logitsByPos[t]) {
      this.logitsByPos[t] = new Float64Array(vocabSize);
    }
    matvec(this.headW, null, this.h, this.logitsByPos[t], vocabSize, e);
  }
}
