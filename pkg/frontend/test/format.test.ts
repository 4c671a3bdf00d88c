import { describe, expect, it } from 'vitest';
import { gzipSync } from 'node:zlib';

import { BundleFormatError, halfToFloat, loadBundleBytes,
         parseBundle } from '../src/format.js';
import { readFixture } from './helpers.js';

describe('half-precision decoding', () => {
  it('decodes reference bit patterns', () => {
    expect(halfToFloat(0x0000)).toBe(0);
    expect(Object.is(halfToFloat(0x8000), -0)).toBe(true);
    expect(halfToFloat(0x3c00)).toBe(1);
    expect(halfToFloat(0x4000)).toBe(2);
    expect(halfToFloat(0xc000)).toBe(-2);
    expect(halfToFloat(0x3555)).toBeCloseTo(0.333251953125, 12);
    expect(halfToFloat(0x7bff)).toBe(65504); // largest finite half
    expect(halfToFloat(0x0001)).toBe(2 ** -24); // smallest subnormal
    expect(halfToFloat(0x7c00)).toBe(Infinity);
    expect(Number.isNaN(halfToFloat(0x7e00))).toBe(true);
  });
});

describe('bundle parsing', () => {
  it('parses an fp32 bundle into manifest, tensors, and tables', async () => {
    const bundle = await loadBundleBytes(readFixture('tiny_fp32.psmb'));
    const m = bundle.manifest;
    expect(m.format_version).toBe(1);
    expect(m.quantization.kind).toBe('fp32');
    expect(m.scaling_factor).toBe(1);
    expect(m.vocabulary).toHaveLength(m.config.vocab_size);
    // token + position embeddings, 16 tensors per block, final norm pair
    expect(m.tensors).toHaveLength(2 + 16 * m.config.layers + 2);
    expect(bundle.estLogProbs).toHaveLength(m.estimator.n);
    expect(bundle.estCumWeights).toHaveLength(m.estimator.n);
    expect(bundle.estCumSqWeights).toHaveLength(m.estimator.n);
    const emb = bundle.tensors.get('token_embedding');
    expect(emb).toBeDefined();
    expect(emb!.shape).toEqual([m.config.vocab_size, m.config.embed_dim]);
  });

  it('keeps the estimator table sorted and its cumulatives increasing', async () => {
    const bundle = await loadBundleBytes(readFixture('tiny_fp32.psmb'));
    const lp = bundle.estLogProbs;
    const cw = bundle.estCumWeights;
    for (let i = 1; i < lp.length; i++) {
      expect(lp[i]).toBeLessThanOrEqual(lp[i - 1]);
      expect(cw[i]).toBeGreaterThanOrEqual(cw[i - 1]);
    }
    expect(cw[0]).toBeGreaterThan(0);
  });

  it('auto-detects gzip compression', async () => {
    const zipped = readFixture('tiny_int8.psmb');
    expect(zipped[0]).toBe(0x1f);
    expect(zipped[1]).toBe(0x8b);
    const bundle = await loadBundleBytes(zipped);
    expect(bundle.manifest.quantization.kind).toBe('int8');
    expect(bundle.manifest.quantization.zip).toBe(true);
  });

  it('parses a re-gzipped fp32 bundle identically to the plain bytes', async () => {
    const plain = readFixture('tiny_fp32.psmb');
    const a = await loadBundleBytes(plain);
    const b = await loadBundleBytes(new Uint8Array(gzipSync(plain)));
    expect(Array.from(b.estLogProbs)).toEqual(Array.from(a.estLogProbs));
    const ta = a.tensors.get('block0.q.weight')!.values;
    const tb = b.tensors.get('block0.q.weight')!.values;
    expect(Array.from(tb)).toEqual(Array.from(ta));
  });

  it('dequantizes int8 tensors as integer codes times a per-tensor scale', async () => {
    const bundle = await loadBundleBytes(readFixture('tiny_int8.psmb'));
    const entry = bundle.manifest.tensors.find((t) => t.name === 'block0.q.weight')!;
    expect(entry.dtype).toBe('i8');
    expect(entry.scale).toBeGreaterThan(0);
    const scale = Math.fround(entry.scale!);
    for (const v of bundle.tensors.get('block0.q.weight')!.values) {
      const code = v / scale;
      expect(Math.abs(code - Math.round(code))).toBeLessThan(1e-4);
      expect(Math.abs(code)).toBeLessThanOrEqual(127.001);
    }
  });

  it('never quantizes normalization parameters', async () => {
    for (const name of ['tiny_int8.psmb', 'tiny_fp16.psmb']) {
      const bundle = await loadBundleBytes(readFixture(name));
      for (const entry of bundle.manifest.tensors) {
        if (entry.name.includes('ln1.') || entry.name.includes('ln2.')
            || entry.name.includes('final_norm.')) {
          expect(entry.dtype).toBe('f32');
        }
      }
    }
  });

  it('fp16 weights stay within half-precision rounding of the fp32 weights', async () => {
    const fp32 = await loadBundleBytes(readFixture('tiny_fp32.psmb'));
    const fp16 = await loadBundleBytes(readFixture('tiny_fp16.psmb'));
    const a = fp32.tensors.get('token_embedding')!.values;
    const b = fp16.tensors.get('token_embedding')!.values;
    expect(b).toHaveLength(a.length);
    for (let i = 0; i < a.length; i++) {
      // Relative error of round-to-nearest half is at most 2^-11.
      const bound = Math.max(Math.abs(a[i]) * 2 ** -10, 2 ** -24);
      expect(Math.abs(a[i] - b[i])).toBeLessThanOrEqual(bound);
    }
  });

  it('rejects bad magic bytes', () => {
    const bytes = readFixture('tiny_fp32.psmb').slice();
    bytes[0] = 0x51;
    expect(() => parseBundle(bytes)).toThrowError(BundleFormatError);
    expect(() => parseBundle(bytes)).toThrowError(/magic/);
  });

  it('rejects unsupported versions', () => {
    const bytes = readFixture('tiny_fp32.psmb').slice();
    bytes[4] = 9;
    expect(() => parseBundle(bytes)).toThrowError(/version/);
  });

  it('rejects truncated files without partial state', () => {
    const bytes = readFixture('tiny_fp32.psmb');
    expect(() => parseBundle(bytes.slice(0, 8))).toThrowError(BundleFormatError);
    expect(() => parseBundle(bytes.slice(0, bytes.length - 64)))
      .toThrowError(/truncated/);
    expect(() => parseBundle(bytes.slice(0, 200))).toThrowError(BundleFormatError);
  });

  it('rejects a corrupted manifest', () => {
    const bytes = readFixture('tiny_fp32.psmb').slice();
    for (let i = 12; i < 40; i++) bytes[i] = 0xff;
    expect(() => parseBundle(bytes)).toThrowError(/manifest/);
  });

  it('rejects a corrupted gzip stream', async () => {
    const zipped = readFixture('tiny_int8.psmb').slice();
    for (let i = 40; i < 80; i++) zipped[i] ^= 0xa5;
    await expect(loadBundleBytes(zipped)).rejects.toThrowError(BundleFormatError);
  });
});
