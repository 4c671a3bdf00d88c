/**
 * Responsiveness: with a full-size (small preset) int8 bundle, loading
 * completes and each keystroke evaluates in under 200 ms. Keystrokes reuse
 * the prefix cache, so the cost of a keypress is one incremental token, not
 * a full re-score.
 */

import { beforeAll, describe, expect, it } from 'vitest';

import { Meter, loadMeter } from '../src/meter.js';
import { readFixture } from './helpers.js';

const KEYSTROKE_BUDGET_MS = 200;

describe('small-config bundle responsiveness', () => {
  let meter: Meter;

  beforeAll(async () => {
    meter = await loadMeter(readFixture('small_int8.psmb'));
  });

  it('loads the bundle into a ready meter', () => {
    expect(meter.quantization).toBe('int8');
    expect(meter.model.cfg.embed_dim).toBe(256);
    expect(meter.model.cfg.layers).toBe(6);
    expect(meter.loadMillis).toBeGreaterThan(0);
    // eslint-disable-next-line no-console
    console.log(`bundle load ${(meter.loadMillis / 1000).toFixed(3)} s`);
  });

  it('evaluates every keystroke of a typed password under the budget', () => {
    const typed = 'Tr0ub4dor&3!xYz';
    // Warm up the JIT the way a first keypress after page load would.
    meter.evaluate('a');
    meter.evaluate('');
    const times: number[] = [];
    let input = '';
    for (const ch of typed) {
      input += ch;
      const started = performance.now();
      const report = meter.evaluate(input);
      times.push(performance.now() - started);
      expect(report.ok).toBe(true);
    }
    const worst = Math.max(...times);
    const mean = times.reduce((a, b) => a + b, 0) / times.length;
    // eslint-disable-next-line no-console
    console.log(`keystrokes: worst ${worst.toFixed(1)} ms, mean ${mean.toFixed(1)} ms`);
    expect(worst).toBeLessThan(KEYSTROKE_BUDGET_MS);
  });

  it('recovers quickly after an edit in the middle of the input', () => {
    meter.evaluate('CorrectHorse');
    const started = performance.now();
    const report = meter.evaluate('CorrektHorse'); // retype from position 6
    const elapsed = performance.now() - started;
    expect(report.ok).toBe(true);
    expect(elapsed).toBeLessThan(KEYSTROKE_BUDGET_MS * 2);
  });
});
