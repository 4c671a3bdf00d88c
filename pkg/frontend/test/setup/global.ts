/**
 * Vitest global setup: build the meter's test fixtures with the pwguess CLI.
 *
 * Everything here talks to the trained-model pipeline exclusively through
 * its command line and file formats, so these tests exercise the real
 * export interface end to end. Fixtures are cached; delete the directory or
 * set METER_FIXTURES_REGEN=1 to rebuild.
 */

import { execFileSync } from 'node:child_process';
import { existsSync, mkdirSync, rmSync } from 'node:fs';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';

const HERE = dirname(fileURLToPath(import.meta.url));
const FIXTURES = resolve(HERE, '../fixtures');
const REPO = resolve(HERE, '../../..');
const PASSWORDS = resolve(HERE, '../passwords50.txt');

const EXPECTED = [
  'demo.corpus', 'tiny.ckpt', 'tiny.est',
  'tiny_fp32.psmb', 'tiny_fp16.psmb', 'tiny_int8.psmb',
  'oracle.csv', 'ref_fp32.csv', 'ref_int8.csv',
  'small.ckpt', 'small_train.corpus', 'small_int8.psmb',
];

function pwguess(...args: string[]): void {
  try {
    execFileSync('pwguess', args, { stdio: ['ignore', 'pipe', 'pipe'] });
  } catch (e) {
    const err = e as { stderr?: Buffer; message: string };
    const detail = err.stderr ? err.stderr.toString() : err.message;
    throw new Error(`pwguess ${args.join(' ')} failed:\n${detail}`);
  }
}

export default function setup(): void {
  const fresh = EXPECTED.every((name) => existsSync(join(FIXTURES, name)));
  if (fresh && !process.env.METER_FIXTURES_REGEN) {
    return;
  }
  rmSync(FIXTURES, { recursive: true, force: true });
  mkdirSync(FIXTURES, { recursive: true });
  const f = (name: string) => join(FIXTURES, name);

  // A small trained model for parity fixtures.
  pwguess('ingest', '--data', join(REPO, 'fixtures/demo_corpus.txt'),
          '--out', f('demo.corpus'));
  pwguess('pretrain', '--config', join(REPO, 'fixtures/tiny_config.json'),
          '--data', f('demo.corpus'), '--out', f('tiny.ckpt'),
          '--epochs', '2', '--batch', '64', '--lr', '1e-3',
          '--schedule', 'constant', '--seed', '1');
  pwguess('estimator', '--model', f('tiny.ckpt'), '--n', '2000', '--seed', '2',
          '--out', f('tiny.est'), '--model-id', 'tiny-meter');

  // One bundle per quantization kind; the int8 one doubles as the gzip case.
  pwguess('psm-export', '--model', f('tiny.ckpt'), '--est', f('tiny.est'),
          '--quant', 'fp32', '--out', f('tiny_fp32.psmb'));
  pwguess('psm-export', '--model', f('tiny.ckpt'), '--est', f('tiny.est'),
          '--quant', 'fp16', '--out', f('tiny_fp16.psmb'));
  pwguess('psm-export', '--model', f('tiny.ckpt'), '--est', f('tiny.est'),
          '--quant', 'int8', '--zip', '--out', f('tiny_int8.psmb'));

  // Reference evaluations of the fixed password list, bundle by bundle.
  pwguess('score', '--model', f('tiny.ckpt'), '--data', PASSWORDS,
          '--est', f('tiny.est'), '--out', f('oracle.csv'));
  pwguess('psm-eval', '--bundle', f('tiny_fp32.psmb'), '--test', PASSWORDS,
          '--oracle', f('oracle.csv'), '--out', f('matrix_fp32.json'),
          '--scores', f('ref_fp32.csv'));
  pwguess('psm-eval', '--bundle', f('tiny_int8.psmb'), '--test', PASSWORDS,
          '--oracle', f('oracle.csv'), '--out', f('matrix_int8.json'),
          '--scores', f('ref_int8.csv'));

  // A full-size (small preset) bundle for the load and latency checks.
  // Reuses the tiny estimator table: latency depends only on the weights.
  pwguess('sample', '--data', f('demo.corpus'), '--n', '256', '--seed', '5',
          '--out', f('small_train.corpus'));
  pwguess('pretrain', '--config', 'small', '--data', f('small_train.corpus'),
          '--out', f('small.ckpt'), '--epochs', '1', '--batch', '64',
          '--schedule', 'constant', '--seed', '3');
  pwguess('psm-export', '--model', f('small.ckpt'), '--est', f('tiny.est'),
          '--quant', 'int8', '--zip', '--out', f('small_int8.psmb'),
          '--model-id', 'small-timing');
}
