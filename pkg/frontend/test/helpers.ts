import { readFileSync } from 'node:fs';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';

const HERE = dirname(fileURLToPath(import.meta.url));

export function fixturePath(name: string): string {
  return resolve(HERE, 'fixtures', name);
}

export function readFixture(name: string): Uint8Array {
  return new Uint8Array(readFileSync(fixturePath(name)));
}

export function fixedPasswords(): string[] {
  return readFileSync(join(HERE, 'passwords50.txt'), 'utf-8')
    .split(/\r?\n/)
    .filter((line) => line.length > 0);
}

export interface ScoreRow {
  password: string;
  logProb: number;
  guessNumber: number;
  log10GuessNumber?: number;
  decadeBin?: number;
}

/** Parse a score CSV (the fixed passwords contain no commas or quotes). */
export function readScoreCsv(name: string): ScoreRow[] {
  const lines = readFileSync(fixturePath(name), 'utf-8')
    .split(/\r?\n/)
    .filter((line) => line.length > 0);
  const header = lines[0].split(',');
  const col = (field: string) => header.indexOf(field);
  const iPw = col('password');
  const iLp = col('log_prob');
  const iG = col('guess_number');
  const iL10 = col('log10_guess_number');
  const iBin = col('decade_bin');
  return lines.slice(1).map((line) => {
    const parts = line.split(',');
    const row: ScoreRow = {
      password: parts[iPw],
      logProb: Number(parts[iLp]),
      guessNumber: Number(parts[iG]),
    };
    if (iL10 >= 0) row.log10GuessNumber = Number(parts[iL10]);
    if (iBin >= 0) row.decadeBin = Number(parts[iBin]);
    return row;
  });
}
