/**
 * Page wiring for the strength meter demo: pick a bundle file, type a
 * candidate password, get live guess-number feedback. Everything runs in
 * the page; the password is never sent anywhere.
 */

import { Meter, MeterReport, loadMeter } from './meter.js';

let meter: Meter | null = null;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function fmtGuesses(g: number): string {
  if (g < 1e6) return Math.round(g).toLocaleString();
  return `10^${Math.log10(g).toFixed(2)}`;
}

function renderFlagged(input: string, bad: { index: number }[]): string {
  const badAt = new Set(bad.map((b) => b.index));
  let html = '';
  for (let i = 0; i < input.length; i++) {
    const ch = input[i].replace('&', '&amp;').replace('<', '&lt;');
    html += badAt.has(i) ? `<mark title="outside the model charset">${ch}</mark>` : ch;
  }
  return html;
}

function render(report: MeterReport): void {
  const bar = el<HTMLDivElement>('meter-bar');
  const verdict = el<HTMLDivElement>('verdict');
  const detail = el<HTMLDivElement>('detail');
  const echo = el<HTMLDivElement>('echo');
  echo.innerHTML = renderFlagged(report.input, report.badChars);

  if (report.badChars.length > 0) {
    verdict.textContent = 'contains characters the model cannot score';
    detail.textContent = 'highlighted characters are outside the bundle charset';
    bar.className = 'bar';
    bar.style.width = '0%';
    return;
  }
  if (!report.ok || !report.strength || !report.band) {
    verdict.textContent = '';
    detail.textContent = 'type a candidate password to see its strength';
    bar.className = 'bar';
    bar.style.width = '0%';
    return;
  }
  const s = report.strength;
  verdict.textContent = `${report.band}: about ${fmtGuesses(s.guessNumber)} guesses`;
  const parts = [
    `log10 guesses ${s.log10GuessNumber.toFixed(2)}`,
    `decade bin ${s.decadeBin}`,
  ];
  if (report.truncated) {
    parts.push('input longer than the model window; scored the prefix');
  }
  detail.textContent = parts.join(' | ');
  bar.className = `bar ${report.band}`;
  bar.style.width = `${Math.min(100, (s.log10GuessNumber / 15) * 100)}%`;
}

async function onBundleChosen(file: File): Promise<void> {
  const status = el<HTMLDivElement>('bundle-status');
  status.textContent = `loading ${file.name}...`;
  try {
    const data = await file.arrayBuffer();
    meter = await loadMeter(data);
    const input = el<HTMLInputElement>('password');
    input.disabled = false;
    status.textContent =
      `${file.name}: ${meter.quantization} weights, table of ${meter.table.n} ` +
      `samples, scaling factor ${meter.scalingFactor}, ` +
      `loaded in ${(meter.loadMillis / 1000).toFixed(2)} s`;
    const report = await meter.submit(input.value);
    if (report) render(report);
  } catch (e) {
    meter = null;
    status.textContent = `could not load bundle: ${(e as Error).message}`;
  }
}

export function wirePage(): void {
  const fileInput = el<HTMLInputElement>('bundle-file');
  fileInput.addEventListener('change', () => {
    const file = fileInput.files?.[0];
    if (file) void onBundleChosen(file);
  });
  const password = el<HTMLInputElement>('password');
  password.addEventListener('input', async () => {
    if (!meter) return;
    const report = await meter.submit(password.value);
    if (report) render(report); // null means a newer keystroke superseded this one
  });
}

if (typeof document !== 'undefined' && document.getElementById('bundle-file')) {
  wirePage();
}
