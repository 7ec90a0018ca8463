/**
 * Display formatting. The raw API numbers are shown untouched except for
 * CTR, which renders as a percentage with two decimals.
 */

export function formatCtr(ctr: number): string {
  return `${(ctr * 100).toFixed(2)}%`;
}

export function formatMicros(micros: number): string {
  return (micros / 1_000_000).toFixed(2);
}

export function formatCount(value: number): string {
  return String(value);
}
