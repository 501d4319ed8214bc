/** Display formatting: the single place score rounding happens. */

/** Scores render with three decimals everywhere in the console. */
export const SCORE_DECIMALS = 3;

/** Largest difference between a rendered score and the API value. */
export const DISPLAY_EPSILON = 0.5 * 10 ** -SCORE_DECIMALS;

export function formatScore(value: number): string {
  return value.toFixed(SCORE_DECIMALS);
}

/** Width of a score bar; normalized scores live in [0, 1]. */
export function barWidth(value: number): string {
  const clamped = Math.min(1, Math.max(0, value));
  return `${(clamped * 100).toFixed(1)}%`;
}

export function formatWeight(value: number): string {
  return `${(value * 100).toFixed(0)}%`;
}
