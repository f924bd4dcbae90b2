/* Deterministic level-of-detail decimation: above the budget, draw every
 * n-th point by a fixed stride so repeated renders pick identical subsets.
 * Count badges always report true totals; only drawing is thinned. */

export const DEFAULT_POINT_BUDGET = 100_000;

export function decimationStride(total: number, budget: number = DEFAULT_POINT_BUDGET): number {
  if (total <= budget) return 1;
  return Math.ceil(total / budget);
}

export function decimatedIndices(total: number, budget: number = DEFAULT_POINT_BUDGET): number[] {
  const stride = decimationStride(total, budget);
  const out: number[] = [];
  for (let i = 0; i < total; i += stride) out.push(i);
  return out;
}
