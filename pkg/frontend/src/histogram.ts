/** Measurement histogram: the one aggregation the dashboard computes
 * itself, straight from the stored results artifact. */

import { escapeHtml } from "./calendar.js";
import type { ResultsArtifact } from "./types.js";

/** Tally per-shot bitstrings across all circuits of a job. */
export function countBitstrings(measurements: string[][]): Record<string, number> {
  const counts: Record<string, number> = {};
  for (const circuit of measurements) {
    for (const bits of circuit) {
      counts[bits] = (counts[bits] ?? 0) + 1;
    }
  }
  return counts;
}

export interface HistogramBar {
  bitstring: string;
  count: number;
  /** height relative to the tallest bar, in (0, 1] */
  frac: number;
}

export function histogramBars(counts: Record<string, number>): HistogramBar[] {
  const entries = Object.entries(counts).sort(([a], [b]) => a.localeCompare(b));
  const max = entries.reduce((acc, [, c]) => Math.max(acc, c), 0);
  return entries.map(([bitstring, count]) => ({
    bitstring,
    count,
    frac: max === 0 ? 0 : count / max,
  }));
}

export function renderHistogram(artifact: ResultsArtifact): string {
  const bars = histogramBars(countBitstrings(artifact.measurements));
  const total = bars.reduce((acc, b) => acc + b.count, 0);
  const body = bars
    .map(
      (b) => `<div class="hist-col">
        <div class="hist-bar" data-count="${b.count}" style="height:${(b.frac * 100).toFixed(2)}%"
             title="${escapeHtml(b.bitstring)}: ${b.count}/${total}"></div>
        <span class="hist-tick">${escapeHtml(b.bitstring)}</span>
      </div>`,
    )
    .join("");
  return `<div class="histogram" data-total="${total}">${body}</div>`;
}
