/** Time helpers: the API speaks ISO-8601 UTC with millisecond precision. */

export const MINUTE_MS = 60_000;
export const QUARTER_HOUR_MS = 15 * MINUTE_MS;
export const DAY_MS = 24 * 60 * MINUTE_MS;

export function isoToMs(value: string): number {
  const ms = Date.parse(value);
  if (Number.isNaN(ms)) {
    throw new Error(`not an ISO-8601 timestamp: ${value}`);
  }
  return ms;
}

export function msToIso(ms: number): string {
  return new Date(ms).toISOString().replace("Z", "+00:00");
}

/** Calendar inputs snap to the 15-minute grid (round to nearest). */
export function snapToQuarterHour(ms: number): number {
  return Math.round(ms / QUARTER_HOUR_MS) * QUARTER_HOUR_MS;
}

/** Display format: UTC wall time, e.g. "Tue 14:30". */
export function formatUtc(ms: number): string {
  const d = new Date(ms);
  const days = ["Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"];
  const hh = String(d.getUTCHours()).padStart(2, "0");
  const mm = String(d.getUTCMinutes()).padStart(2, "0");
  return `${days[d.getUTCDay()]} ${hh}:${mm}`;
}

/** Tooltip body: UTC primary with the viewer's local time alongside. */
export function utcWithLocalTooltip(ms: number): string {
  const d = new Date(ms);
  return `${d.toISOString()} (local: ${d.toLocaleString()})`;
}

export function formatDuration(ms: number): string {
  if (ms < MINUTE_MS) return `${(ms / 1000).toFixed(ms % 1000 ? 1 : 0)} s`;
  const minutes = Math.floor(ms / MINUTE_MS);
  const hours = Math.floor(minutes / 60);
  if (hours === 0) return `${minutes} min`;
  return `${hours} h ${String(minutes % 60).padStart(2, "0")} min`;
}
