/** Calendar layout: pre-allocated slots as day bands, reservations nested.
 *
 * Layout is computed as day-relative fractions so rendering is a direct
 * translation to percentages. A reservation is only drawn nested inside a
 * slot when its window truly lies within a slot of the owning project's
 * organisation, mirroring the backend invariant; anything else is kept
 * out of the bands and flagged as a conflict.
 */

import { DAY_MS, formatUtc, isoToMs, utcWithLocalTooltip } from "./time.js";
import type { ReservationWire, SlotWire } from "./types.js";

export interface DayWindow {
  kind: "slot" | "reservation";
  id: string;
  /** org for slots, project for reservations */
  owner: string;
  startMs: number;
  endMs: number;
  /** fraction of the day row, in [0, 1] */
  startFrac: number;
  endFrac: number;
  /** reservations only: the slot they nest inside */
  slotId?: string;
  withinSlot?: boolean;
  label: string;
  tooltip: string;
}

export interface CalendarDay {
  dayStartMs: number;
  windows: DayWindow[];
}

export interface CalendarView {
  rangeStartMs: number;
  rangeEndMs: number;
  days: CalendarDay[];
  /** stable colour band index per organisation */
  orgColor: Record<string, number>;
  conflicts: DayWindow[];
}

export function buildCalendarView(
  rangeStartMs: number,
  rangeEndMs: number,
  slots: SlotWire[],
  reservations: ReservationWire[],
  projectOrg: Record<string, string>,
): CalendarView {
  const dayCount = Math.max(0, Math.ceil((rangeEndMs - rangeStartMs) / DAY_MS));
  const days: CalendarDay[] = [];
  for (let i = 0; i < dayCount; i++) {
    days.push({ dayStartMs: rangeStartMs + i * DAY_MS, windows: [] });
  }

  const orgColor: Record<string, number> = {};
  for (const slot of [...slots].sort((a, b) => a.org_id.localeCompare(b.org_id))) {
    if (!(slot.org_id in orgColor)) {
      orgColor[slot.org_id] = Object.keys(orgColor).length;
    }
  }

  const parsedSlots = slots.map((s) => ({
    wire: s,
    startMs: isoToMs(s.start),
    endMs: isoToMs(s.end),
  }));

  for (const slot of parsedSlots) {
    placeWindows(days, {
      kind: "slot",
      id: slot.wire.slot_id,
      owner: slot.wire.org_id,
      startMs: slot.startMs,
      endMs: slot.endMs,
      startFrac: 0,
      endFrac: 0,
      label: slot.wire.org_id,
      tooltip: `${slot.wire.org_id}: ${utcWithLocalTooltip(slot.startMs)}`,
    });
  }

  const conflicts: DayWindow[] = [];
  for (const rsv of reservations) {
    const startMs = isoToMs(rsv.start);
    const endMs = isoToMs(rsv.end);
    const owningOrg = projectOrg[rsv.project_id];
    const host = parsedSlots.find(
      (s) =>
        s.startMs <= startMs &&
        endMs <= s.endMs &&
        (owningOrg === undefined || s.wire.org_id === owningOrg),
    );
    const window: DayWindow = {
      kind: "reservation",
      id: rsv.reservation_id,
      owner: rsv.project_id,
      startMs,
      endMs,
      startFrac: 0,
      endFrac: 0,
      slotId: host?.wire.slot_id,
      withinSlot: host !== undefined,
      label: rsv.project_id,
      tooltip: `${rsv.project_id}: ${utcWithLocalTooltip(startMs)}`,
    };
    if (host === undefined) {
      conflicts.push(window);
      continue;
    }
    placeWindows(days, window);
  }

  for (const day of days) {
    day.windows.sort((a, b) => a.startMs - b.startMs || (a.kind === "slot" ? -1 : 1));
  }
  return { rangeStartMs, rangeEndMs, days, orgColor, conflicts };
}

/** Split a window across the day rows it touches, clipping to the range. */
function placeWindows(days: CalendarDay[], window: DayWindow): void {
  for (const day of days) {
    const dayEnd = day.dayStartMs + DAY_MS;
    const start = Math.max(window.startMs, day.dayStartMs);
    const end = Math.min(window.endMs, dayEnd);
    if (start >= end) continue;
    day.windows.push({
      ...window,
      startFrac: (start - day.dayStartMs) / DAY_MS,
      endFrac: (end - day.dayStartMs) / DAY_MS,
    });
  }
}

const PALETTE = ["band-a", "band-b", "band-c", "band-d", "band-e"];

export function renderCalendar(view: CalendarView): string {
  const rows = view.days
    .map((day) => {
      const slots = day.windows.filter((w) => w.kind === "slot");
      const reservations = day.windows.filter((w) => w.kind === "reservation");
      const slotHtml = slots
        .map((w) => {
          const color = PALETTE[(view.orgColor[w.owner] ?? 0) % PALETTE.length];
          const nested = reservations
            .filter((r) => r.slotId === w.id)
            .map((r) => block(r, "reservation", w))
            .join("");
          return `<div class="slot ${color}" title="${escapeHtml(w.tooltip)}"
            style="left:${pct(w.startFrac)};width:${pct(w.endFrac - w.startFrac)}">
            <span class="slot-label">${escapeHtml(w.label)}</span>${nested}</div>`;
        })
        .join("");
      return `<div class="calendar-row" data-day="${day.dayStartMs}">
        <span class="day-label">${formatUtc(day.dayStartMs).slice(0, 3)}</span>
        <div class="day-track">${slotHtml}</div></div>`;
    })
    .join("");
  const legend = Object.entries(view.orgColor)
    .map(
      ([org, idx]) =>
        `<span class="legend-item ${PALETTE[idx % PALETTE.length]}">${escapeHtml(org)}</span>`,
    )
    .join("");
  return `<div class="calendar">${rows}</div><div class="legend">${legend}</div>`;
}

/** Geometry of a nested block relative to its host slot. */
function block(r: DayWindow, cls: string, host: DayWindow): string {
  const span = host.endFrac - host.startFrac;
  const left = (r.startFrac - host.startFrac) / span;
  const width = (r.endFrac - r.startFrac) / span;
  return `<div class="${cls}" data-id="${escapeHtml(r.id)}" title="${escapeHtml(r.tooltip)}"
    style="left:${pct(left)};width:${pct(width)}">${escapeHtml(r.label)}</div>`;
}

function pct(frac: number): string {
  return `${(frac * 100).toFixed(3)}%`;
}

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
