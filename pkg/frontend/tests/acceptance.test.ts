/**
 * Dashboard acceptance against the seeded fixture generated by the
 * backend stack (scripts/generate_dashboard_fixture.py in the parent
 * package). The same file is asserted on from the Python side, so the
 * numbers shown here are provably the backend's numbers.
 */

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { buildCalendarView } from "../src/calendar.js";
import { countBitstrings, histogramBars } from "../src/histogram.js";
import { jobsTableModel } from "../src/jobs.js";
import { projectPanelModel } from "../src/panel.js";
import type {
  DashboardConfig,
  JobWire,
  ProjectWire,
  ReportWire,
  ReservationWire,
  ResultsArtifact,
  SlotWire,
} from "../src/types.js";

import world from "./fixtures/world.json";

const fixture = world as unknown as {
  config: DashboardConfig;
  project: ProjectWire;
  zero_budget_project: ProjectWire;
  slots: SlotWire[];
  reservations: ReservationWire[];
  jobs: JobWire[];
  report: ReportWire;
  results_job_id: string;
  results_artifact: ResultsArtifact;
  calendar_range: { start: number; end: number };
};

describe("calendar against the seeded fixture", () => {
  it("renders every reservation inside a slot of the owning org", () => {
    const projectOrg = {
      [fixture.project.project_id]: fixture.project.org_id,
      [fixture.zero_budget_project.project_id]: fixture.zero_budget_project.org_id,
    };
    const view = buildCalendarView(
      fixture.calendar_range.start,
      fixture.calendar_range.end,
      fixture.slots,
      fixture.reservations,
      projectOrg,
    );
    expect(view.conflicts).toHaveLength(0);
    const placed = view.days
      .flatMap((d) => d.windows)
      .filter((w) => w.kind === "reservation");
    expect(placed.length).toBeGreaterThanOrEqual(fixture.reservations.length);
    for (const window of placed) {
      expect(window.withinSlot).toBe(true);
      const host = view.days
        .flatMap((d) => d.windows)
        .find((w) => w.kind === "slot" && w.id === window.slotId)!;
      expect(host.owner).toBe(projectOrg[window.owner]);
      // geometry: visually inside the slot band
      const sameDayHost = view.days
        .find((d) => d.windows.includes(window))!
        .windows.find((w) => w.kind === "slot" && w.id === window.slotId)!;
      expect(window.startFrac).toBeGreaterThanOrEqual(sameDayHost.startFrac);
      expect(window.endFrac).toBeLessThanOrEqual(sameDayHost.endFrac);
    }
    // both organisations own slots, so both colour bands appear
    expect(Object.keys(view.orgColor)).toHaveLength(2);
  });
});

describe("reservation conflicts surface the backend reason verbatim", () => {
  it("shows exactly the accounting error code for an overlap", async () => {
    // mock transport answering like the accounting backend does on overlap
    const api = new ApiClient(fixture.config, async () =>
      new Response(
        JSON.stringify({ error: "Overlap", detail: "overlaps reservation rsv-live" }),
        { status: 409, headers: { "Content-Type": "application/json" } },
      ),
    );
    const existing = fixture.reservations[0]!;
    const err = (await api
      .createReservation(fixture.project.project_id, existing.start, existing.end)
      .catch((e: unknown) => e)) as ApiError;
    expect(err.code).toBe("Overlap");
    expect(`${err.code}: ${err.detail}`).toBe("Overlap: overlaps reservation rsv-live");
  });
});

describe("project panel against the CLI report", () => {
  it("shows remaining budget equal to the report to the millisecond", () => {
    const model = projectPanelModel(fixture.project);
    // the CLI's report --json is exactly the backend /reports payload
    const billed = fixture.report.total_qpu_ms + fixture.report.reservation_ms;
    expect(model.remainingMs).toBe(model.budgetMs - billed);
    expect(model.usedMs).toBe(billed);
  });

  it("flags the drained project as exhausted", () => {
    const model = projectPanelModel(fixture.zero_budget_project);
    expect(model.remainingMs).toBe(0);
    expect(model.exhausted).toBe(true);
  });
});

describe("jobs table against the fixture", () => {
  it("links every ready job to its artifact URL and spins on pending", () => {
    const model = jobsTableModel(fixture.jobs);
    const ready = model.rows.filter((r) => r.status === "ready");
    const pending = model.rows.filter((r) => r.status === "pending");
    expect(ready.length).toBeGreaterThan(0);
    expect(pending.length).toBeGreaterThan(0);
    for (const row of ready) {
      expect(row.resultUrl).toMatch(new RegExp(`/store/jobs/${row.jobId}/$`));
      expect(row.spinner).toBe(false);
    }
    for (const row of pending) {
      expect(row.spinner).toBe(true);
      expect(row.resultUrl).toBeNull();
    }
  });

  it("histogram bar counts equal an independent recount of the artifact", () => {
    const bars = histogramBars(countBitstrings(fixture.results_artifact.measurements));
    // independent recount: flatten and tally with a different traversal
    const recount = new Map<string, number>();
    for (const bits of fixture.results_artifact.measurements.flat()) {
      recount.set(bits, (recount.get(bits) ?? 0) + 1);
    }
    expect(bars.length).toBe(recount.size);
    for (const bar of bars) {
      expect(bar.count).toBe(recount.get(bar.bitstring));
    }
    const total = bars.reduce((acc, b) => acc + b.count, 0);
    const job = fixture.jobs.find((j) => j.job_id === fixture.results_job_id)!;
    expect(total).toBe(job.num_circuits * job.shots);
  });
});
