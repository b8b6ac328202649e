import { describe, expect, it } from "vitest";

import { projectPanelModel, renderProjectPanel } from "../src/panel.js";
import type { ProjectWire } from "../src/types.js";

function project(overrides: Partial<ProjectWire> = {}): ProjectWire {
  return {
    project_id: "proj-1",
    org_id: "org-1",
    name: "example",
    budget_ms: 1000,
    consumed_ms: 400,
    remaining_ms: 600,
    disabled: false,
    member_ids: ["u-a", "u-b"],
    admin_ids: ["u-a"],
    ...overrides,
  };
}

describe("project panel", () => {
  it("shows the fetched remaining budget, which is budget minus consumed", () => {
    const model = projectPanelModel(project());
    expect(model.remainingMs).toBe(600);
    expect(model.remainingMs).toBe(model.budgetMs - model.usedMs);
    const html = renderProjectPanel(model);
    expect(html).toContain('data-field="remaining">600 ms');
  });

  it("marks a project with zero remaining budget as exhausted", () => {
    const model = projectPanelModel(
      project({ budget_ms: 500, consumed_ms: 500, remaining_ms: 0 }),
    );
    expect(model.exhausted).toBe(true);
    expect(renderProjectPanel(model)).toContain("badge-exhausted");
  });

  it("lists members and tags PIs", () => {
    const html = renderProjectPanel(projectPanelModel(project()));
    expect(html).toContain("u-a (PI)");
    expect(html).toContain("<li>u-b</li>");
  });
});
