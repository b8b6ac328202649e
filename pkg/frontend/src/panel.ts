/** Project panel: used/remaining budget and membership, all fetched. */

import { escapeHtml } from "./calendar.js";
import { formatDuration } from "./time.js";
import type { ProjectWire } from "./types.js";

export interface PanelModel {
  projectId: string;
  name: string;
  budgetMs: number;
  usedMs: number;
  /** as reported by the backend, never recomputed here */
  remainingMs: number;
  exhausted: boolean;
  members: string[];
  admins: string[];
}

export function projectPanelModel(project: ProjectWire): PanelModel {
  return {
    projectId: project.project_id,
    name: project.name,
    budgetMs: project.budget_ms,
    usedMs: project.consumed_ms,
    remainingMs: project.remaining_ms,
    exhausted: project.remaining_ms <= 0,
    members: project.member_ids,
    admins: project.admin_ids,
  };
}

export function renderProjectPanel(model: PanelModel): string {
  const usedFrac = model.budgetMs === 0 ? 1 : model.usedMs / model.budgetMs;
  const badge = model.exhausted ? `<span class="badge badge-exhausted">exhausted</span>` : "";
  const members = model.members
    .map((m) => {
      const role = model.admins.includes(m) ? " (PI)" : "";
      return `<li>${escapeHtml(m)}${role}</li>`;
    })
    .join("");
  return `<section class="project-panel" data-project="${escapeHtml(model.projectId)}">
    <h2>${escapeHtml(model.name)} ${badge}</h2>
    <div class="budget-bar"><div class="budget-used" style="width:${(usedFrac * 100).toFixed(2)}%"></div></div>
    <dl>
      <dt>Budget</dt><dd data-field="budget">${model.budgetMs} ms (${formatDuration(model.budgetMs)})</dd>
      <dt>Used</dt><dd data-field="used">${model.usedMs} ms</dd>
      <dt>Remaining</dt><dd data-field="remaining">${model.remainingMs} ms</dd>
    </dl>
    <h3>Members</h3><ul class="members">${members}</ul>
  </section>`;
}
