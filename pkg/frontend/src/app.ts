/** SPA shell: login, calendar, jobs table, project panel, 10 s polling. */

import { ApiClient, ApiError } from "./api.js";
import { canCreateReservations, decodeClaims, type DisplayClaims } from "./auth.js";
import { buildCalendarView, escapeHtml, renderCalendar } from "./calendar.js";
import { renderHistogram } from "./histogram.js";
import { jobsTableModel, renderJobsTable } from "./jobs.js";
import { projectPanelModel, renderProjectPanel } from "./panel.js";
import { DAY_MS, msToIso, snapToQuarterHour } from "./time.js";
import type { DashboardConfig, ProjectWire, ResultsArtifact } from "./types.js";

const POLL_INTERVAL_MS = 10_000;

interface AppState {
  api: ApiClient;
  claims: DisplayClaims | null;
  projects: ProjectWire[];
  selectedProject: string | null;
  jobsPage: number;
  error: string | null;
}

export async function loadConfig(): Promise<DashboardConfig> {
  const resp = await fetch("./config.json");
  if (!resp.ok) throw new Error(`cannot load config.json (${resp.status})`);
  return (await resp.json()) as DashboardConfig;
}

export function mount(root: HTMLElement, config: DashboardConfig): void {
  const state: AppState = {
    api: new ApiClient(config),
    claims: null,
    projects: [],
    selectedProject: null,
    jobsPage: 0,
    error: null,
  };
  renderLogin(root, state);
}

function renderLogin(root: HTMLElement, state: AppState): void {
  root.innerHTML = `<div class="login">
    <h1>QPU dashboard</h1>
    ${state.error ? `<p class="error">${escapeHtml(state.error)}</p>` : ""}
    <form id="login-form">
      <input name="username" placeholder="username" autocomplete="username" required>
      <input name="password" type="password" placeholder="password" required>
      <button type="submit">Sign in</button>
    </form>
  </div>`;
  const form = root.querySelector<HTMLFormElement>("#login-form")!;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    try {
      const pair = await state.api.login(
        String(data.get("username")),
        String(data.get("password")),
      );
      state.claims = decodeClaims(pair.access_token);
      state.error = null;
      await refresh(root, state);
      setInterval(() => void refresh(root, state), POLL_INTERVAL_MS);
    } catch (err) {
      state.error = err instanceof ApiError ? `${err.code}` : String(err);
      renderLogin(root, state);
    }
  });
}

async function refresh(root: HTMLElement, state: AppState): Promise<void> {
  try {
    state.projects = await state.api.listProjects();
    if (!state.selectedProject && state.projects.length) {
      state.selectedProject = state.projects[0]!.project_id;
    }
    await renderMain(root, state);
  } catch (err) {
    state.error = err instanceof ApiError ? err.message : String(err);
    root.querySelector(".error-banner")?.replaceChildren(state.error);
  }
}

async function renderMain(root: HTMLElement, state: AppState): Promise<void> {
  const now = Date.now();
  const weekStart = now - (now % DAY_MS) - DAY_MS;
  const weekEnd = weekStart + 8 * DAY_MS;
  const [slots, reservations] = await Promise.all([
    state.api.listSlots(msToIso(weekStart), msToIso(weekEnd)),
    state.api.listReservations(msToIso(weekStart), msToIso(weekEnd)),
  ]);
  const projectOrg: Record<string, string> = {};
  for (const project of state.projects) projectOrg[project.project_id] = project.org_id;
  const calendar = renderCalendar(
    buildCalendarView(weekStart, weekEnd, slots, reservations, projectOrg),
  );

  const project = state.selectedProject
    ? await state.api.getProject(state.selectedProject)
    : null;
  const panel = project ? renderProjectPanel(projectPanelModel(project)) : "";
  const jobs = state.selectedProject
    ? renderJobsTable(
        jobsTableModel(await state.api.listJobs(state.selectedProject), state.jobsPage),
      )
    : "";

  const roles = state.claims?.roles ?? [];
  const reservationForm = canCreateReservations(roles)
    ? `<form id="reservation-form" class="reservation-form">
        <input name="start" type="datetime-local" required>
        <input name="end" type="datetime-local" required>
        <button type="submit">Reserve for ${escapeHtml(state.selectedProject ?? "")}</button>
      </form>`
    : `<p class="muted">Reservations are managed by your project's PI.</p>`;

  const options = state.projects
    .map(
      (p) =>
        `<option value="${escapeHtml(p.project_id)}" ${
          p.project_id === state.selectedProject ? "selected" : ""
        }>${escapeHtml(p.name)}</option>`,
    )
    .join("");

  root.innerHTML = `<header>
      <h1>QPU dashboard</h1>
      <span>${escapeHtml(state.claims?.username ?? "")} [${roles.map(escapeHtml).join(", ")}]</span>
      <select id="project-select">${options}</select>
    </header>
    <p class="error-banner">${state.error ? escapeHtml(state.error) : ""}</p>
    <main>
      <section><h2>Slots and reservations</h2>${calendar}${reservationForm}</section>
      ${panel}
      <section><h2>Jobs</h2>${jobs}<div id="histogram-host"></div></section>
    </main>`;
  state.error = null;
  wireEvents(root, state);
}

function wireEvents(root: HTMLElement, state: AppState): void {
  root.querySelector<HTMLSelectElement>("#project-select")?.addEventListener("change", (e) => {
    state.selectedProject = (e.target as HTMLSelectElement).value;
    state.jobsPage = 0;
    void refresh(root, state);
  });

  root.querySelectorAll<HTMLButtonElement>(".pager button").forEach((button) =>
    button.addEventListener("click", () => {
      state.jobsPage = Number(button.dataset.page);
      void refresh(root, state);
    }),
  );

  root.querySelectorAll<HTMLAnchorElement>(".result-link").forEach((link) =>
    link.addEventListener("click", async (event) => {
      event.preventDefault();
      const listing = await state.api.fetchArtifact<{ artifacts: Record<string, string> }>(
        link.href,
      );
      const resultsUrl = listing.artifacts["results"];
      if (!resultsUrl) return;
      const artifact = await state.api.fetchArtifact<ResultsArtifact>(resultsUrl);
      const host = root.querySelector("#histogram-host");
      if (host) {
        host.innerHTML =
          `<h3>Measurements of ${escapeHtml(link.dataset.job ?? "")}</h3>` +
          renderHistogram(artifact);
      }
    }),
  );

  const form = root.querySelector<HTMLFormElement>("#reservation-form");
  form?.addEventListener("submit", async (event) => {
    event.preventDefault();
    if (!state.selectedProject) return;
    const data = new FormData(form);
    const start = snapToQuarterHour(Date.parse(String(data.get("start"))));
    const end = snapToQuarterHour(Date.parse(String(data.get("end"))));
    try {
      await state.api.createReservation(state.selectedProject, msToIso(start), msToIso(end));
      await refresh(root, state); // calendar and budget refresh on success
    } catch (err) {
      // surface the accounting reason verbatim (Overlap, OutsideSlot, ...)
      state.error = err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err);
      await renderMain(root, state);
    }
  });
}
