/** Thin client of the accounting REST API and the token endpoints.
 *
 * The dashboard is a pure client: it never re-derives policy decisions,
 * it only displays what these endpoints return. Backend denial reasons
 * (e.g. Overlap, OutsideSlot, InsufficientBudget) surface verbatim in
 * ApiError.code so views can show them unmodified.
 */

import type {
  DashboardConfig,
  JobWire,
  ProjectWire,
  ReportWire,
  ReservationWire,
  SlotWire,
  TokenResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token: string | null = null;
  private refreshToken: string | null = null;

  constructor(
    private readonly config: DashboardConfig,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  get accessToken(): string | null {
    return this.token;
  }

  setToken(token: string): void {
    this.token = token;
  }

  async login(username: string, password: string): Promise<TokenResponse> {
    const resp = await this.fetchFn(`${this.config.authUrl}/token`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ username, password }),
    });
    const body = await parseBody(resp);
    if (!resp.ok) {
      throw toApiError(resp.status, body);
    }
    const pair = body as TokenResponse;
    this.token = pair.access_token;
    this.refreshToken = pair.refresh_token;
    return pair;
  }

  async refresh(): Promise<TokenResponse> {
    if (!this.refreshToken) throw new ApiError(401, "no_session", "log in first");
    const resp = await this.fetchFn(`${this.config.authUrl}/refresh`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ refresh_token: this.refreshToken }),
    });
    const body = await parseBody(resp);
    if (!resp.ok) throw toApiError(resp.status, body);
    const pair = body as TokenResponse;
    this.token = pair.access_token;
    this.refreshToken = pair.refresh_token;
    return pair;
  }

  private async request<T>(method: string, path: string, payload?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (payload !== undefined) headers["Content-Type"] = "application/json";
    const resp = await this.fetchFn(`${this.config.apiBaseUrl}${path}`, {
      method,
      headers,
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    const body = await parseBody(resp);
    if (!resp.ok) {
      throw toApiError(resp.status, body);
    }
    return body as T;
  }

  async listSlots(startIso?: string, endIso?: string): Promise<SlotWire[]> {
    const query = rangeQuery(startIso, endIso);
    const body = await this.request<{ slots: SlotWire[] }>("GET", `/slots${query}`);
    return body.slots;
  }

  async listReservations(startIso?: string, endIso?: string): Promise<ReservationWire[]> {
    const query = rangeQuery(startIso, endIso);
    const body = await this.request<{ reservations: ReservationWire[] }>(
      "GET",
      `/reservations${query}`,
    );
    return body.reservations;
  }

  async createReservation(
    projectId: string,
    startIso: string,
    endIso: string,
  ): Promise<ReservationWire> {
    return this.request<ReservationWire>("POST", "/reservations", {
      project_id: projectId,
      start: startIso,
      end: endIso,
    });
  }

  async cancelReservation(reservationId: string): Promise<void> {
    await this.request<null>("DELETE", `/reservations/${reservationId}`);
  }

  async listProjects(): Promise<ProjectWire[]> {
    const body = await this.request<{ projects: ProjectWire[] }>("GET", "/projects");
    return body.projects;
  }

  async getProject(projectId: string): Promise<ProjectWire> {
    return this.request<ProjectWire>("GET", `/projects/${projectId}`);
  }

  async listJobs(projectId: string, limit = 200, offset = 0): Promise<JobWire[]> {
    const query = `?project_id=${encodeURIComponent(projectId)}&limit=${limit}&offset=${offset}`;
    const body = await this.request<{ jobs: JobWire[] }>("GET", `/jobs${query}`);
    return body.jobs;
  }

  async report(scope: "org" | "project", id: string, startIso: string, endIso: string): Promise<ReportWire> {
    const query =
      `?scope=${scope}&id=${encodeURIComponent(id)}` +
      `&start=${encodeURIComponent(startIso)}&end=${encodeURIComponent(endIso)}`;
    return this.request<ReportWire>("GET", `/reports${query}`);
  }

  /** Result artifacts live on the store, addressed by absolute URL. */
  async fetchArtifact<T>(url: string): Promise<T> {
    const resp = await this.fetchFn(url);
    const body = await parseBody(resp);
    if (!resp.ok) throw toApiError(resp.status, body);
    return body as T;
  }
}

function rangeQuery(startIso?: string, endIso?: string): string {
  const params: string[] = [];
  if (startIso) params.push(`start=${encodeURIComponent(startIso)}`);
  if (endIso) params.push(`end=${encodeURIComponent(endIso)}`);
  return params.length ? `?${params.join("&")}` : "";
}

async function parseBody(resp: Response): Promise<unknown> {
  const text = await resp.text();
  if (!text) return null;
  try {
    return JSON.parse(text);
  } catch {
    return { error: "bad_response", detail: text.slice(0, 200) };
  }
}

function toApiError(status: number, body: unknown): ApiError {
  const record = (body ?? {}) as Record<string, unknown>;
  return new ApiError(
    status,
    String(record["error"] ?? status),
    String(record["detail"] ?? ""),
  );
}
