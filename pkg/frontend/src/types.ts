/** Wire types of the accounting REST API and authn endpoints. */

export interface DashboardConfig {
  /** Base URL of the accounting REST API (usually the gateway's /api prefix). */
  apiBaseUrl: string;
  /** Base URL of the token endpoints (usually the gateway's /auth prefix). */
  authUrl: string;
}

export interface SlotWire {
  slot_id: string;
  org_id: string;
  start: string; // ISO-8601 UTC
  end: string;
}

export interface ReservationWire {
  reservation_id: string;
  project_id: string;
  start: string;
  end: string;
  charged_ms: number;
}

export interface ProjectWire {
  project_id: string;
  org_id: string;
  name: string;
  budget_ms: number;
  consumed_ms: number;
  remaining_ms: number;
  disabled: boolean;
  member_ids: string[];
  admin_ids: string[];
}

export interface JobWire {
  job_id: string;
  user_id: string;
  project_id: string;
  submitted_at: string | null;
  completed_at: string | null;
  num_circuits: number;
  shots: number;
  status: "pending" | "ready" | "failed";
  qpu_time_ms: number | null;
  charge_budget: boolean;
  charged: boolean;
  charged_ms: number;
  result_url: string | null;
}

export interface ReportWire {
  scope: string;
  scope_id: string;
  period_start: number;
  period_end: number;
  job_count: number;
  total_qpu_ms: number;
  reservation_ms: number;
  per_user: Record<string, { job_count: number; qpu_ms: number }>;
}

export interface TokenResponse {
  access_token: string;
  refresh_token: string;
  expires_at: string;
  token_type: string;
}

/** The stored results artifact is the device's job view, archived verbatim. */
export interface ResultsArtifact {
  id: string;
  status: string;
  // per-circuit list of per-shot bitstrings
  measurements: string[][];
  qpu_time_ms?: number;
}
