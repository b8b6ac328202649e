/** Jobs table: status, shots, QPU time, result links, pagination. */

import { escapeHtml } from "./calendar.js";
import type { JobWire } from "./types.js";

export const PAGE_SIZE = 25;

export interface JobRowModel {
  jobId: string;
  userId: string;
  status: JobWire["status"];
  /** non-terminal rows render a spinner instead of a result link */
  spinner: boolean;
  shotsLabel: string;
  qpuTimeMs: number | null;
  resultUrl: string | null;
  submittedAt: string | null;
}

export interface JobsTableModel {
  rows: JobRowModel[];
  page: number;
  pageCount: number;
  total: number;
}

export function jobsTableModel(jobs: JobWire[], page = 0, pageSize = PAGE_SIZE): JobsTableModel {
  const pageCount = Math.max(1, Math.ceil(jobs.length / pageSize));
  const clamped = Math.min(Math.max(page, 0), pageCount - 1);
  const rows = jobs.slice(clamped * pageSize, (clamped + 1) * pageSize).map(toRow);
  return { rows, page: clamped, pageCount, total: jobs.length };
}

function toRow(job: JobWire): JobRowModel {
  return {
    jobId: job.job_id,
    userId: job.user_id,
    status: job.status,
    spinner: job.status === "pending",
    shotsLabel: `${job.num_circuits} x ${job.shots}`,
    qpuTimeMs: job.qpu_time_ms,
    resultUrl: job.result_url,
    submittedAt: job.submitted_at,
  };
}

export function renderJobsTable(model: JobsTableModel): string {
  const body = model.rows
    .map((row) => {
      const status = row.spinner
        ? `<span class="spinner" aria-label="pending"></span> ${row.status}`
        : row.status;
      const result = row.resultUrl
        ? `<a class="result-link" href="${escapeHtml(row.resultUrl)}" data-job="${escapeHtml(row.jobId)}">results</a>`
        : "";
      return `<tr data-job="${escapeHtml(row.jobId)}" data-status="${row.status}">
        <td>${escapeHtml(row.jobId)}</td>
        <td>${escapeHtml(row.userId)}</td>
        <td>${status}</td>
        <td>${escapeHtml(row.shotsLabel)}</td>
        <td>${row.qpuTimeMs ?? ""}</td>
        <td>${result}</td>
      </tr>`;
    })
    .join("");
  const pager =
    model.pageCount > 1
      ? `<div class="pager">page ${model.page + 1} / ${model.pageCount}
          <button data-page="${model.page - 1}" ${model.page === 0 ? "disabled" : ""}>prev</button>
          <button data-page="${model.page + 1}" ${model.page + 1 >= model.pageCount ? "disabled" : ""}>next</button>
        </div>`
      : "";
  return `<table class="jobs">
    <thead><tr><th>job</th><th>user</th><th>status</th><th>circuits x shots</th><th>QPU ms</th><th>result</th></tr></thead>
    <tbody>${body}</tbody>
  </table>${pager}`;
}
