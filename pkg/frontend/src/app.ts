/** DOM wiring for the analyst console. All data shown comes from view
 * models over API payloads; this file only renders and routes events. */

import { ApiClient, ApiError } from "./api.js";
import {
  IncidentView,
  SuggestionView,
  probabilitiesComplete,
  toIncidentView,
  toSuggestionViews,
} from "./model.js";
import { sortQueue } from "./queue.js";
import { RatingController, validScore } from "./rating.js";
import type { IncidentDetail, IncidentSummary, TrainStatus } from "./types.js";

const POLL_INTERVAL_MS = 2000;

const api = new ApiClient("");
const controllers = new Map<string, RatingController>();

let selectedId: string | null = null;
let lastIncidents: IncidentSummary[] = [];
let degraded = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderBanner(): void {
  el("banner").style.display = degraded ? "block" : "none";
}

function probabilityBars(view: IncidentView): string {
  return view.rows
    .map(
      (row) => `
      <div class="prob-row">
        <span class="prob-label">${escapeHtml(row.label)}</span>
        <div class="prob-bar"><div class="prob-fill ${row.className}"
             style="width:${Math.round(row.value * 100)}%"></div></div>
        <span class="prob-value">${row.percent}</span>
      </div>`,
    )
    .join("");
}

function renderQueue(): void {
  const container = el("queue");
  if (lastIncidents.length === 0) {
    container.innerHTML = `<p class="empty">No incidents yet. Upload a flow CSV via POST /api/flows.</p>`;
    return;
  }
  const ordered = sortQueue(lastIncidents);
  container.innerHTML = ordered
    .map((incident) => {
      const view = toIncidentView(incident);
      const warn = probabilitiesComplete(view.rows) ? "" : " ⚠";
      const selected = view.id === selectedId ? " selected" : "";
      return `
        <button class="incident-card ${view.predicted}${selected}" data-incident="${view.id}">
          <span class="incident-id">${view.id}${warn}</span>
          <span class="incident-class">${escapeHtml(view.predictedLabel)}</span>
          <span class="incident-risk">risk ${(view.topRisk * 100).toFixed(1)}%</span>
          <span class="incident-status">${view.status}</span>
        </button>`;
    })
    .join("");
  for (const button of container.querySelectorAll<HTMLButtonElement>("[data-incident]")) {
    button.addEventListener("click", () => selectIncident(button.dataset.incident!));
  }
}

function ratingButtons(suggestion: SuggestionView, stored?: number): string {
  const buttons = [1, 2, 3, 4, 5]
    .map(
      (score) => `
      <button class="rate-btn${stored === score ? " rated" : ""}"
              data-rec="${suggestion.id}" data-score="${score}">${score}</button>`,
    )
    .join("");
  const status = stored ? `<span class="rated-note">rated ${stored}/5</span>` : "";
  return `<span class="rating">${buttons}${status}</span>`;
}

function renderDetail(detail: IncidentDetail): void {
  const view = toIncidentView(detail);
  const suggestions = toSuggestionViews(detail);
  el("detail").innerHTML = `
    <h2>${view.id} <span class="status-chip">${view.status}</span></h2>
    <p class="meta">flow ${view.flowIndex} &middot; created ${escapeHtml(view.createdAt)}
       &middot; model ${escapeHtml(detail.model_version.slice(0, 12))}</p>
    <section class="probs">${probabilityBars(view)}</section>
    <h3>Recommended measures</h3>
    <ol class="suggestions">
      ${suggestions
        .map(
          (s) => `
        <li>
          <div class="sg-head"><strong>${escapeHtml(s.title)}</strong>
            <span class="sg-level">${escapeHtml(s.level)}</span>
            <span class="sg-score">rank ${s.score}</span>
            <span class="sg-feedback">feedback ${s.feedback}</span></div>
          <p>${escapeHtml(s.detail)}</p>
          ${ratingButtons(s, view.ratedScores[s.id])}
        </li>`,
        )
        .join("")}
    </ol>
    <div class="detail-actions">
      <button id="show-report">View report</button>
      <a href="${api.reportHtmlUrl(view.id)}" target="_blank" rel="noopener">Open report in tab</a>
    </div>
    <div id="report-pane" style="display:none">
      <button id="print-report">Print</button>
      <iframe id="report-frame" title="incident report"></iframe>
    </div>`;

  for (const button of el("detail").querySelectorAll<HTMLButtonElement>(".rate-btn")) {
    button.addEventListener("click", () => {
      const rec = button.dataset.rec!;
      const score = Number(button.dataset.score);
      void submitRating(detail, rec, score);
    });
  }
  el<HTMLButtonElement>("show-report").addEventListener("click", () => {
    const pane = el("report-pane");
    const frame = el<HTMLIFrameElement>("report-frame");
    if (!frame.src) frame.src = api.reportHtmlUrl(view.id);
    pane.style.display = pane.style.display === "none" ? "block" : "none";
  });
  el<HTMLButtonElement>("print-report").addEventListener("click", () => {
    el<HTMLIFrameElement>("report-frame").contentWindow?.print();
  });
}

async function submitRating(detail: IncidentDetail, rec: string, score: number): Promise<void> {
  if (!validScore(score)) return; // blocked client-side, no request
  const key = `${detail.incident_id}:${rec}`;
  let controller = controllers.get(key);
  if (!controller) {
    controller = new RatingController((s, timestamp) =>
      api.rate(detail.incident_id, rec, s, timestamp),
    );
    controllers.set(key, controller);
  }
  const state = await controller.rate(score);
  if (state.kind === "stored") {
    await refreshTraining();
    await selectIncident(detail.incident_id);
  } else if (state.kind === "error") {
    showInlineError(state.message);
  }
}

function showInlineError(message: string): void {
  const node = el("inline-error");
  node.textContent = message;
  node.style.display = "block";
  setTimeout(() => (node.style.display = "none"), 4000);
}

async function selectIncident(id: string): Promise<void> {
  selectedId = id;
  try {
    const detail = await api.getIncident(id);
    renderDetail(detail);
    renderQueue();
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      el("detail").innerHTML = `<p class="empty">Incident ${escapeHtml(id)} not found.</p>`;
    } else {
      showInlineError(String(error));
    }
  }
}

function renderTraining(status: TrainStatus): void {
  const button = el<HTMLButtonElement>("retrain");
  button.disabled = status.running;
  button.textContent = status.running
    ? "Training…"
    : `Retrain (${status.pending_feedback} pending rating${status.pending_feedback === 1 ? "" : "s"})`;
  const label = el("train-info");
  if (status.last_error) {
    label.textContent = `last training failed: ${status.last_error}`;
  } else if (status.last_report) {
    label.textContent =
      `last run: ${status.last_report.mode}, ${status.last_report.epochs} epochs, ` +
      `accuracy ${(status.last_report.final_accuracy * 100).toFixed(1)}% ` +
      `on ${status.last_report.samples} samples`;
  } else {
    label.textContent = "model not retrained in this session yet";
  }
}

async function refreshTraining(): Promise<void> {
  try {
    renderTraining(await api.trainStatus());
  } catch {
    /* banner covers it */
  }
}

let polling = false;
async function poll(): Promise<void> {
  if (polling) return;
  polling = true;
  try {
    const [list, status] = await Promise.all([api.listIncidents(), api.trainStatus()]);
    degraded = false;
    lastIncidents = list.incidents;
    renderQueue();
    renderTraining(status);
  } catch {
    degraded = true;
  } finally {
    renderBanner();
    polling = false;
  }
}

export function start(): void {
  el<HTMLButtonElement>("retrain").addEventListener("click", async () => {
    try {
      await api.startTraining();
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        showInlineError("a training job is already running");
      } else {
        showInlineError(String(error));
      }
    }
    await refreshTraining();
  });
  void poll();
  setInterval(() => void poll(), POLL_INTERVAL_MS);
}

start();
