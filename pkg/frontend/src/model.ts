/** View models: pure field mappings from API payloads to what the DOM
 * shows. No number is invented here; everything traces to an API field. */

import type { ClassName, IncidentDetail, IncidentSummary, Suggestion } from "./types.js";

export const CLASS_LABELS: Record<ClassName, string> = {
  normal_traffic: "Normal traffic",
  service_incident: "Service incident",
  dos_attack: "DoS attack",
};

export const CLASS_ORDER: ClassName[] = [
  "normal_traffic",
  "service_incident",
  "dos_attack",
];

export interface ProbabilityRow {
  className: ClassName;
  label: string;
  value: number;     // verbatim API probability
  percent: string;   // rendered form of the same field
}

export interface IncidentView {
  id: string;
  createdAt: string;
  status: string;
  flowIndex: number;
  predicted: ClassName;
  predictedLabel: string;
  topRisk: number;
  rows: ProbabilityRow[];
  ratedScores: Record<string, number>; // recommendation_id -> last stored score
}

export interface SuggestionView {
  id: string;
  title: string;
  detail: string;
  level: string;
  score: string;      // rendered rank score
  rawScore: number;
  feedback: string;   // rendered running mean
}

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(2)}%`;
}

export function probabilityRows(summary: IncidentSummary): ProbabilityRow[] {
  return CLASS_ORDER.map((className) => ({
    className,
    label: CLASS_LABELS[className],
    value: summary.distribution.probs[className],
    percent: formatPercent(summary.distribution.probs[className]),
  }));
}

/** Probabilities must add up within rendering tolerance. */
export function probabilitiesComplete(rows: ProbabilityRow[]): boolean {
  const sum = rows.reduce((acc, row) => acc + row.value, 0);
  return Math.abs(sum - 1) < 1e-6;
}

export function toIncidentView(summary: IncidentSummary): IncidentView {
  const ratedScores: Record<string, number> = {};
  for (const rating of summary.ratings) {
    ratedScores[rating.recommendation_id] = rating.score;
  }
  return {
    id: summary.incident_id,
    createdAt: summary.created_at,
    status: summary.status,
    flowIndex: summary.flow_index,
    predicted: summary.distribution.predicted,
    predictedLabel: CLASS_LABELS[summary.distribution.predicted],
    topRisk: summary.top_risk,
    rows: probabilityRows(summary),
    ratedScores,
  };
}

export function toSuggestionViews(detail: IncidentDetail): SuggestionView[] {
  return detail.suggestions.map((s: Suggestion) => ({
    id: s.recommendation_id,
    title: s.title,
    detail: s.detail,
    level: s.level,
    score: s.score.toFixed(4),
    rawScore: s.score,
    feedback: s.feedback_score.toFixed(2),
  }));
}
