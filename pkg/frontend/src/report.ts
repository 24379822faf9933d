/** Report view model: checks a fetched report renders completely. */

import type { ReportDocument } from "./types.js";

export interface ReportView {
  incidentId: string;
  createdAt: string;
  summary: string;
  causes: { label: string; percent: string; narrative: string }[];
  measures: { title: string; level: string; score: string; detail: string }[];
  modelVersion: string;
  kbVersion: string;
}

export function toReportView(doc: ReportDocument): ReportView {
  return {
    incidentId: doc.incident_id,
    createdAt: doc.created_at,
    summary: doc.management_summary,
    causes: doc.probable_causes.map((c) => ({
      label: c.class,
      percent: `${(c.probability * 100).toFixed(2)}%`,
      narrative: c.narrative,
    })),
    measures: doc.recommendations.map((r) => ({
      title: r.entry.title,
      level: r.entry.level,
      score: r.score.toFixed(4),
      detail: r.entry.detail,
    })),
    modelVersion: doc.model_version,
    kbVersion: doc.kb_version,
  };
}

/** True when every probability and measure field carries content. */
export function reportComplete(view: ReportView): boolean {
  if (!view.incidentId || !view.summary) return false;
  if (view.causes.length === 0 || view.measures.length === 0) return false;
  const causesOk = view.causes.every(
    (c) => c.label.length > 0 && /^\d+\.\d{2}%$/.test(c.percent) && c.narrative.length > 0,
  );
  const measuresOk = view.measures.every(
    (m) => m.title.length > 0 && m.level.length > 0 && m.detail.length > 0 && m.score.length > 0,
  );
  return causesOk && measuresOk;
}
