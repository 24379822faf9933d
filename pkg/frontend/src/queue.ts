/** Incident queue ordering: highest non-normal probability first. */

import type { IncidentSummary } from "./types.js";

export function riskOf(incident: IncidentSummary): number {
  const { service_incident, dos_attack } = incident.distribution.probs;
  return Math.max(service_incident, dos_attack);
}

export function sortQueue(incidents: IncidentSummary[]): IncidentSummary[] {
  return [...incidents].sort((a, b) => {
    const risk = riskOf(b) - riskOf(a);
    if (risk !== 0) return risk;
    return a.incident_id < b.incident_id ? -1 : a.incident_id > b.incident_id ? 1 : 0;
  });
}
