import { describe, expect, it } from "vitest";

import {
  formatPercent,
  probabilitiesComplete,
  probabilityRows,
  toIncidentView,
  toSuggestionViews,
} from "../src/model.js";
import type { IncidentDetail, IncidentSummary } from "../src/types.js";

const summary: IncidentSummary = {
  incident_id: "inc-000007",
  created_at: "2026-08-09T10:30:00+00:00",
  status: "open",
  flow_index: 42,
  distribution: {
    probs: { normal_traffic: 0.0076, service_incident: 0.9923, dos_attack: 0.0001 },
    predicted: "service_incident",
  },
  top_risk: 0.9923,
  model_version: "abc123def456",
  ratings: [
    {
      recommendation_id: "svc-restart-service",
      score: 4,
      rated_class: "service_incident",
      timestamp: "2026-08-09T11:00:00+00:00",
    },
  ],
};

const detail: IncidentDetail = {
  ...summary,
  destination: "192.168.10.5",
  protocol: 6,
  suggestions: [
    {
      recommendation_id: "svc-restart-service",
      title: "Restart the failing service processes",
      detail: "Restart the daemons.",
      level: "software",
      score: 0.89307,
      feedback_score: 3.5,
    },
  ],
};

describe("toIncidentView", () => {
  it("maps every displayed field 1:1 from the API payload", () => {
    const view = toIncidentView(summary);
    // snapshot of the full mapping: nothing invented, nothing dropped
    expect(view).toEqual({
      id: "inc-000007",
      createdAt: "2026-08-09T10:30:00+00:00",
      status: "open",
      flowIndex: 42,
      predicted: "service_incident",
      predictedLabel: "Service incident",
      topRisk: 0.9923,
      rows: [
        {
          className: "normal_traffic",
          label: "Normal traffic",
          value: 0.0076,
          percent: "0.76%",
        },
        {
          className: "service_incident",
          label: "Service incident",
          value: 0.9923,
          percent: "99.23%",
        },
        {
          className: "dos_attack",
          label: "DoS attack",
          value: 0.0001,
          percent: "0.01%",
        },
      ],
      ratedScores: { "svc-restart-service": 4 },
    });
  });

  it("keeps probability values verbatim", () => {
    const rows = probabilityRows(summary);
    expect(rows.map((r) => r.value)).toEqual([0.0076, 0.9923, 0.0001]);
  });
});

describe("probabilitiesComplete", () => {
  it("accepts a distribution summing to one", () => {
    expect(probabilitiesComplete(probabilityRows(summary))).toBe(true);
  });

  it("rejects a truncated distribution", () => {
    const broken = {
      ...summary,
      distribution: {
        probs: { normal_traffic: 0.2, service_incident: 0.2, dos_attack: 0.2 },
        predicted: "normal_traffic" as const,
      },
    };
    expect(probabilitiesComplete(probabilityRows(broken))).toBe(false);
  });
});

describe("toSuggestionViews", () => {
  it("renders rank and feedback from API fields only", () => {
    const views = toSuggestionViews(detail);
    expect(views).toEqual([
      {
        id: "svc-restart-service",
        title: "Restart the failing service processes",
        detail: "Restart the daemons.",
        level: "software",
        score: "0.8931",
        rawScore: 0.89307,
        feedback: "3.50",
      },
    ]);
  });
});

describe("formatPercent", () => {
  it("renders two decimals", () => {
    expect(formatPercent(1)).toBe("100.00%");
    expect(formatPercent(0.005)).toBe("0.50%");
    expect(formatPercent(0)).toBe("0.00%");
  });
});
