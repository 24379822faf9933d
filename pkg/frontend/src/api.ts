/** Thin fetch client; every method maps 1:1 onto one endpoint. */

import type {
  IncidentDetail,
  IncidentList,
  ModelInfo,
  RatingAck,
  ReportDocument,
  TrainStatus,
  UploadResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: unknown) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    const text = await response.text();
    const body = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, body?.detail ?? body);
    }
    return body as T;
  }

  listIncidents(): Promise<IncidentList> {
    return this.request("/api/incidents");
  }

  getIncident(id: string): Promise<IncidentDetail> {
    return this.request(`/api/incidents/${id}`);
  }

  uploadFlows(csv: string): Promise<UploadResult> {
    return this.request("/api/flows", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csv,
    });
  }

  rate(
    incidentId: string,
    recommendationId: string,
    score: number,
    timestamp: string,
    ratedClass?: string,
  ): Promise<RatingAck> {
    return this.request(`/api/incidents/${incidentId}/ratings`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        recommendation_id: recommendationId,
        score,
        timestamp,
        ...(ratedClass ? { rated_class: ratedClass } : {}),
      }),
    });
  }

  startTraining(epochs = 60, seed = 0): Promise<{ detail: string }> {
    return this.request("/api/train", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ epochs, seed }),
    });
  }

  trainStatus(): Promise<TrainStatus> {
    return this.request("/api/train/status");
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request("/api/model");
  }

  reportJson(incidentId: string): Promise<ReportDocument> {
    return this.request(`/api/reports/${incidentId}?format=json`);
  }

  reportHtmlUrl(incidentId: string): string {
    return `${this.baseUrl}/api/reports/${incidentId}?format=html`;
  }
}
