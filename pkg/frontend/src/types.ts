/** Wire types for the incident API (see docs/api.md in the repo root). */

export type ClassName = "normal_traffic" | "service_incident" | "dos_attack";

export interface ClassProbs {
  normal_traffic: number;
  service_incident: number;
  dos_attack: number;
}

export interface Distribution {
  probs: ClassProbs;
  predicted: ClassName;
}

export interface StoredRating {
  recommendation_id: string;
  score: number;
  rated_class: string;
  timestamp: string;
}

export interface IncidentSummary {
  incident_id: string;
  created_at: string;
  status: "open" | "acknowledged" | "resolved";
  flow_index: number;
  distribution: Distribution;
  top_risk: number;
  model_version: string;
  ratings: StoredRating[];
}

export interface Suggestion {
  recommendation_id: string;
  title: string;
  detail: string;
  level: string;
  score: number;
  feedback_score: number;
}

export interface IncidentDetail extends IncidentSummary {
  suggestions: Suggestion[];
  destination: string;
  protocol: number;
}

export interface IncidentList {
  incidents: IncidentSummary[];
}

export interface UploadResult {
  received: number;
  filtered_out: number;
  incidents: string[];
}

export interface RatingAck {
  incident_id: string;
  recommendation_id: string;
  score: number;
  stored: boolean;
  duplicate: boolean;
  pending_feedback: number;
}

export interface TrainReportSummary {
  mode: "merged" | "retrain";
  epochs: number;
  final_accuracy: number;
  samples: number;
}

export interface TrainStatus {
  running: boolean;
  pending_feedback: number;
  last_error: string | null;
  last_report?: TrainReportSummary;
}

export interface ModelInfo {
  model_version: string;
  layer_sizes: number[];
  alpha: number;
  classes: string[];
  kb_version: string;
  pending_feedback: number;
  training_running: boolean;
}

export interface ReportCause {
  class: string;
  probability: number;
  narrative: string;
}

export interface ReportRecommendation {
  entry: {
    recommendation_id: string;
    title: string;
    detail: string;
    level: string;
  };
  score: number;
}

export interface ReportDocument {
  incident_id: string;
  created_at: string;
  flows_covered: number[];
  distribution: { probs: number[]; predicted: string };
  probable_causes: ReportCause[];
  recommendations: ReportRecommendation[];
  management_summary: string;
  model_version: string;
  kb_version: string;
}
