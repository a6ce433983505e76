/** Payload shapes of the curation HTTP API, mirrored field for field. */

export interface VocabResponse {
  version: string;
  /** group name -> ordered field names (risk_score included). */
  groups: Record<string, string[]>;
  /** field name -> allowed values; includes traffic_controls and wod_e2e_tags. */
  fields: Record<string, string[]>;
  risk_range: [number, number];
}

export interface DnaPayload {
  odd_attributes: Record<string, string>;
  road_topology: { traffic_controls: string[] } & Record<string, string | string[]>;
  key_interacting_agents: Record<string, string>;
  scenario_criticality: { risk_score: number } & Record<string, string | number>;
  wod_e2e_tags: string[];
  description: string;
}

export interface FrameSummary {
  frame_id: string;
  scene_id: string;
  risk_score: number;
  tags: string[];
  description: string;
  verified: boolean;
  flagged: boolean;
}

export interface FrameListResponse {
  page: number;
  page_size: number;
  total: number;
  frames: FrameSummary[];
}

export interface ScorePayload {
  candidate_index: number;
  g: number;
  c: number;
  h: number;
  reward: number;
  verdicts: string[];
}

export interface ScoutTrace {
  scout_name: string;
  reasoning_trace: string;
  risk_score: number | null;
  parse_failed: boolean;
}

export interface GoldPayload {
  frame_id: string;
  dna: DnaPayload;
  category: string;
  annotator: string;
  verified_at: string;
}

export interface FrameDetail {
  frame_id: string;
  scene_id: string;
  dna: DnaPayload;
  winner_score: ScorePayload;
  flagged_for_review: string[];
  created_at: string;
  inventory_text: string;
  candidates: DnaPayload[];
  candidate_scores: ScorePayload[];
  winner_index: number;
  candidate_source: string;
  scout_traces: ScoutTrace[];
  /** camera name -> image URL path, present only when the file exists. */
  images: Record<string, string>;
  verified: boolean;
  gold: GoldPayload | null;
}

export interface Violation {
  path: string;
  offending_value: string;
  expected: string;
}

export interface ValidationReportPayload {
  valid: boolean;
  violations: Violation[];
}

export interface GoldAck {
  ok: boolean;
  frame_id: string;
  verified: boolean;
}

export interface GoldSubmission {
  dna: DnaPayload;
  annotator?: string;
  category?: string;
}
