// Wire types mirroring the HTTP API. The frontend holds no business logic:
// every verdict (voice validity, feedback validity) comes from the server.

export type Stage = "setup" | "generating" | "coaching";

export interface SessionSummary {
  id: string;
  stage: Stage;
  user_prompt: string;
  deck_ref: string | null;
  voice_ref: string | null;
  exemplar_ref: string | null;
}

export interface DeckUploadResult {
  deck_id: string;
  slide_count: number;
  preview_urls: string[];
  slides: { index: number; title: string; parse_error: string | null }[];
}

export interface VoiceUploadResult {
  status: "ready" | "invalid";
  message?: string;
  duration_ms?: number;
}

export type StepStatus = "pending" | "running" | "done" | "failed";

export interface ProgressEvent {
  job_id: string;
  sequence: number;
  step_name: string; // "" on the terminal event
  status: StepStatus | "completed" | "failed";
  detail?: string | null;
  timestamp: string;
}

export interface ManifestEntry {
  slide_index: number;
  start_ms: number;
  end_ms: number;
}

export interface Manifest {
  entries: ManifestEntry[];
  total_duration_ms: number;
}

export interface ScriptSegment {
  slide_index: number;
  text: string;
  word_count: number;
  length_flag: string;
}

export interface OisFeedback {
  encouragement: string;
  observation: string;
  impact: string;
  suggestion: string;
}

export interface DeliveryMetrics {
  word_count: number;
  words_per_minute: number;
  filler_count: number;
  filler_rate: number;
  pause_count: number;
  total_pause_ms: number;
  longest_pause_ms: number;
  duration_ms: number;
}

export interface AudienceNote {
  audience_profile: string;
  engagement: string;
  comprehension: string;
  confusion_points: string[];
  reaction_summary: string;
}

export interface AnalysisReport {
  id: string;
  status: "complete" | "failed";
  feedback?: OisFeedback;
  metrics?: DeliveryMetrics;
  audience_notes?: AudienceNote[];
  failed_stage?: string;
  error?: string;
}

export interface PracticeRecording {
  id: string;
  duration_ms: number;
  slide_range: [number, number] | null;
}

export interface ChatMessage {
  role: "user" | "coach";
  content: string;
  timestamp: string;
  linked_analysis?: string | null;
}
