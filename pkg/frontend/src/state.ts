import type { GenerationProgress } from "./steps.js";
import type {
  AnalysisReport,
  ChatMessage,
  DeckUploadResult,
  Manifest,
  PracticeRecording,
  ScriptSegment,
  SessionSummary,
  VoiceUploadResult,
} from "./types.js";

export interface AppState {
  session: SessionSummary | null;
  deck: DeckUploadResult | null;
  voice: VoiceUploadResult | null;
  prompt: string;
  recording: boolean;
  setupError: string | null;
  progress: GenerationProgress;
  manifest: Manifest | null;
  script: ScriptSegment[];
  currentSlide: number;
  practices: PracticeRecording[];
  reports: Map<string, AnalysisReport>;
  analyzing: Set<string>;
  chat: ChatMessage[];
  chatPending: boolean;
  practiceRecording: boolean;
}

export interface Actions {
  uploadDeck(file: File): void;
  uploadVoice(file: Blob, name: string): void;
  setPrompt(text: string): void;
  startVoiceRecording(): void;
  stopVoiceRecording(): void;
  generate(): void;
  returnToSetup(): void;
  startPracticeRecording(): void;
  stopPracticeRecording(): void;
  uploadPractice(file: File): void;
  analyze(practiceId: string): void;
  sendChat(text: string): void;
  seek(tMs: number): void;
}

export function initialState(): AppState {
  return {
    session: null,
    deck: null,
    voice: null,
    prompt: "",
    recording: false,
    setupError: null,
    progress: {
      steps: [],
      finished: false,
      failed: false,
      failureDetail: null,
    },
    manifest: null,
    script: [],
    currentSlide: 1,
    practices: [],
    reports: new Map(),
    analyzing: new Set(),
    chat: [],
    chatPending: false,
    practiceRecording: false,
  };
}

export function canGenerate(state: AppState): boolean {
  return state.deck !== null && state.voice?.status === "ready";
}
