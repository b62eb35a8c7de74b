import { initialState, type Actions, type AppState } from "../src/state.js";
import { emptyProgress } from "../src/steps.js";
import type { SessionSummary, Stage } from "../src/types.js";

export function noopActions(): Actions {
  return {
    uploadDeck: () => {},
    uploadVoice: () => {},
    setPrompt: () => {},
    startVoiceRecording: () => {},
    stopVoiceRecording: () => {},
    generate: () => {},
    returnToSetup: () => {},
    startPracticeRecording: () => {},
    stopPracticeRecording: () => {},
    uploadPractice: () => {},
    analyze: () => {},
    sendChat: () => {},
    seek: () => {},
  };
}

export function sessionAt(stage: Stage): SessionSummary {
  return {
    id: "s1",
    stage,
    user_prompt: "",
    deck_ref: stage === "setup" ? null : "d1",
    voice_ref: stage === "setup" ? null : "v1",
    exemplar_ref: stage === "coaching" ? "e1" : null,
  };
}

export function stateAt(stage: Stage): AppState {
  const state = initialState();
  state.session = sessionAt(stage);
  state.progress = emptyProgress();
  if (stage === "coaching") {
    state.manifest = {
      entries: [
        { slide_index: 1, start_ms: 0, end_ms: 3000 },
        { slide_index: 2, start_ms: 3000, end_ms: 8000 },
      ],
      total_duration_ms: 8000,
    };
    state.script = [
      { slide_index: 1, text: "First slide text.", word_count: 3, length_flag: "short" },
      { slide_index: 2, text: "Second slide text.", word_count: 3, length_flag: "short" },
    ];
  }
  return state;
}
