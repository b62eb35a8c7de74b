import type { ProgressEvent, StepStatus } from "./types.js";

export const GENERATION_STEPS = [
  "Parsing slide content",
  "Generating narration script",
  "Synthesizing audio track",
  "Assembling video",
] as const;

export interface StepView {
  name: string;
  status: StepStatus;
  detail: string | null;
}

export interface GenerationProgress {
  steps: StepView[];
  finished: boolean;
  failed: boolean;
  failureDetail: string | null;
}

export function emptyProgress(): GenerationProgress {
  return {
    steps: GENERATION_STEPS.map((name) => ({
      name,
      status: "pending",
      detail: null,
    })),
    finished: false,
    failed: false,
    failureDetail: null,
  };
}

/** Fold one SSE progress event into the step panel state. */
export function applyEvent(
  progress: GenerationProgress,
  event: ProgressEvent
): GenerationProgress {
  const next: GenerationProgress = {
    ...progress,
    steps: progress.steps.map((s) => ({ ...s })),
  };
  if (event.step_name === "") {
    next.finished = true;
    next.failed = event.status === "failed";
    return next;
  }
  const step = next.steps.find((s) => s.name === event.step_name);
  if (!step) return next;
  step.status = event.status as StepStatus;
  if (event.detail) step.detail = event.detail;
  if (event.status === "failed") {
    next.failed = true;
    next.failureDetail = event.detail ?? null;
  }
  return next;
}
