import { el } from "../dom.js";
import type { Actions, AppState } from "../state.js";
import type { AnalysisReport } from "../types.js";

function renderReport(report: AnalysisReport): HTMLElement {
  const panel = el("div", { class: "report", "data-role": "report" });
  if (report.status !== "complete" || !report.feedback) {
    panel.append(
      el("p", { class: "error" }, [
        `Analysis failed${report.failed_stage ? ` at ${report.failed_stage}` : ""}: ${report.error ?? "unknown error"}`,
      ])
    );
    return panel;
  }
  const fb = report.feedback;
  panel.append(
    el("p", { class: "encouragement", "data-role": "encouragement" }, [fb.encouragement]),
    el("div", { class: "ois-block", "data-role": "observation" }, [
      el("h4", {}, ["Observation"]),
      el("p", {}, [fb.observation]),
    ]),
    el("div", { class: "ois-block", "data-role": "impact" }, [
      el("h4", {}, ["Impact"]),
      el("p", {}, [fb.impact]),
    ]),
    el("div", { class: "ois-block", "data-role": "suggestion" }, [
      el("h4", {}, ["Suggestion"]),
      el("p", {}, [fb.suggestion]),
    ])
  );
  if (report.metrics) {
    const m = report.metrics;
    panel.append(
      el("ul", { class: "metrics", "data-role": "metrics" }, [
        el("li", {}, [`${Math.round(m.words_per_minute)} words/min`]),
        el("li", {}, [`${m.filler_count} fillers (${m.filler_rate.toFixed(1)}/100 words)`]),
        el("li", {}, [`${m.pause_count} pauses, longest ${(m.longest_pause_ms / 1000).toFixed(1)} s`]),
      ])
    );
  }
  for (const note of report.audience_notes ?? []) {
    panel.append(
      el("div", { class: "audience-note", "data-role": "audience-note" }, [
        el("p", {}, [`${note.audience_profile}: ${note.reaction_summary}`]),
        el("p", { class: "levels" }, [
          `engagement ${note.engagement}, comprehension ${note.comprehension}`,
        ]),
      ])
    );
  }
  return panel;
}

export function renderCoaching(state: AppState, actions: Actions): HTMLElement {
  const root = el("section", { class: "stage-coaching", "data-stage": "coaching" });

  // H: exemplar player with the manifest-driven slide indicator
  const sessionId = state.session?.id ?? "";
  const video = el("video", {
    controls: true,
    src: `/api/sessions/${sessionId}/exemplar`,
    "data-role": "exemplar-player",
  }) as HTMLVideoElement;
  video.addEventListener("timeupdate", () =>
    actions.seek(Math.floor(video.currentTime * 1000))
  );
  root.append(
    el("div", { class: "panel player" }, [
      video,
      el("p", { "data-role": "slide-indicator" }, [`Slide ${state.currentSlide}`]),
    ])
  );

  // J: script panel, current slide's segment highlighted
  const scriptPanel = el("div", { class: "panel script", "data-role": "script" });
  for (const segment of state.script) {
    scriptPanel.append(
      el(
        "div",
        {
          class:
            segment.slide_index === state.currentSlide
              ? "segment segment-current"
              : "segment",
          "data-slide": String(segment.slide_index),
        },
        [el("h4", {}, [`Slide ${segment.slide_index}`]), el("p", {}, [segment.text])]
      )
    );
  }
  root.append(scriptPanel);

  // I: practice recorder and upload, with per-recording analyze actions
  const practicePanel = el("div", { class: "panel practice" }, [el("h2", {}, ["Practice"])]);
  const recordButton = el(
    "button",
    {
      type: "button",
      "data-role": state.practiceRecording ? "practice-stop" : "practice-record",
    },
    [state.practiceRecording ? "Stop practice" : "Record practice"]
  );
  recordButton.addEventListener("click", () =>
    state.practiceRecording
      ? actions.stopPracticeRecording()
      : actions.startPracticeRecording()
  );
  const practiceInput = el("input", {
    type: "file",
    accept: "audio/*",
    "data-role": "practice-upload",
  });
  practiceInput.addEventListener("change", () => {
    const file = practiceInput.files?.[0];
    if (file) actions.uploadPractice(file);
  });
  practicePanel.append(recordButton, practiceInput);

  for (const practice of state.practices) {
    const row = el("div", { class: "practice-row", "data-practice": practice.id }, [
      el("span", {}, [`Take (${(practice.duration_ms / 1000).toFixed(1)} s)`]),
    ]);
    const report = state.reports.get(practice.id);
    if (!report) {
      const analyzeButton = el(
        "button",
        {
          type: "button",
          "data-role": "analyze",
          disabled: state.analyzing.has(practice.id),
        },
        [state.analyzing.has(practice.id) ? "Analyzing..." : "Analyze"]
      );
      analyzeButton.addEventListener("click", () => actions.analyze(practice.id));
      row.append(analyzeButton);
    } else {
      row.append(renderReport(report));
    }
    practicePanel.append(row);
  }
  root.append(practicePanel);

  // K: coach chat, input locked while a reply is pending (server busy contract)
  const chatPanel = el("div", { class: "panel chat", "data-role": "chat" });
  const log = el("div", { class: "chat-log" });
  for (const message of state.chat) {
    log.append(
      el("p", { class: `chat-${message.role}`, "data-chat-role": message.role }, [
        message.content,
      ])
    );
  }
  const chatInput = el("input", {
    type: "text",
    "data-role": "chat-input",
    disabled: state.chatPending,
    placeholder: "Ask your coach",
  }) as HTMLInputElement;
  const sendButton = el(
    "button",
    { type: "button", "data-role": "chat-send", disabled: state.chatPending },
    ["Send"]
  );
  const send = () => {
    if (chatInput.value.trim()) {
      actions.sendChat(chatInput.value.trim());
      chatInput.value = "";
    }
  };
  sendButton.addEventListener("click", send);
  chatInput.addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") send();
  });
  chatPanel.append(log, chatInput, sendButton);
  root.append(chatPanel);
  return root;
}
