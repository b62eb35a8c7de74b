import { el } from "../dom.js";
import { canGenerate, type Actions, type AppState } from "../state.js";

const PROMPT_TOOLTIP =
  "Examples: \"English course for non-specialist students, friendly tone\", " +
  "\"conference talk, 15 minutes, expert audience\"";

export function renderSetup(state: AppState, actions: Actions): HTMLElement {
  const root = el("section", { class: "stage-setup", "data-stage": "setup" });

  // A/B: deck upload with thumbnail preview
  const deckInput = el("input", {
    type: "file",
    accept: ".pptx",
    "data-role": "deck-upload",
  });
  deckInput.addEventListener("change", () => {
    const file = deckInput.files?.[0];
    if (file) actions.uploadDeck(file);
  });
  const deckPanel = el("div", { class: "panel" }, [
    el("h2", {}, ["Presentation"]),
    deckInput,
  ]);
  if (state.deck) {
    const strip = el("div", { class: "slide-strip", "data-role": "slide-preview" });
    for (const url of state.deck.preview_urls) {
      strip.append(el("img", { src: url, alt: "slide preview", width: "160" }));
    }
    deckPanel.append(
      el("p", { "data-role": "deck-status" }, [
        `${state.deck.slide_count} slides ready`,
      ]),
      strip
    );
  }
  root.append(deckPanel);

  // C: voice sample, recorded in-browser or uploaded
  const voicePanel = el("div", { class: "panel" }, [el("h2", {}, ["Voice sample"])]);
  const recordButton = el(
    "button",
    { type: "button", "data-role": state.recording ? "voice-stop" : "voice-record" },
    [state.recording ? "Stop recording" : "Record voice sample"]
  );
  recordButton.addEventListener("click", () =>
    state.recording ? actions.stopVoiceRecording() : actions.startVoiceRecording()
  );
  const voiceInput = el("input", {
    type: "file",
    accept: "audio/*",
    "data-role": "voice-upload",
  });
  voiceInput.addEventListener("change", () => {
    const file = voiceInput.files?.[0];
    if (file) actions.uploadVoice(file, file.name);
  });
  voicePanel.append(recordButton, voiceInput);
  if (state.voice) {
    const ok = state.voice.status === "ready";
    voicePanel.append(
      el(
        "p",
        {
          class: ok ? "voice-ok" : "voice-error",
          "data-role": "voice-status",
        },
        [ok ? "Voice sample ready" : state.voice.message || "Voice sample rejected"]
      )
    );
  }
  root.append(voicePanel);

  // D: presentation requirements prompt
  const promptField = el("textarea", {
    "data-role": "prompt",
    title: PROMPT_TOOLTIP,
    placeholder: "Describe your audience and presentation goals",
  });
  promptField.value = state.prompt;
  promptField.addEventListener("change", () => actions.setPrompt(promptField.value));
  root.append(
    el("div", { class: "panel" }, [el("h2", {}, ["Requirements"]), promptField])
  );

  if (state.setupError) {
    root.append(el("p", { class: "error", "data-role": "setup-error" }, [state.setupError]));
  }

  // F: generation is gated on deck + valid voice; the verdicts are the server's
  const generate = el(
    "button",
    {
      type: "button",
      "data-role": "generate",
      disabled: !canGenerate(state),
    },
    ["Generate exemplar"]
  ) as HTMLButtonElement;
  generate.addEventListener("click", () => actions.generate());
  root.append(generate);
  return root;
}
