import { describe, expect, it } from "vitest";
import { renderApp } from "../src/render.js";
import { noopActions, stateAt } from "./helpers.js";

const SETUP_CONTROLS = [
  "[data-role=deck-upload]",
  "[data-role=voice-upload]",
  "[data-role=voice-record]",
  "[data-role=prompt]",
  "[data-role=generate]",
];

const GENERATING_CONTROLS = ["[data-role=step-list]"];

const COACHING_CONTROLS = [
  "[data-role=exemplar-player]",
  "[data-role=practice-upload]",
  "[data-role=practice-record]",
  "[data-role=chat-input]",
  "[data-role=script]",
];

function controlsPresent(root: HTMLElement, selectors: string[]): string[] {
  return selectors.filter((sel) => root.querySelector(sel) !== null);
}

describe("stage gating", () => {
  it("setup renders only setup controls", () => {
    const root = renderApp(stateAt("setup"), noopActions());
    expect(root.dataset.stage).toBe("setup");
    expect(controlsPresent(root, SETUP_CONTROLS)).toEqual(SETUP_CONTROLS);
    expect(controlsPresent(root, GENERATING_CONTROLS)).toEqual([]);
    expect(controlsPresent(root, COACHING_CONTROLS)).toEqual([]);
  });

  it("generating hides setup and coaching controls", () => {
    const root = renderApp(stateAt("generating"), noopActions());
    expect(root.dataset.stage).toBe("generating");
    expect(controlsPresent(root, GENERATING_CONTROLS)).toEqual(GENERATING_CONTROLS);
    expect(controlsPresent(root, SETUP_CONTROLS)).toEqual([]);
    expect(controlsPresent(root, COACHING_CONTROLS)).toEqual([]);
  });

  it("coaching hides setup and generating controls", () => {
    const root = renderApp(stateAt("coaching"), noopActions());
    expect(root.dataset.stage).toBe("coaching");
    expect(controlsPresent(root, COACHING_CONTROLS)).toEqual(COACHING_CONTROLS);
    expect(controlsPresent(root, SETUP_CONTROLS)).toEqual([]);
    expect(controlsPresent(root, GENERATING_CONTROLS)).toEqual([]);
  });

  it("no file inputs or upload buttons survive into the generating stage", () => {
    const root = renderApp(stateAt("generating"), noopActions());
    expect(root.querySelectorAll("input[type=file]").length).toBe(0);
    expect(root.querySelectorAll("textarea").length).toBe(0);
  });
});
