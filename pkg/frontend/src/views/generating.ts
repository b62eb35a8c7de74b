import { el } from "../dom.js";
import type { Actions, AppState } from "../state.js";

export function renderGenerating(state: AppState, actions: Actions): HTMLElement {
  const root = el("section", {
    class: "stage-generating",
    "data-stage": "generating",
  });
  root.append(el("h2", {}, ["Generating your exemplar presentation"]));

  const list = el("ol", { class: "steps", "data-role": "step-list" });
  for (const step of state.progress.steps) {
    const item = el(
      "li",
      { class: `step step-${step.status}`, "data-step": step.name },
      [
        el("span", { class: "step-name" }, [step.name]),
        el("span", { class: "step-status", "data-role": "step-status" }, [step.status]),
      ]
    );
    if (step.detail && step.status === "running") {
      item.append(el("span", { class: "step-detail" }, [step.detail]));
    }
    list.append(item);
  }
  root.append(list);

  if (state.progress.failed) {
    const failedStep = state.progress.steps.find((s) => s.status === "failed");
    const back = el("button", { type: "button", "data-role": "return-to-setup" }, [
      "Return to setup",
    ]);
    back.addEventListener("click", () => actions.returnToSetup());
    root.append(
      el("div", { class: "error-panel", "data-role": "failure" }, [
        el("p", {}, [
          failedStep
            ? `${failedStep.name} failed: ${state.progress.failureDetail ?? "unknown error"}`
            : state.progress.failureDetail ?? "Generation failed",
        ]),
        back,
      ])
    );
  }
  return root;
}
