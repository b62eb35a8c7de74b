import type { Actions, AppState } from "./state.js";
import { renderCoaching } from "./views/coaching.js";
import { renderGenerating } from "./views/generating.js";
import { renderSetup } from "./views/setup.js";

/**
 * Stage gating happens here: exactly one stage view is ever in the tree,
 * so controls from non-current stages cannot appear in the DOM.
 */
export function renderApp(state: AppState, actions: Actions): HTMLElement {
  const stage = state.session?.stage ?? "setup";
  switch (stage) {
    case "generating":
      return renderGenerating(state, actions);
    case "coaching":
      return renderCoaching(state, actions);
    default:
      return renderSetup(state, actions);
  }
}
