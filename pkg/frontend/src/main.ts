/** Browser entry point: binds DOM events to the controller and swaps the
 *  rendered view in on every state change. */

import { Api } from "./api.js";
import { Controller } from "./controller.js";
import type { ViewName } from "./store.js";
import type { PlanComponent } from "./types.js";
import { renderApp } from "./views.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const controller = new Controller(new Api(), render);

function render(): void {
  root!.innerHTML = renderApp(controller.store);
}

root.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const tab = target.closest<HTMLElement>(".tab");
  if (tab && tab.dataset.view) {
    controller.setView(tab.dataset.view as ViewName);
    return;
  }
  if (target.closest("#revert")) {
    controller.revert();
    return;
  }
  if (target.closest("#glyph-toggle")) {
    controller.toggleGlyph();
    return;
  }
  const sortHeader = target.closest<HTMLElement>("th[data-sort]");
  if (sortHeader) {
    controller.setAlertSort(sortHeader.dataset.sort as "severity" | "tooth");
    return;
  }
  const tooth = target.closest<HTMLElement>("[data-fdi]");
  if (tooth && !target.closest("input")) {
    controller.focusTooth(Number(tooth.dataset.fdi));
  }
});

root.addEventListener("input", (ev) => {
  const el = ev.target as HTMLInputElement;
  if (el.matches("input[type=range][data-comp]")) {
    const value = Number(el.value);
    controller.sliderInput(
      Number(el.dataset.fdi),
      el.dataset.comp as PlanComponent,
      value,
    );
    // live readout during the drag; the full view re-renders on response
    const out = root!.querySelector(`output.value[data-comp="${el.dataset.comp}"]`);
    if (out) out.textContent = value.toFixed(2);
  }
});

root.addEventListener("change", (ev) => {
  const el = ev.target as HTMLSelectElement;
  if (el.matches("#case-select")) {
    void controller.openCase(el.value);
  }
});

void controller.init();
render();
