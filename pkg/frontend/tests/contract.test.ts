/** Contract tests against a mocked service: the dashboard's numbers are
 *  the service's numbers, round trips update the badge and alert list,
 *  revert restores the initial state, and no code path recomputes
 *  constraint satisfaction locally. */

import { readFileSync, readdirSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { Api } from "../src/api.js";
import { Controller } from "../src/controller.js";
import { renderApp } from "../src/views.js";
import {
  KB_VERSION, jsonResponse, mockService, whatIfResponse,
} from "./fixtures.js";
import type { MockService } from "./fixtures.js";

async function flushTasks(): Promise<void> {
  await new Promise((resolve) => setImmediate(resolve));
}

async function settle(ms = 200): Promise<void> {
  await vi.advanceTimersByTimeAsync(ms);
  await flushTasks();
}

async function boot(): Promise<{ svc: MockService; controller: Controller }> {
  const svc = mockService();
  const controller = new Controller(new Api(svc.fetchFn));
  await controller.init();
  return { svc, controller };
}

beforeEach(() => {
  vi.useFakeTimers({ toFake: ["setTimeout", "clearTimeout"] });
});

afterEach(() => {
  vi.useRealTimers();
});

describe("initial load", () => {
  it("renders the served assessment and case list", async () => {
    const { controller } = await boot();
    const html = renderApp(controller.store);
    expect(html).toContain(`<option value="case-fix" selected>`);
    expect(html).toContain(`data-score="62.35"`);
    expect(html).toContain(`data-grade="C"`);
  });

  it("shows a connection banner when the service is down", async () => {
    const controller = new Controller(
      new Api(async () => {
        throw new TypeError("fetch failed");
      }),
    );
    await controller.init();
    expect(renderApp(controller.store)).toContain(`class="banner connection"`);
  });
});

describe("slider limit markers", () => {
  it("equal the KB limits served for the case", async () => {
    const { controller } = await boot();
    controller.focusTooth(36);
    const html = renderApp(controller.store);
    // molar axial rotation: hard limit pair, served verbatim
    expect(html).toContain(`data-warn="1.37"`);
    expect(html).toContain(`data-crit="2.491"`);
    // directional vertical limits
    expect(html).toContain(`data-warn="0.19"`);
    expect(html).toContain(`data-warn="0.26"`);
    // the lever-mapped tip limit arrives in degrees, already converted
    expect(html).toContain(`data-warn="2.8642"`);
  });
});

describe("what-if round trip", () => {
  it("debounces the request and sends the pending overrides", async () => {
    const { svc, controller } = await boot();
    controller.sliderInput(36, "r_z", 2.0);
    controller.sliderInput(36, "r_z", 2.4);
    controller.sliderInput(36, "r_z", 2.6);
    expect(svc.whatifBodies).toHaveLength(0);
    await settle();
    expect(svc.whatifBodies).toHaveLength(1);
    expect(svc.whatifBodies[0]).toEqual({
      overrides: { "36": { r_z: 2.6 } },
      kb_version: KB_VERSION,
    });
  });

  it("updates the score badge and the alert list", async () => {
    const { controller } = await boot();
    controller.sliderInput(36, "r_z", 2.6);
    await settle();
    const badge = renderApp(controller.store);
    expect(badge).toContain(`data-score="48.1"`);
    expect(badge).toContain(`data-grade="D"`);
    controller.setView("alerts");
    const alerts = renderApp(controller.store);
    expect(alerts).toContain("rotation-molar");
    expect(alerts).toContain(`class="alert-row sev-critical" data-fdi="36"`);
    expect(alerts).toContain("rotation-incisor");
    expect(alerts).toContain(`data-sigma="0.11"`);
  });

  it("applies only the newest of two racing requests", async () => {
    const { svc, controller } = await boot();
    const pending: ((r: Response) => void)[] = [];
    svc.setWhatIf(
      () => new Promise<Response>((resolve) => pending.push(resolve)),
    );

    controller.sliderInput(36, "r_z", 2.0);
    await settle();
    controller.sliderInput(36, "r_z", 2.6);
    await settle();
    expect(pending).toHaveLength(2);

    const whatifCalls = svc.calls.filter((c) => c.url.endsWith("/whatif"));
    expect(whatifCalls).toHaveLength(2);
    expect((whatifCalls[0].init!.signal as AbortSignal).aborted).toBe(true);
    expect((whatifCalls[1].init!.signal as AbortSignal).aborted).toBe(false);

    // newest response lands first, stale one afterwards
    pending[1](jsonResponse(whatIfResponse()));
    await flushTasks();
    const stale = whatIfResponse();
    stale.assessment.score = 99.9;
    stale.delta.new_score = 99.9;
    pending[0](jsonResponse(stale));
    await flushTasks();

    expect(controller.store.state.assessment!.score).toBe(48.1);
  });

  it("discards responses carrying a stale config digest", async () => {
    const { svc, controller } = await boot();
    svc.setWhatIf(async () => {
      const resp = whatIfResponse();
      resp.config_digest = "digest-zzz999";
      return jsonResponse(resp);
    });
    controller.sliderInput(36, "r_z", 2.6);
    await settle();
    expect(controller.store.state.assessment!.score).toBe(62.35);
    expect(renderApp(controller.store)).toContain(`class="banner stale"`);
  });

  it("renders a 422 inline at the tooth detail", async () => {
    const { svc, controller } = await boot();
    svc.setWhatIf(async () =>
      jsonResponse(
        { error: "bad_override", message: "tooth 48 is not in case 'case-fix'" },
        422,
      ),
    );
    controller.focusTooth(36);
    controller.sliderInput(36, "r_z", 2.6);
    await settle();
    const html = renderApp(controller.store);
    expect(html).toContain(`class="field-error"`);
    expect(html).toContain("tooth 48 is not in case");
    expect(controller.store.state.assessment!.score).toBe(62.35);
  });

  it("shows the connection banner when the round trip fails", async () => {
    const { svc, controller } = await boot();
    svc.setWhatIf(async () => {
      throw new TypeError("fetch failed");
    });
    controller.sliderInput(36, "r_z", 2.6);
    await settle();
    expect(renderApp(controller.store)).toContain(`class="banner connection"`);
  });
});

describe("revert", () => {
  it("restores the initial rendered state exactly", async () => {
    const { svc, controller } = await boot();
    controller.focusTooth(36);
    const initial = renderApp(controller.store);

    controller.sliderInput(36, "r_z", 2.6);
    await settle();
    expect(renderApp(controller.store)).not.toBe(initial);
    expect(svc.whatifBodies).toHaveLength(1);

    controller.revert();
    expect(renderApp(controller.store)).toBe(initial);
    await settle();
    expect(svc.whatifBodies).toHaveLength(1); // nothing new sent
  });

  it("cancels a pending debounce", async () => {
    const { svc, controller } = await boot();
    controller.sliderInput(36, "r_z", 2.6);
    controller.revert();
    await settle();
    expect(svc.whatifBodies).toHaveLength(0);
  });
});

describe("no local constraint arithmetic", () => {
  it("renders service numbers a local formula would contradict", async () => {
    const { controller } = await boot();
    controller.focusTooth(36);
    const html = renderApp(controller.store);
    // critical marker is not 1.5x the warning marker
    expect(html).toContain(`data-crit="2.491"`);
    expect(html).not.toContain(`data-crit="2.055"`);
    // sigma does not follow the soft-constraint ramp of observed/limit
    expect(html).toContain(`data-sigma="0.42"`);
    // score is not the weighted subscore sum (which would be 85)
    expect(html).toContain(`data-score="62.35"`);
    expect(html).not.toContain(`data-score="85"`);
  });

  it("has no code paths that derive sigma, limits, or scores", () => {
    const srcDir = fileURLToPath(new URL("../src", import.meta.url));
    const files = readdirSync(srcDir).filter((f) => f.endsWith(".ts"));
    expect(files.length).toBeGreaterThanOrEqual(7);
    const forbidden: [string, RegExp][] = [
      ["trig limit conversion", /Math\.(asin|acos|atan)/],
      ["satisfaction function", /satisf/i],
      ["alpha multiplier", /\balpha\b/],
      ["arithmetic on warn limits", /warn_at\s*[*/+%-]|[*/+%-]\s*[\w.]*warn_at/],
      ["arithmetic on observed", /\bobserved\s*[*/+%-]|[*/+%-]\s*[\w.]*\.observed/],
      ["arithmetic on rule limits", /\.limit\s*[*/+%-]|[*/+%-]\s*[\w.]+\.limit/],
    ];
    for (const file of files) {
      const text = readFileSync(`${srcDir}/${file}`, "utf8");
      for (const [label, re] of forbidden) {
        expect(re.test(text), `${file}: ${label}`).toBe(false);
      }
    }
  });
});
