/** Wires the api client to the store: debounced what-if dispatch with
 *  at most one in-flight request (newest wins, older fetches aborted),
 *  error routing, and case/view navigation. The browser entry point only
 *  binds DOM events to these methods, so the whole interaction loop is
 *  testable without a DOM. */

import { Api, ApiError } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { Store, type ViewName } from "./store.js";
import type { PlanComponent } from "./types.js";

export const WHATIF_DEBOUNCE_MS = 150;

export class Controller {
  readonly store = new Store();
  private inflight: AbortController | null = null;
  private queueWhatIf: Debounced<[]>;

  constructor(
    private api: Api,
    private onChange: () => void = () => {},
    debounceMs = WHATIF_DEBOUNCE_MS,
  ) {
    this.queueWhatIf = debounce(() => {
      void this.sendWhatIf();
    }, debounceMs);
  }

  async init(): Promise<void> {
    try {
      const listing = await this.api.listCases();
      this.store.loadCases(listing);
      if (listing.cases.length) {
        await this.openCase(listing.cases[0]);
      }
    } catch {
      this.store.setConnectionLost();
    }
    try {
      const doc = await this.api.trainingHistory();
      this.store.loadHistory(doc.history);
    } catch {
      /* no training history yet; the monitor view says so */
    }
    this.onChange();
  }

  async openCase(caseId: string): Promise<void> {
    this.queueWhatIf.cancel();
    this.inflight?.abort();
    this.inflight = null;
    try {
      const detail = await this.api.caseDetail(caseId);
      let assessment = null;
      try {
        assessment = await this.api.assessment(caseId);
      } catch (err) {
        // a case without a stored plan has no assessment
        if (!(err instanceof ApiError && err.status === 404)) throw err;
      }
      this.store.openCase(detail, assessment);
    } catch (err) {
      if (err instanceof ApiError) {
        this.store.setValidationError(err.message);
      } else {
        this.store.setConnectionLost();
      }
    }
    this.onChange();
  }

  /** Record a slider edit and schedule a debounced what-if round trip. */
  sliderInput(fdi: number, component: PlanComponent, value: number): void {
    this.store.setOverride(fdi, component, value);
    this.queueWhatIf();
  }

  private async sendWhatIf(): Promise<void> {
    const s = this.store.state;
    if (!s.selectedCase) return;
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const token = this.store.beginWhatIf();
    try {
      const resp = await this.api.whatIf(
        s.selectedCase,
        s.overrides,
        s.kbVersion,
        controller.signal,
      );
      this.store.applyWhatIf(token, resp);
    } catch (err) {
      if (controller.signal.aborted) return; // superseded by a newer edit
      if (err instanceof ApiError) {
        this.store.setValidationError(err.message);
      } else {
        this.store.setConnectionLost();
      }
    } finally {
      if (this.inflight === controller) this.inflight = null;
      this.onChange();
    }
  }

  /** Drop pending edits, restore the stored plan's assessment. */
  revert(): void {
    this.queueWhatIf.cancel();
    this.inflight?.abort();
    this.inflight = null;
    this.store.revert();
    this.onChange();
  }

  focusTooth(fdi: number): void {
    this.store.selectTooth(fdi);
    this.store.setView("tooth");
    this.onChange();
  }

  setView(view: ViewName): void {
    this.store.setView(view);
    this.onChange();
  }

  toggleGlyph(): void {
    this.store.toggleGlyph();
    this.onChange();
  }

  setAlertSort(key: "severity" | "tooth"): void {
    this.store.setAlertSort(key);
    this.onChange();
  }
}
