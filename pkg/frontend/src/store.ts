/** Dashboard state. Every sigma, alert, score, and grade held here came
 *  from a service response; the store only files them, it never computes
 *  them. What-if applications are guarded by a sequence number (newest
 *  wins) and by the config digest (stale responses are discarded). */

import type {
  Alert, Assessment, AssessmentResponse, CaseDetail, EvalEntry, Overrides,
  PlanComponent, HistoryRecord, WhatIfDelta, WhatIfResponse,
} from "./types.js";

export type ViewName = "overview" | "tooth" | "alerts" | "checklist" | "training";

export interface UiError {
  kind: "connection" | "validation" | "stale";
  message: string;
}

export interface UiState {
  caseIds: string[];
  kbVersion: string | null;
  configDigest: string | null;
  selectedCase: string | null;
  detail: CaseDetail | null;
  baseAssessment: Assessment | null;
  assessment: Assessment | null;
  evals: Map<string, EvalEntry>;
  overrides: Overrides;
  delta: WhatIfDelta | null;
  selectedTooth: number | null;
  view: ViewName;
  glyph3d: boolean;
  alertSort: "severity" | "tooth";
  history: HistoryRecord[] | null;
  error: UiError | null;
}

export function evalKey(tooth: number, rule: string, component: string): string {
  return `${tooth}|${rule}|${component}`;
}

function evalsFromAlerts(alerts: Alert[]): Map<string, EvalEntry> {
  // Alerts are the server's non-"none" evaluations; components the server
  // did not flag render as findings-free.
  const map = new Map<string, EvalEntry>();
  for (const a of alerts) {
    map.set(evalKey(a.tooth, a.rule, a.component), {
      tooth: a.tooth,
      rule: a.rule,
      component: a.component,
      observed: a.observed,
      limit: a.limit,
      sigma: a.sigma,
      kind: a.kind,
      severity: a.severity,
    });
  }
  return map;
}

export class Store {
  state: UiState = {
    caseIds: [],
    kbVersion: null,
    configDigest: null,
    selectedCase: null,
    detail: null,
    baseAssessment: null,
    assessment: null,
    evals: new Map(),
    overrides: {},
    delta: null,
    selectedTooth: null,
    view: "overview",
    glyph3d: false,
    alertSort: "severity",
    history: null,
    error: null,
  };

  private seq = 0;
  private appliedSeq = 0;

  loadCases(listing: { cases: string[]; kb_version: string; config_digest: string }): void {
    this.state.caseIds = listing.cases;
    this.state.kbVersion = listing.kb_version;
    this.state.configDigest = listing.config_digest;
  }

  openCase(detail: CaseDetail, assessment: AssessmentResponse | null): void {
    this.state.selectedCase = detail.case_id;
    this.state.detail = detail;
    this.state.baseAssessment = assessment ? assessment.assessment : null;
    this.state.assessment = this.state.baseAssessment;
    this.state.evals = this.state.baseAssessment
      ? evalsFromAlerts(this.state.baseAssessment.alerts)
      : new Map();
    this.state.overrides = {};
    this.state.delta = null;
    this.state.error = null;
    this.state.selectedTooth = detail.teeth.length ? detail.teeth[0].fdi : null;
    this.seq += 1; // orphan any in-flight what-if from the previous case
  }

  setOverride(fdi: number, component: PlanComponent, value: number): void {
    const forTooth = this.state.overrides[fdi] ?? {};
    forTooth[component] = value;
    this.state.overrides[fdi] = forTooth;
  }

  /** Claim a sequence token for an outgoing what-if request. */
  beginWhatIf(): number {
    this.seq += 1;
    return this.seq;
  }

  /** File a what-if response. Returns false when the response was
   *  discarded (superseded by a newer request, or stale digest). */
  applyWhatIf(token: number, resp: WhatIfResponse): boolean {
    if (token !== this.seq || token <= this.appliedSeq) return false;
    if (this.state.configDigest !== null && resp.config_digest !== this.state.configDigest) {
      this.state.error = {
        kind: "stale",
        message: "service configuration changed; reload the case",
      };
      return false;
    }
    this.appliedSeq = token;
    this.state.assessment = resp.assessment;
    this.state.delta = resp.delta;
    this.state.error = null;
    for (const change of resp.delta.changed_evals) {
      const key = evalKey(change.tooth, change.rule, change.component);
      if (change.new === null) this.state.evals.delete(key);
      else this.state.evals.set(key, change.new);
    }
    return true;
  }

  /** Drop pending edits and restore the stored plan's assessment. */
  revert(): void {
    this.state.overrides = {};
    this.state.assessment = this.state.baseAssessment;
    this.state.delta = null;
    this.state.error = null;
    this.state.evals = this.state.baseAssessment
      ? evalsFromAlerts(this.state.baseAssessment.alerts)
      : new Map();
    this.seq += 1; // orphan any in-flight what-if
  }

  setValidationError(message: string): void {
    this.state.error = { kind: "validation", message };
  }

  setConnectionLost(message = "service unreachable"): void {
    this.state.error = { kind: "connection", message };
  }

  clearError(): void {
    this.state.error = null;
  }

  selectTooth(fdi: number): void {
    this.state.selectedTooth = fdi;
  }

  setView(view: ViewName): void {
    this.state.view = view;
  }

  toggleGlyph(): void {
    this.state.glyph3d = !this.state.glyph3d;
  }

  setAlertSort(key: "severity" | "tooth"): void {
    this.state.alertSort = key;
  }

  loadHistory(history: HistoryRecord[]): void {
    this.state.history = history;
  }

  /** Slider values for one tooth: stored plan overlaid with pending edits. */
  movementValues(fdi: number): Record<PlanComponent, number> {
    const values: Record<PlanComponent, number> = {
      t_x: 0, t_y: 0, t_z: 0, r_x: 0, r_y: 0, r_z: 0,
    };
    const planned = this.state.detail?.plan?.movements.find((m) => m.fdi === fdi);
    if (planned) {
      [values.t_x, values.t_y, values.t_z] = planned.t;
      [values.r_x, values.r_y, values.r_z] = planned.r;
    }
    const edits = this.state.overrides[fdi];
    if (edits) Object.assign(values, edits);
    return values;
  }

  /** Worst server-reported severity for one tooth ("none" when the
   *  server flagged nothing). */
  worstSeverity(fdi: number): "none" | "warning" | "critical" {
    let worst: "none" | "warning" | "critical" = "none";
    for (const entry of this.state.evals.values()) {
      if (entry.tooth !== fdi) continue;
      if (entry.severity === "critical") return "critical";
      if (entry.severity === "warning") worst = "warning";
    }
    return worst;
  }

  /** Server-reported evaluations for one tooth, keyed by limit component. */
  toothEvals(fdi: number): Map<string, EvalEntry> {
    const out = new Map<string, EvalEntry>();
    for (const entry of this.state.evals.values()) {
      if (entry.tooth === fdi) out.set(entry.component, entry);
    }
    return out;
  }
}
