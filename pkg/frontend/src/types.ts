/** Wire shapes returned by the analysis service. The dashboard renders
 *  these verbatim; it never derives sigma, severity, limits, or scores
 *  on its own. */

export type Severity = "none" | "warning" | "critical";

export type PlanComponent = "t_x" | "t_y" | "t_z" | "r_x" | "r_y" | "r_z";

export const PLAN_COMPONENTS: readonly PlanComponent[] =
  ["t_x", "t_y", "t_z", "r_x", "r_y", "r_z"];

/** Limit components as the KB reports them; t_z is split by direction. */
export type LimitComponent =
  "t_x" | "t_y" | "t_z+" | "t_z-" | "r_x" | "r_y" | "r_z";

export interface LimitMarker {
  warn_at: number;
  critical_at: number;
  unit: string;
  kind: "soft" | "hard";
}

export interface ToothInfo {
  fdi: number;
  type: string;
  anterior: boolean;
  centroid_mm: [number, number, number];
  lever_arm_mm: number;
  limits: Record<LimitComponent, LimitMarker>;
}

export interface PlanMovement {
  fdi: number;
  t: [number, number, number];
  r: [number, number, number];
}

export interface StoredPlan {
  case_id: string;
  stage_count: number;
  movements: PlanMovement[];
  attachments: number[];
  ipr_mm: { contact: number[]; mm: number }[];
}

export interface CaseDetail {
  case_id: string;
  arch: string;
  teeth: ToothInfo[];
  plan: StoredPlan | null;
  kb_version: string;
  config_digest: string;
}

export interface CaseListing {
  cases: string[];
  kb_version: string;
  config_digest: string;
}

export interface Alert {
  tooth: number;
  rule: string;
  component: LimitComponent;
  observed: number;
  limit: number;
  sigma: number;
  kind: "soft" | "hard";
  severity: Severity;
}

export interface Assessment {
  case_id: string;
  subscores: Record<string, number>;
  weights: Record<string, number>;
  score: number;
  grade: string;
  duration_months: number;
  alerts: Alert[];
  predictability: Record<string, number>;
}

export interface AssessmentResponse {
  assessment: Assessment;
  kb_version: string;
  config_digest: string;
}

export interface EvalEntry {
  tooth: number;
  rule: string;
  component: LimitComponent;
  observed: number;
  limit: number;
  sigma: number;
  kind: "soft" | "hard";
  severity: Severity;
}

export interface ChangedEval {
  tooth: number;
  rule: string;
  component: LimitComponent;
  old: EvalEntry | null;
  new: EvalEntry | null;
}

export interface WhatIfDelta {
  changed_evals: ChangedEval[];
  previous_score: number;
  new_score: number;
  previous_grade: string;
  new_grade: string;
}

export interface WhatIfResponse {
  assessment: Assessment;
  delta: WhatIfDelta;
  kb_version: string;
  config_digest: string;
}

export interface HistoryRecord {
  epoch: number;
  loss: number;
  miou: number;
  tiou: number;
  acc: number;
  tir: number;
  wall_ms: number;
}

export interface TrainingHistory {
  name: string;
  history: HistoryRecord[];
}

/** Pending slider edits: FDI code -> component -> value. */
export type Overrides = Record<number, Partial<Record<PlanComponent, number>>>;
