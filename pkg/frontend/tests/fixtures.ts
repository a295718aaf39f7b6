/** Mocked-service fixtures. Numeric values are chosen so that NO local
 *  formula reproduces them: critical markers are not a fixed multiple of
 *  the warning markers, sigmas do not follow any ramp of observed/limit,
 *  and the score does not equal the weighted subscore sum. A dashboard
 *  that renders these verbatim cannot be doing constraint math locally. */

import type {
  Assessment, AssessmentResponse, CaseDetail, CaseListing, LimitMarker,
  ToothInfo, TrainingHistory, WhatIfResponse,
} from "../src/types.js";

export const KB_VERSION = "kb-fixture-7";
export const DIGEST = "digest-aaa111";

function lim(
  warn: number,
  crit: number,
  unit = "mm",
  kind: "soft" | "hard" = "soft",
): LimitMarker {
  return { warn_at: warn, critical_at: crit, unit, kind };
}

function tooth(
  fdi: number,
  type: string,
  anterior: boolean,
  centroid: [number, number, number],
  limits: ToothInfo["limits"],
): ToothInfo {
  return { fdi, type, anterior, centroid_mm: centroid, lever_arm_mm: 4.5, limits };
}

export const TOOTH_36 = tooth(36, "molar", false, [-22.0, 4.0, -1.0], {
  "t_x": lim(0.23, 0.41),
  "t_y": lim(0.27, 0.49),
  "t_z+": lim(0.19, 0.333),
  "t_z-": lim(0.26, 0.44),
  "r_x": lim(2.1, 3.05, "deg"),
  "r_y": lim(2.8642, 4.0199, "deg"),
  "r_z": lim(1.37, 2.491, "deg", "hard"),
});

export const TOOTH_34 = tooth(34, "premolar", false, [-14.0, 16.0, -0.5], {
  "t_x": lim(0.25, 0.375),
  "t_y": lim(0.25, 0.375),
  "t_z+": lim(0.2, 0.3),
  "t_z-": lim(0.25, 0.375),
  "r_x": lim(2.0, 3.0, "deg"),
  "r_y": lim(3.1919, 4.7901, "deg"),
  "r_z": lim(2.0, 3.0, "deg"),
});

export const TOOTH_31 = tooth(31, "incisor", true, [-2.0, 24.0, 0.0], {
  "t_x": lim(0.25, 0.375),
  "t_y": lim(0.25, 0.375),
  "t_z+": lim(0.15, 0.225),
  "t_z-": lim(0.25, 0.375),
  "r_x": lim(2.0, 3.0, "deg"),
  "r_y": lim(3.3333, 5.0001, "deg"),
  "r_z": lim(1.5, 2.25, "deg"),
});

export function caseDetail(): CaseDetail {
  return {
    case_id: "case-fix",
    arch: "lower",
    teeth: [TOOTH_36, TOOTH_34, TOOTH_31],
    plan: {
      case_id: "case-fix",
      stage_count: 12,
      movements: [
        { fdi: 36, t: [0.1, 0.05, -0.2], r: [0.4, 0.2, 0.31] },
        { fdi: 31, t: [0.0, 0.12, 0.0], r: [0.0, 0.0, 0.8] },
      ],
      attachments: [34],
      ipr_mm: [{ contact: [31, 32], mm: 0.2 }],
    },
    kb_version: KB_VERSION,
    config_digest: DIGEST,
  };
}

export function listing(): CaseListing {
  return { cases: ["case-fix"], kb_version: KB_VERSION, config_digest: DIGEST };
}

export function baseAssessment(): Assessment {
  return {
    case_id: "case-fix",
    subscores: {
      biomechanics: 0.93,
      predictability: 0.61,
      staging: 0.8,
      attachments: 1.0,
      ipr: 0.85,
      symmetry: 0.94,
    },
    weights: {
      biomechanics: 0.3,
      predictability: 0.2,
      staging: 0.15,
      attachments: 0.15,
      ipr: 0.1,
      symmetry: 0.1,
    },
    // deliberately NOT the weighted subscore sum
    score: 62.35,
    grade: "C",
    duration_months: 9,
    alerts: [
      {
        tooth: 36,
        rule: "rotation-molar",
        component: "r_z",
        observed: 1.6,
        limit: 1.37,
        sigma: 0.42, // matches no ramp of observed and limit
        kind: "hard",
        severity: "warning",
      },
    ],
    predictability: { "31": 0.61, "34": 0.7, "36": 0.52 },
  };
}

export function assessmentResponse(): AssessmentResponse {
  return {
    assessment: baseAssessment(),
    kb_version: KB_VERSION,
    config_digest: DIGEST,
  };
}

/** What-if response: the molar rotation pushed critical plus a fresh
 *  incisor alert; score and grade drop. */
export function whatIfResponse(): WhatIfResponse {
  const a = baseAssessment();
  a.score = 48.1;
  a.grade = "D";
  a.alerts = [
    { ...a.alerts[0], observed: 2.6, sigma: 0.11, severity: "critical" },
    {
      tooth: 31,
      rule: "rotation-incisor",
      component: "r_z",
      observed: 1.9,
      limit: 1.5,
      sigma: 0.57,
      kind: "soft",
      severity: "warning",
    },
  ];
  return {
    assessment: a,
    delta: {
      changed_evals: [
        {
          tooth: 36,
          rule: "rotation-molar",
          component: "r_z",
          old: {
            tooth: 36, rule: "rotation-molar", component: "r_z",
            observed: 1.6, limit: 1.37, sigma: 0.42, kind: "hard",
            severity: "warning",
          },
          new: {
            tooth: 36, rule: "rotation-molar", component: "r_z",
            observed: 2.6, limit: 1.37, sigma: 0.11, kind: "hard",
            severity: "critical",
          },
        },
        {
          tooth: 31, rule: "rotation-incisor", component: "r_z",
          old: null,
          new: {
            tooth: 31, rule: "rotation-incisor", component: "r_z",
            observed: 1.9, limit: 1.5, sigma: 0.57, kind: "soft",
            severity: "warning",
          },
        },
      ],
      previous_score: 62.35,
      new_score: 48.1,
      previous_grade: "C",
      new_grade: "D",
    },
    kb_version: KB_VERSION,
    config_digest: DIGEST,
  };
}

export function trainingHistory(): TrainingHistory {
  return {
    name: "model",
    history: [
      { epoch: 0, loss: 3.1, miou: 0.12, tiou: 0.1, acc: 0.4, tir: 0.3, wall_ms: 900 },
      { epoch: 1, loss: 2.2, miou: 0.3, tiou: 0.28, acc: 0.6, tir: 0.62, wall_ms: 880 },
      { epoch: 2, loss: 1.7, miou: 0.45, tiou: 0.43, acc: 0.7, tir: 0.8, wall_ms: 905 },
    ],
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface MockCall {
  url: string;
  init?: RequestInit;
  body?: unknown;
}

export interface MockService {
  fetchFn: (url: string, init?: RequestInit) => Promise<Response>;
  calls: MockCall[];
  whatifBodies: unknown[];
  /** Replace the what-if handler (default echoes whatIfResponse()). */
  setWhatIf(fn: (body: unknown, init?: RequestInit) => Promise<Response>): void;
}

export function mockService(): MockService {
  const calls: MockCall[] = [];
  const whatifBodies: unknown[] = [];
  let whatIfHandler: (body: unknown, init?: RequestInit) => Promise<Response> =
    async () => jsonResponse(whatIfResponse());

  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    const call: MockCall = { url, init };
    calls.push(call);
    const method = init?.method ?? "GET";
    if (method === "POST" && url.endsWith("/whatif")) {
      const body = JSON.parse(String(init?.body));
      call.body = body;
      whatifBodies.push(body);
      return whatIfHandler(body, init);
    }
    if (url === "/cases") return jsonResponse(listing());
    if (url === "/cases/case-fix") return jsonResponse(caseDetail());
    if (url === "/cases/case-fix/assessment") return jsonResponse(assessmentResponse());
    if (url.startsWith("/training/history")) return jsonResponse(trainingHistory());
    return jsonResponse({ error: "unknown_case", message: `no route ${url}` }, 404);
  };

  return {
    fetchFn,
    calls,
    whatifBodies,
    setWhatIf(fn) {
      whatIfHandler = fn;
    },
  };
}
