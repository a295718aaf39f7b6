/** Thin fetch wrapper for the analysis service. The fetch function is
 *  injectable so tests can mock the service wholesale. */

import type {
  AssessmentResponse, CaseDetail, CaseListing, Overrides,
  TrainingHistory, WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public error: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parse<T>(res: Response): Promise<T> {
  if (res.ok) return res.json() as Promise<T>;
  let error = "http_error";
  let message = `${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body === "object") {
      error = body.error ?? error;
      message = body.message ?? message;
    }
  } catch {
    /* non-JSON error body; keep the status text */
  }
  throw new ApiError(res.status, error, message);
}

export class Api {
  constructor(
    private fetchFn: FetchLike = (...args) => fetch(...args),
    private base = "",
  ) {}

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(this.base + path).then((r) => parse<T>(r));
  }

  listCases(): Promise<CaseListing> {
    return this.get("/cases");
  }

  caseDetail(caseId: string): Promise<CaseDetail> {
    return this.get(`/cases/${encodeURIComponent(caseId)}`);
  }

  assessment(caseId: string): Promise<AssessmentResponse> {
    return this.get(`/cases/${encodeURIComponent(caseId)}/assessment`);
  }

  trainingHistory(name = "model"): Promise<TrainingHistory> {
    return this.get(`/training/history?name=${encodeURIComponent(name)}`);
  }

  whatIf(
    caseId: string,
    overrides: Overrides,
    kbVersion: string | null,
    signal?: AbortSignal,
  ): Promise<WhatIfResponse> {
    const body: Record<string, unknown> = { overrides };
    if (kbVersion !== null) body.kb_version = kbVersion;
    return this.fetchFn(`${this.base}/cases/${encodeURIComponent(caseId)}/whatif`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    }).then((r) => parse<WhatIfResponse>(r));
  }
}
