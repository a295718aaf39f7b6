/** String-template views. Every numeric shown (score, grade, sigma,
 *  limits, subscores) is rendered verbatim from server data; exact values
 *  are exposed in data-* attributes for the contract tests. The only
 *  arithmetic here is layout: mapping values to pixel positions and bar
 *  widths. */

import type {
  Assessment, CaseDetail, EvalEntry, HistoryRecord, LimitMarker,
  PlanComponent, ToothInfo,
} from "./types.js";
import { PLAN_COMPONENTS } from "./types.js";
import type { Store, UiError, ViewName } from "./store.js";

const SEVERITY_RANK = { critical: 2, warning: 1, none: 0 } as const;

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function fmt(n: number, digits: number): string {
  return n.toFixed(digits);
}

function attr(n: number): string {
  return escapeHtml(String(n));
}

export function renderScoreBadge(a: Assessment | null): string {
  if (!a) return `<div class="score-badge empty">no assessment</div>`;
  return (
    `<div class="score-badge grade-${escapeHtml(a.grade)}"` +
    ` data-score="${attr(a.score)}" data-grade="${escapeHtml(a.grade)}">` +
    `<span class="score">${fmt(a.score, 1)}</span>` +
    `<span class="grade">${escapeHtml(a.grade)}</span>` +
    `</div>`
  );
}

/* ---------------------------------------------------------------- arch */

function glyphShape(tooth: ToothInfo): "box" | "sphere" | "cylinder" {
  if (tooth.type === "molar") return "box";
  if (tooth.type === "premolar") return "sphere";
  return "cylinder"; // incisors and canines
}

function glyphMarkup(shape: "box" | "sphere" | "cylinder"): string {
  // Isometric-ish primitives, drawn around the origin.
  if (shape === "box") {
    return (
      `<path d="M -9 -2 L 0 -8 L 9 -2 L 9 6 L 0 12 L -9 6 Z"/>` +
      `<path class="face" d="M -9 -2 L 0 4 L 9 -2 L 0 -8 Z"/>` +
      `<path class="edge" d="M 0 4 L 0 12"/>`
    );
  }
  if (shape === "sphere") {
    return `<circle r="9"/><ellipse class="face" cx="-3" cy="-3" rx="3" ry="2"/>`;
  }
  return (
    `<rect x="-6" y="-6" width="12" height="14" rx="2"/>` +
    `<ellipse class="face" cx="0" cy="-6" rx="6" ry="3"/>`
  );
}

export function renderOverview(
  detail: CaseDetail,
  worstSeverity: (fdi: number) => "none" | "warning" | "critical",
  glyph3d: boolean,
  selectedTooth: number | null,
): string {
  const xs = detail.teeth.map((t) => t.centroid_mm[0]);
  const ys = detail.teeth.map((t) => t.centroid_mm[1]);
  const pad = 10;
  const x0 = Math.min(...xs) - pad;
  const x1 = Math.max(...xs) + pad;
  const y0 = Math.min(...ys) - pad;
  const y1 = Math.max(...ys) + pad;
  const w = 640;
  const h = 420;
  const scale = Math.min(w / (x1 - x0), h / (y1 - y0));

  const glyphs = detail.teeth.map((tooth) => {
    const gx = (tooth.centroid_mm[0] - x0) * scale;
    // occlusal view: +y toward the front of the arch, screen y grows down
    const gy = h - (tooth.centroid_mm[1] - y0) * scale;
    const sev = worstSeverity(tooth.fdi);
    const sel = tooth.fdi === selectedTooth ? " selected" : "";
    const shape = glyphShape(tooth);
    const body = glyph3d
      ? glyphMarkup(shape)
      : `<rect x="-9" y="-9" width="18" height="18" rx="5"/>`;
    return (
      `<g class="tooth sev-${sev}${sel}" data-fdi="${tooth.fdi}"` +
      (glyph3d ? ` data-shape="${shape}"` : "") +
      ` transform="translate(${fmt(gx, 1)},${fmt(gy, 1)})">` +
      body +
      `<text y="28">${tooth.fdi}</text>` +
      `</g>`
    );
  });

  return (
    `<svg class="arch${glyph3d ? " glyph3d" : ""}" viewBox="0 0 ${w} ${h}"` +
    ` role="img" aria-label="arch schematic">` +
    glyphs.join("") +
    `</svg>`
  );
}

/* -------------------------------------------------------- tooth detail */

interface MarkerSpec {
  side: "pos" | "neg";
  marker: LimitMarker;
}

function markersFor(tooth: ToothInfo, comp: PlanComponent): MarkerSpec[] {
  if (comp === "t_z") {
    return [
      { side: "pos", marker: tooth.limits["t_z+"] },
      { side: "neg", marker: tooth.limits["t_z-"] },
    ];
  }
  const marker = tooth.limits[comp];
  return [
    { side: "pos", marker },
    { side: "neg", marker },
  ];
}

function markerMarkup(spec: MarkerSpec, range: number): string {
  const sign = spec.side === "pos" ? 1 : -1;
  const pct = (v: number) => fmt(((sign * v + range) / (2 * range)) * 100, 2);
  const hard = spec.marker.kind === "hard" ? " hard" : "";
  return (
    `<span class="marker warn${hard}" data-side="${spec.side}"` +
    ` data-warn="${attr(spec.marker.warn_at)}"` +
    ` style="left:${pct(spec.marker.warn_at)}%"` +
    ` title="warn at ${attr(spec.marker.warn_at)} ${escapeHtml(spec.marker.unit)}"></span>` +
    `<span class="marker crit${hard}" data-side="${spec.side}"` +
    ` data-crit="${attr(spec.marker.critical_at)}"` +
    ` style="left:${pct(spec.marker.critical_at)}%"` +
    ` title="critical at ${attr(spec.marker.critical_at)} ${escapeHtml(spec.marker.unit)}"></span>`
  );
}

function gaugeMarkup(comp: string, entry: EvalEntry | undefined): string {
  if (!entry) {
    return (
      `<div class="gauge sev-none" data-comp="${escapeHtml(comp)}">` +
      `<div class="gauge-fill" style="width:100%"></div>` +
      `<span class="sigma" data-sigma="1">σ 1.00</span>` +
      `</div>`
    );
  }
  const width = fmt(Math.max(0, Math.min(1, entry.sigma)) * 100, 1);
  return (
    `<div class="gauge sev-${entry.severity}" data-comp="${escapeHtml(comp)}"` +
    ` data-rule="${escapeHtml(entry.rule)}">` +
    `<div class="gauge-fill" style="width:${width}%"></div>` +
    `<span class="sigma" data-sigma="${attr(entry.sigma)}">σ ${fmt(entry.sigma, 2)}</span>` +
    `</div>`
  );
}

export function renderToothDetail(
  tooth: ToothInfo,
  values: Record<PlanComponent, number>,
  toothEvals: Map<string, EvalEntry>,
  error: UiError | null,
): string {
  const rows = PLAN_COMPONENTS.map((comp) => {
    const specs = markersFor(tooth, comp);
    const maxCrit = Math.max(...specs.map((s) => s.marker.critical_at));
    const range = maxCrit * 1.5;
    const unit = specs[0].marker.unit;
    const step = comp.startsWith("t_") ? 0.01 : 0.05;
    const value = values[comp];

    const gauges =
      comp === "t_z"
        ? ["t_z+", "t_z-"]
            .filter((lc) => toothEvals.has(lc))
            .map((lc) => gaugeMarkup(lc, toothEvals.get(lc)))
            .join("") || gaugeMarkup("t_z", undefined)
        : gaugeMarkup(comp, toothEvals.get(comp));

    return (
      `<div class="movement-row" data-comp="${comp}">` +
      `<label>${comp} <span class="unit">${escapeHtml(unit)}</span></label>` +
      `<div class="slider-wrap">` +
      specs.map((s) => markerMarkup(s, range)).join("") +
      `<input type="range" min="${fmt(-range, 3)}" max="${fmt(range, 3)}"` +
      ` step="${step}" value="${attr(value)}" data-fdi="${tooth.fdi}" data-comp="${comp}">` +
      `</div>` +
      `<output class="value" data-comp="${comp}">${fmt(value, 2)}</output>` +
      gauges +
      `</div>`
    );
  });

  const inlineError =
    error && error.kind === "validation"
      ? `<div class="field-error">${escapeHtml(error.message)}</div>`
      : "";

  return (
    `<div class="tooth-detail" data-fdi="${tooth.fdi}">` +
    `<h2>Tooth ${tooth.fdi} <span class="tooth-type">${escapeHtml(tooth.type)}</span></h2>` +
    inlineError +
    rows.join("") +
    `</div>`
  );
}

/* ----------------------------------------------------------- alert list */

export function renderAlertList(
  evals: Iterable<EvalEntry>,
  sort: "severity" | "tooth",
): string {
  const active = [...evals].filter((e) => e.severity !== "none");
  active.sort((a, b) =>
    sort === "severity"
      ? SEVERITY_RANK[b.severity] - SEVERITY_RANK[a.severity] || a.tooth - b.tooth
      : a.tooth - b.tooth || SEVERITY_RANK[b.severity] - SEVERITY_RANK[a.severity],
  );
  const rows = active.map(
    (e) =>
      `<tr class="alert-row sev-${e.severity}" data-fdi="${e.tooth}">` +
      `<td>${e.tooth}</td>` +
      `<td>${escapeHtml(e.rule)}</td>` +
      `<td data-observed="${attr(e.observed)}">${fmt(e.observed, 3)}</td>` +
      `<td data-limit="${attr(e.limit)}">${attr(e.limit)}</td>` +
      `<td data-sigma="${attr(e.sigma)}">${fmt(e.sigma, 2)}</td>` +
      `<td>${e.severity}</td>` +
      `</tr>`,
  );
  const body = rows.length
    ? rows.join("")
    : `<tr class="no-alerts"><td colspan="6">no alerts</td></tr>`;
  return (
    `<table class="alert-list">` +
    `<thead><tr>` +
    `<th data-sort="tooth">tooth</th><th>rule</th><th>observed</th>` +
    `<th>limit</th><th>σ</th><th data-sort="severity">severity</th>` +
    `</tr></thead>` +
    `<tbody>${body}</tbody>` +
    `</table>`
  );
}

/* ------------------------------------------------------------ checklist */

export function renderChecklist(a: Assessment | null): string {
  if (!a) return `<div class="checklist empty">no assessment</div>`;
  const rows = Object.entries(a.subscores).map(([name, value]) => {
    const width = fmt(Math.max(0, Math.min(1, value)) * 100, 1);
    const weight = a.weights[name];
    return (
      `<div class="check-row" data-criterion="${escapeHtml(name)}">` +
      `<span class="crit-name">${escapeHtml(name)}</span>` +
      `<div class="bar"><div class="bar-fill" style="width:${width}%"></div></div>` +
      `<span class="crit-value" data-value="${attr(value)}">${fmt(value, 3)}</span>` +
      `<span class="crit-weight">w ${fmt(weight, 2)}</span>` +
      `</div>`
    );
  });
  return `<div class="checklist">${rows.join("")}</div>`;
}

/* ------------------------------------------------------ training monitor */

function polyline(
  values: number[],
  lo: number,
  hi: number,
  w: number,
  h: number,
): string {
  const span = hi - lo || 1;
  const dx = values.length > 1 ? w / (values.length - 1) : 0;
  return values
    .map((v, i) => `${fmt(i * dx, 1)},${fmt(h - ((v - lo) / span) * h, 1)}`)
    .join(" ");
}

function chart(series: { name: string; values: number[] }[], w = 560, h = 160): string {
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const lines = series.map(
    (s) =>
      `<polyline class="series ${escapeHtml(s.name)}" data-series="${escapeHtml(s.name)}"` +
      ` data-points="${s.values.length}" fill="none"` +
      ` points="${polyline(s.values, lo, hi, w, h)}"/>`,
  );
  const legend = series.map(
    (s) => `<span class="legend ${escapeHtml(s.name)}">${escapeHtml(s.name)}</span>`,
  );
  return (
    `<figure class="chart"><svg viewBox="0 0 ${w} ${h}">${lines.join("")}</svg>` +
    `<figcaption>${legend.join(" ")}</figcaption></figure>`
  );
}

export function renderTrainingMonitor(history: HistoryRecord[] | null): string {
  if (!history || history.length === 0) {
    return `<div class="training empty">no training history</div>`;
  }
  const loss = chart([{ name: "loss", values: history.map((r) => r.loss) }]);
  const metrics = chart([
    { name: "tir", values: history.map((r) => r.tir) },
    { name: "miou", values: history.map((r) => r.miou) },
  ]);
  return `<div class="training">${loss}${metrics}</div>`;
}

/* ------------------------------------------------------------- chrome */

export function renderBanner(error: UiError | null): string {
  if (!error || error.kind === "validation") return "";
  return `<div class="banner ${error.kind}">${escapeHtml(error.message)}</div>`;
}

const VIEWS: { id: ViewName; label: string }[] = [
  { id: "overview", label: "Overview" },
  { id: "tooth", label: "Tooth detail" },
  { id: "alerts", label: "Alerts" },
  { id: "checklist", label: "Checklist" },
  { id: "training", label: "Training" },
];

export function renderApp(store: Store): string {
  const s = store.state;
  const tabs = VIEWS.map(
    (v) =>
      `<button class="tab${s.view === v.id ? " active" : ""}" data-view="${v.id}">` +
      `${v.label}</button>`,
  ).join("");
  const options = s.caseIds
    .map(
      (id) =>
        `<option value="${escapeHtml(id)}"${id === s.selectedCase ? " selected" : ""}>` +
        `${escapeHtml(id)}</option>`,
    )
    .join("");
  const edited = Object.keys(s.overrides).length > 0;

  let body = "";
  if (s.view === "overview" && s.detail) {
    body = renderOverview(
      s.detail,
      (fdi) => store.worstSeverity(fdi),
      s.glyph3d,
      s.selectedTooth,
    );
  } else if (s.view === "tooth" && s.detail && s.selectedTooth !== null) {
    const tooth = s.detail.teeth.find((t) => t.fdi === s.selectedTooth);
    if (tooth) {
      body = renderToothDetail(
        tooth,
        store.movementValues(tooth.fdi),
        store.toothEvals(tooth.fdi),
        s.error,
      );
    }
  } else if (s.view === "alerts") {
    body = renderAlertList(s.evals.values(), s.alertSort);
  } else if (s.view === "checklist") {
    body = renderChecklist(s.assessment);
  } else if (s.view === "training") {
    body = renderTrainingMonitor(s.history);
  }

  return (
    renderBanner(s.error) +
    `<header>` +
    `<select id="case-select">${options}</select>` +
    renderScoreBadge(s.assessment) +
    `<button id="revert"${edited ? "" : " disabled"}>Revert edits</button>` +
    `<button id="glyph-toggle">${s.glyph3d ? "2D view" : "3D glyphs"}</button>` +
    `</header>` +
    `<nav>${tabs}</nav>` +
    `<main>${body}</main>`
  );
}
