"""Local HTTP facade over the analysis pipeline.

Serves case listings, assessments, and synchronous what-if evaluation
for the dashboard. All constraint and score math happens here, server
side; responses carry the knowledge base version and a config digest so
clients can detect staleness. Assessments are computed from the case's
landmark-derived records, so what-if feedback needs no model inference.
Nothing under the workspace is ever written by this module.
"""

import json
import math
import os

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .cases import MovementPlan, ToothMovement, serialize_plan
from .constraints import (COMPONENTS, DEFAULT_LEVER_ARM_MM, default_knowledge_base,
                          records_from_case)
from .errors import DomainError
from .pipeline import config_digest
from .scoring import WavfConfig, build_assessment
from .store import NotFound, Workspace

# Plan-space movement components; t_z is signed (extrusion +, intrusion -).
PLAN_COMPONENTS = ("t_x", "t_y", "t_z", "r_x", "r_y", "r_z")

_WAVF_OVERRIDE_KEYS = ("weights", "grade_thresholds", "sensitivity_fraction")


class WhatIfRequest(BaseModel):
    overrides: dict[str, dict[str, float]] = {}
    wavf: dict | None = None
    kb_version: str | None = None


def _fail(status, error, message):
    raise HTTPException(status_code=status, detail={"error": error, "message": message})


def _slider_limits(kb, ttype, lever_mm):
    """Warning and critical marker positions per rule component.

    Positions are in slider units: degrees for r_y (the tabulated mm limit
    mapped through the crown lever arm), rule units elsewhere.
    """
    out = {}
    for comp in COMPONENTS:
        rules = kb.rules_for(comp, ttype)
        limit = min(r.limit for r in rules)
        tightest = [r for r in rules if r.limit == limit]
        kind = "hard" if any(r.kind == "hard" for r in tightest) else "soft"
        unit = tightest[0].unit
        if comp == "r_y":
            warn = math.degrees(math.asin(min(1.0, limit / lever_mm)))
            crit = math.degrees(math.asin(min(1.0, kb.alpha * limit / lever_mm)))
            unit = "deg"
        else:
            warn = limit
            crit = kb.alpha * limit
        out[comp] = {"warn_at": warn, "critical_at": crit, "unit": unit, "kind": kind}
    return out


def create_app(root, model_name="model", kb=None, wavf=None, ui_dir=None) -> FastAPI:
    workspace = Workspace(root)
    kb = kb or default_knowledge_base()
    wavf = wavf or WavfConfig()
    digest = config_digest(kb, wavf)

    app = FastAPI(title="orthoscreen", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    @app.exception_handler(HTTPException)
    async def _http_error(request, exc):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"error": "http_error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(DomainError)
    async def _domain_error(request, exc):
        return JSONResponse(status_code=500,
                            content={"error": type(exc).__name__, "message": str(exc)})

    def get_case(case_id):
        try:
            return workspace.get_case(case_id)
        except NotFound:
            _fail(404, "unknown_case", f"no case {case_id!r} in the workspace")

    def get_plan(case_id):
        try:
            return workspace.get_plan(case_id)
        except NotFound:
            _fail(404, "no_plan", f"case {case_id!r} has no stored plan")

    def model_loaded():
        try:
            workspace.checkpoint_path(model_name)
            return True
        except NotFound:
            return False

    def stamped(payload):
        payload["kb_version"] = kb.version
        payload["config_digest"] = digest
        return payload

    def assessment_for(case, plan, cfg):
        records = records_from_case(case)
        report, evaluation = build_assessment(case.case_id, records, plan, kb, cfg)
        return report, evaluation

    @app.get("/health")
    def health():
        return {"status": "ok", "model_loaded": model_loaded()}

    @app.get("/cases")
    def cases():
        return stamped({"cases": workspace.list_cases()})

    @app.get("/cases/{case_id}")
    def case_detail(case_id: str):
        case = get_case(case_id)
        records = records_from_case(case)
        teeth = []
        for rec in records:
            lever = rec.vertical_semi_axis or DEFAULT_LEVER_ARM_MM
            teeth.append({
                "fdi": rec.label.code,
                "type": rec.label.tooth_type.value,
                "anterior": rec.label.tooth_type.anterior,
                "centroid_mm": [float(v) for v in rec.centroid],
                "lever_arm_mm": float(lever),
                "limits": _slider_limits(kb, rec.label.tooth_type, lever),
            })
        try:
            plan = json.loads(serialize_plan(workspace.get_plan(case_id)))
        except NotFound:
            plan = None
        return stamped({
            "case_id": case_id,
            "arch": case.arch,
            "teeth": teeth,
            "plan": plan,
        })

    @app.get("/cases/{case_id}/assessment")
    def assessment(case_id: str):
        case = get_case(case_id)
        plan = get_plan(case_id)
        report, _ = assessment_for(case, plan, wavf)
        return stamped({"assessment": report})

    @app.get("/training/history")
    def training_history(name: str = "model"):
        try:
            return {"name": name, "history": workspace.get_history(name)}
        except NotFound:
            _fail(404, "no_history", f"no training history named {name!r}")

    @app.post("/cases/{case_id}/whatif")
    def whatif(case_id: str, body: WhatIfRequest):
        case = get_case(case_id)
        plan = get_plan(case_id)
        if body.kb_version is not None and body.kb_version != kb.version:
            _fail(422, "stale_kb",
                  f"request built against KB {body.kb_version!r}, serving {kb.version!r}")

        cfg = wavf
        if body.wavf is not None:
            unknown = sorted(set(body.wavf) - set(_WAVF_OVERRIDE_KEYS))
            if unknown:
                _fail(422, "bad_wavf", f"unsupported wavf overrides: {unknown}")
            try:
                cfg = WavfConfig(**{
                    **{k: getattr(wavf, k) for k in _WAVF_OVERRIDE_KEYS},
                    **{k: tuple(tuple(x) if isinstance(x, list) else x for x in v)
                       if k == "grade_thresholds" else v
                       for k, v in body.wavf.items()},
                    "value_functions": wavf.value_functions,
                })
            except (DomainError, TypeError, ValueError) as exc:
                _fail(422, "bad_wavf", str(exc))

        known = {ls.tooth.code for ls in case.teeth}
        movements = dict(plan.movements)
        for fdi_raw, comps in body.overrides.items():
            try:
                code = int(fdi_raw)
            except ValueError:
                _fail(422, "bad_override", f"tooth key must be an FDI code, got {fdi_raw!r}")
            if code not in known:
                _fail(422, "bad_override", f"tooth {code} is not in case {case_id!r}")
            if not comps:
                continue
            base = movements.get(code)
            t = base.translation_mm.copy() if base else np.zeros(3)
            r = base.rotation_deg.copy() if base else np.zeros(3)
            for comp, value in comps.items():
                if comp not in PLAN_COMPONENTS:
                    _fail(422, "bad_override",
                          f"unknown component {comp!r}, expected one of {PLAN_COMPONENTS}")
                if not math.isfinite(value):
                    _fail(422, "bad_override", f"{comp} for tooth {code} must be finite")
                target = t if comp.startswith("t_") else r
                target["xyz".index(comp[-1])] = float(value)
            movements[code] = ToothMovement(translation_mm=t, rotation_deg=r)

        edited = MovementPlan(
            case_id=plan.case_id,
            stage_count=plan.stage_count,
            movements=movements,
            attachments=plan.attachments,
            ipr_mm=plan.ipr_mm,
        )
        base_report, base_eval = assessment_for(case, plan, wavf)
        new_report, new_eval = assessment_for(case, edited, cfg)

        def keyed(evaluation):
            return {(e.tooth, e.rule_id, e.component): e for e in evaluation.evals}

        old, new = keyed(base_eval), keyed(new_eval)
        changed = []
        for key in sorted(set(old) | set(new)):
            a, b = old.get(key), new.get(key)
            if a is not None and b is not None and a.sigma == b.sigma \
                    and a.severity == b.severity and a.observed == b.observed:
                continue
            changed.append({
                "tooth": key[0],
                "rule": key[1],
                "component": key[2],
                "old": a.as_dict() if a else None,
                "new": b.as_dict() if b else None,
            })

        return stamped({
            "assessment": new_report,
            "delta": {
                "changed_evals": changed,
                "previous_score": base_report["score"],
                "new_score": new_report["score"],
                "previous_grade": base_report["grade"],
                "new_grade": new_report["grade"],
            },
        })

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
