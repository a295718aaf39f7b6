"""Shared builders for decoupling checks: margin-respecting plans whose
constraint verdicts are stable under bounded estimate noise."""

import math

import numpy as np

from orthoscreen.cases import MovementPlan, ToothMovement
from orthoscreen.casegen import generate_case
from orthoscreen.constraints import COMPONENTS, ToothRecord, records_from_case
from orthoscreen.scoring import build_assessment

# Ratio bands that keep every component away from the satisfaction
# function's breakpoints at 1 and alpha, under either record set.
SAFE_BANDS = ((0.0, 0.85), (1.15, 1.35), (1.7, 2.5))
GRADE_EDGES = (90.0, 75.0, 60.0, 40.0)


def band_of(ratio):
    for i, (lo, hi) in enumerate(SAFE_BANDS):
        if lo <= ratio <= hi:
            return i
    return None


def perturbed_records(records, rng):
    """Estimate-like records: centroids off by up to 2 mm, lever arms from a
    vertical axis tilted by up to 5 degrees."""
    out = []
    for rec in records:
        shift = rng.normal(size=3)
        shift *= rng.uniform(0.0, 2.0) / float(np.linalg.norm(shift))
        tilt = math.radians(rng.uniform(0.0, 5.0))
        a1, a3 = rec.mesiodistal_semi_axis, rec.vertical_semi_axis
        lever = math.sqrt((a3 * math.cos(tilt)) ** 2 + (a1 * math.sin(tilt)) ** 2)
        out.append(ToothRecord(
            label=rec.label,
            centroid=rec.centroid + shift,
            mesiodistal_semi_axis=a1 * rng.uniform(0.97, 1.03),
            vertical_semi_axis=lever,
        ))
    return out


def margin_plan(case, kb, gt_records, est_records, rng):
    """Plan whose per-component limit ratios sit deep inside one branch of
    the satisfaction function under BOTH record sets, with an unambiguous
    dominant component per tooth. Returns None when construction fails."""
    gt_by = {r.label.code: r for r in gt_records}
    est_by = {r.label.code: r for r in est_records}
    movements = {}
    for ls in case.teeth:
        code = ls.tooth.code
        ttype = ls.tooth.tooth_type
        active = [c for c in COMPONENTS if c != ("t_z-" if rng.random() < 0.5 else "t_z+")]
        dominant = active[int(rng.integers(len(active)))]
        t = np.zeros(3)
        r = np.zeros(3)
        ratios = {}
        for comp in active:
            if comp == dominant:
                band = SAFE_BANDS[int(rng.integers(1, 3))]
                ratio = rng.uniform(*band)
            else:
                ratio = rng.uniform(0.0, 0.70)
            ratios[comp] = ratio
        # dominance must be clear under any lever wobble
        if max(v for c, v in ratios.items() if c != dominant) > ratios[dominant] * 0.9:
            return None
        for comp, ratio in ratios.items():
            if comp == "r_y":
                limit_mm = min(rule.limit for rule in kb.rules_for("r_y", ttype))
                lever_gt = gt_by[code].vertical_semi_axis
                lever_est = est_by[code].vertical_semi_axis
                deg = math.degrees(math.asin(min(1.0, ratio * limit_mm / lever_gt)))
                ratio_est = math.sin(math.radians(deg)) * lever_est / limit_mm
                if band_of(ratio_est) != band_of(ratio):
                    return None
                r[1] = deg
            else:
                limit = kb.stage_limit(comp, ttype)
                value = ratio * limit
                if comp == "t_x":
                    t[0] = value * (1 if rng.random() < 0.5 else -1)
                elif comp == "t_y":
                    t[1] = value * (1 if rng.random() < 0.5 else -1)
                elif comp == "t_z+":
                    t[2] = value
                elif comp == "t_z-":
                    t[2] = -value
                elif comp == "r_x":
                    r[0] = value * (1 if rng.random() < 0.5 else -1)
                elif comp == "r_z":
                    r[2] = value * (1 if rng.random() < 0.5 else -1)
        movements[code] = ToothMovement(t, r)
    return MovementPlan(case_id=case.case_id, stage_count=20, movements=movements)


def iter_margin_cases(kb, rng, count, max_attempts=3000):
    """Yield ``count`` accepted tuples (case, gt_records, est_records, plan,
    rep_gt, eval_gt), skipping constructions that land near a breakpoint or
    a grade edge."""
    accepted = 0
    attempts = 0
    while accepted < count:
        attempts += 1
        if attempts >= max_attempts:
            raise AssertionError("plan construction failed too often")
        case = generate_case(int(rng.integers(100_000)))
        gt_records = records_from_case(case)
        est_records = perturbed_records(gt_records, rng)
        plan = margin_plan(case, kb, gt_records, est_records, rng)
        if plan is None:
            continue
        rep_gt, eval_gt = build_assessment(
            case.case_id, gt_records, plan, kb, arch_records=gt_records)
        # keep clear of grade edges so bounded score drift cannot flip one
        if min(abs(rep_gt["score"] - edge) for edge in GRADE_EDGES) < 1.0:
            continue
        accepted += 1
        yield case, gt_records, est_records, plan, rep_gt, eval_gt
