"""Multi-criteria plan scoring.

Six sub-scores in [0, 1] are aggregated into a 0-100 score by a weighted sum
of pluggable value functions (identity by default):

    biomechanics   mean constraint satisfaction over all evaluated rules
    predictability mean per-tooth movement predictability over moved teeth
    staging        minimal feasible stage count relative to the planned one
    attachments    fraction of attachment-indicated teeth that get one
    ipr            planned interproximal reduction close to 0.25 mm where
                   contacts are crowded
    symmetry       left/right agreement of centroid distances to arch centre

Grades: A >= 90 > B >= 75 > C >= 60 > D >= 40 > F. Sensitivity perturbs one
weight at a time by +/-50 % (others rescaled to keep the sum at one) and
reports the score swing.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import KnowledgeBase, PlanEvaluation, evaluate_plan
from .errors import DomainError

CRITERIA = ("biomechanics", "predictability", "staging", "attachments", "ipr", "symmetry")

DEFAULT_WEIGHTS = (0.30, 0.20, 0.15, 0.15, 0.10, 0.10)

IPR_TARGET_MM = 0.25
IPR_ERROR_SCALE_MM = 0.5
SYMMETRY_SCALE_MM = 2.0
ATTACHMENT_ROTATION_DEG = 1.5
DAYS_PER_STAGE = 14.0
DAYS_PER_MONTH = 30.4


class WeightSumError(DomainError):
    """Criterion weights must be nonnegative and sum to one."""


def _identity(x):
    return x


@dataclass
class WavfConfig:
    weights: tuple = DEFAULT_WEIGHTS
    value_functions: dict = field(default_factory=dict)
    grade_thresholds: tuple = ((90.0, "A"), (75.0, "B"), (60.0, "C"), (40.0, "D"))
    sensitivity_fraction: float = 0.5

    def __post_init__(self):
        self.weights = tuple(float(w) for w in self.weights)
        if len(self.weights) != len(CRITERIA):
            raise WeightSumError(f"need {len(CRITERIA)} weights, got {len(self.weights)}")
        if any(w < 0.0 for w in self.weights):
            raise WeightSumError(f"weights must be nonnegative: {self.weights}")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise WeightSumError(f"weights sum to {sum(self.weights)!r}, expected 1")

    def value_function(self, criterion):
        return self.value_functions.get(criterion, _identity)

    def weight_map(self):
        return dict(zip(CRITERIA, self.weights))


@dataclass(frozen=True)
class SubScores:
    biomechanics: float
    predictability: float
    staging: float
    attachments: float
    ipr: float
    symmetry: float

    def as_dict(self):
        return {name: getattr(self, name) for name in CRITERIA}

    def as_tuple(self):
        return tuple(getattr(self, name) for name in CRITERIA)


def attachment_indicated(movement):
    """Teeth with per-stage rotation above 1.5 deg or any extrusion need one."""
    r = movement.rotation_deg
    return bool(np.any(np.abs(r) > ATTACHMENT_ROTATION_DEG) or movement.translation_mm[2] > 0.0)


def arch_order_key(label):
    """Sort key walking the arch from right posterior to left posterior."""
    right = label.quadrant in (1, 4)
    return (0 if right else 1, -label.position if right else label.position)


def arch_adjacent_pairs(records):
    ordered = sorted(records, key=lambda rec: arch_order_key(rec.label))
    return [(ordered[i], ordered[i + 1]) for i in range(len(ordered) - 1)]


def crowded_contacts(records):
    """Adjacent contacts whose centroids sit closer than the two crown radii.

    Contacts where either side lacks a centroid or crown width are skipped:
    crowding is then unknown, not asserted.
    """
    crowded = []
    for a, b in arch_adjacent_pairs(records):
        if a.centroid is None or b.centroid is None:
            continue
        if a.mesiodistal_semi_axis is None or b.mesiodistal_semi_axis is None:
            continue
        gap = float(np.linalg.norm(a.centroid - b.centroid))
        if gap < a.mesiodistal_semi_axis + b.mesiodistal_semi_axis:
            crowded.append(frozenset((a.label.code, b.label.code)))
    return crowded


def minimal_stage_count(evaluation: PlanEvaluation, stage_count):
    """Fewest stages that bring every evaluated component within its limit."""
    minimal = 0
    for ev in evaluation.evals:
        if ev.observed > 0.0:
            total = ev.observed * stage_count
            minimal = max(minimal, math.ceil(total / ev.limit - 1e-12))
    return minimal


def compute_subscores(records, plan, evaluation: PlanEvaluation, arch_records=None) -> SubScores:
    """Six aggregate criteria in [0, 1] for a plan on an evaluated arch.

    `records` are the teeth the constraint evaluation ran against; the
    crowding and symmetry criteria read `arch_records` instead when given,
    so arch geometry fixed at planning time keeps those criteria stable
    while the constraint side consumes per-tooth estimates.
    """
    if arch_records is None:
        arch_records = records
    evals = evaluation.evals
    bio = float(np.mean([e.sigma for e in evals])) if evals else 1.0

    pred_values = list(evaluation.predictability.values())
    pred = float(np.mean(pred_values)) if pred_values else 1.0

    minimal = minimal_stage_count(evaluation, plan.stage_count)
    staging = 1.0 if minimal == 0 else min(1.0, minimal / plan.stage_count)

    indicated = {code for code, mv in plan.movements.items() if attachment_indicated(mv)}
    att = len(indicated & plan.attachments) / len(indicated) if indicated else 1.0

    crowded = crowded_contacts(arch_records)
    if crowded:
        errs = [abs(plan.ipr_mm.get(pair, 0.0) - IPR_TARGET_MM) for pair in crowded]
        ipr = 1.0 - min(1.0, float(np.mean(errs)) / IPR_ERROR_SCALE_MM)
    else:
        ipr = 1.0

    with_centroids = [rec for rec in arch_records if rec.centroid is not None]
    if len(with_centroids) >= 2:
        centre = np.mean([rec.centroid for rec in with_centroids], axis=0)
        by_code = {rec.label.code: rec for rec in with_centroids}
        diffs = []
        for rec in with_centroids:
            partner = by_code.get(rec.label.mirrored().code)
            if partner is None or rec.label.quadrant > partner.label.quadrant:
                continue
            d_self = float(np.linalg.norm(rec.centroid - centre))
            d_partner = float(np.linalg.norm(partner.centroid - centre))
            diffs.append(d_self - d_partner)
        if diffs:
            rms = float(np.sqrt(np.mean(np.square(diffs))))
            sym = 1.0 - min(1.0, rms / SYMMETRY_SCALE_MM)
        else:
            sym = 1.0
    else:
        sym = 1.0

    return SubScores(
        biomechanics=bio,
        predictability=pred,
        staging=staging,
        attachments=att,
        ipr=ipr,
        symmetry=sym,
    )


def wavf_score(subscores: SubScores, cfg: WavfConfig):
    """Weighted aggregated value, 0-100, plus its letter grade."""
    total = 0.0
    for name, weight in zip(CRITERIA, cfg.weights):
        value = cfg.value_function(name)(getattr(subscores, name))
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"value function for {name} returned {value}, outside [0, 1]")
        total += weight * value
    score = 100.0 * total
    return score, grade_for(score, cfg)


def grade_for(score, cfg: WavfConfig):
    for threshold, letter in cfg.grade_thresholds:
        if score >= threshold:
            return letter
    return "F"


def sensitivity(subscores: SubScores, cfg: WavfConfig):
    """Score swing per criterion when its weight moves +/-50 % (renormalized).

    The swing is computed in centered form, 100 * sum(d_i * (v_i - v_0))
    with d the weight change: since the renormalized changes sum to zero,
    this equals the direct score difference but cancels the summation
    residue, so equal sub-scores report a swing of exactly zero.

    Returns {criterion: {"raised": S+, "lowered": S-, "max_abs_delta": m}}.
    """
    base, _ = wavf_score(subscores, cfg)
    values = [cfg.value_function(name)(getattr(subscores, name)) for name in CRITERIA]
    frac = cfg.sensitivity_fraction
    out = {}
    for i, name in enumerate(CRITERIA):
        deltas = {}
        for key, direction in (("raised", 1.0), ("lowered", -1.0)):
            w = list(cfg.weights)
            wi = w[i] * (1.0 + direction * frac)
            rest = 1.0 - w[i]
            scale = (1.0 - wi) / rest if rest > 0.0 else 0.0
            perturbed = [wi if j == i else w[j] * scale for j in range(len(w))]
            change = [p - q for p, q in zip(perturbed, w)]
            deltas[key] = 100.0 * sum(
                d * (v - values[0]) for d, v in zip(change, values))
        out[name] = {
            "raised": base + deltas["raised"],
            "lowered": base + deltas["lowered"],
            "max_abs_delta": max(abs(deltas["raised"]), abs(deltas["lowered"])),
        }
    return out


def estimate_duration_months(minimal_stages):
    """Months implied by the minimal stage count at two weeks per stage."""
    if minimal_stages <= 0:
        return 0
    return math.ceil(minimal_stages * DAYS_PER_STAGE / DAYS_PER_MONTH)


def build_assessment(case_id, records, plan, kb: KnowledgeBase, cfg: WavfConfig | None = None,
                     arch_records=None):
    """Full assessment report for one case/plan pair, as a JSON-ready dict."""
    cfg = cfg or WavfConfig()
    evaluation = evaluate_plan(records, plan, kb)
    subscores = compute_subscores(records, plan, evaluation, arch_records=arch_records)
    score, grade = wavf_score(subscores, cfg)
    minimal = minimal_stage_count(evaluation, plan.stage_count)
    report = {
        "case_id": case_id,
        "subscores": subscores.as_dict(),
        "weights": cfg.weight_map(),
        "score": score,
        "grade": grade,
        "duration_months": estimate_duration_months(minimal),
        "alerts": [e.as_dict() for e in evaluation.alerts],
        "predictability": {str(code): p for code, p in sorted(evaluation.predictability.items())},
        "sensitivity": sensitivity(subscores, cfg),
    }
    return report, evaluation
