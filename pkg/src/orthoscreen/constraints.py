"""Per-stage movement limits and graded constraint evaluation.

A movement plan is checked per tooth against typed limit rules. Observed
per-stage magnitudes map to a satisfaction level in [0, 1]:

    1                               if |v| <= limit
    1 - (|v| - limit) / limit       if limit < |v| <= alpha * limit
    0                               if |v| > alpha * limit

Soft rules raise a warning while partially satisfied and a critical alert at
zero satisfaction; hard rules are critical as soon as satisfaction dips below
one. Mesiodistal tip (r_y) is limited in millimetres of crown displacement,
so the observed angle is converted through the crown lever arm first.

Plan components live in the tooth frame: t_x/t_y/t_z translations in mm per
stage (t_z > 0 extrusive), r_x/r_y/r_z rotations in degrees per stage.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cases import FdiLabel, MovementPlan, ToothType
from .errors import DomainError


class MissingRule(DomainError):
    """No rule covers a (component, tooth type) combination."""


class NonPositiveLimit(DomainError):
    """Rule limits must be strictly positive."""


class UnmatchedTooth(DomainError):
    """Plan references a tooth absent from the analysed records."""


COMPONENTS = ("t_x", "t_y", "t_z+", "t_z-", "r_x", "r_y", "r_z")

# Movement kind per component, used to look up predictability.
COMPONENT_KIND = {
    "t_x": "bodily",
    "t_y": "bodily",
    "t_z+": "extrusion",
    "t_z-": "intrusion",
    "r_x": "torque",
    "r_y": "mesiodistal_tip",
    "r_z": "rotation",
}

DEFAULT_PREDICTABILITY = {
    "extrusion": 0.30,
    "rotation": 0.36,
    "bodily": 0.42,
    "intrusion": 0.45,
    "torque": 0.46,
    "mesiodistal_tip": 0.50,
    "labiolingual_tip": 0.56,
}

_SELECTORS = ("all", "anterior", "posterior", "incisor", "canine", "premolar", "molar")

DEFAULT_LEVER_ARM_MM = 8.0


def satisfaction(observed, limit, alpha=1.5):
    """Graded satisfaction of |v| = ``observed`` against a positive limit."""
    if limit <= 0.0 or not math.isfinite(limit):
        raise NonPositiveLimit(f"limit must be positive, got {limit}")
    if alpha <= 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if observed < 0.0 or not math.isfinite(observed):
        raise ValueError(f"observed magnitude must be finite and nonnegative, got {observed}")
    if observed <= limit:
        return 1.0
    if observed > alpha * limit:
        return 0.0
    # clamp keeps the degree in [0, 1] when alpha exceeds 2
    return max(0.0, 1.0 - (observed - limit) / limit)


@dataclass(frozen=True)
class ConstraintRule:
    rule_id: str
    components: tuple
    teeth: str
    limit: float
    unit: str
    kind: str
    note: str = ""

    def __post_init__(self):
        if self.limit <= 0.0 or not math.isfinite(self.limit):
            raise NonPositiveLimit(f"rule {self.rule_id}: limit {self.limit}")
        if self.teeth not in _SELECTORS:
            raise ValueError(f"rule {self.rule_id}: unknown tooth selector {self.teeth!r}")
        if self.kind not in ("soft", "hard"):
            raise ValueError(f"rule {self.rule_id}: kind must be soft or hard")
        if self.unit not in ("mm", "deg"):
            raise ValueError(f"rule {self.rule_id}: unit must be mm or deg")
        for comp in self.components:
            if comp not in COMPONENTS:
                raise ValueError(f"rule {self.rule_id}: unknown component {comp!r}")

    def applies_to(self, tooth_type: ToothType) -> bool:
        if self.teeth == "all":
            return True
        if self.teeth == "anterior":
            return tooth_type.anterior
        if self.teeth == "posterior":
            return not tooth_type.anterior
        return self.teeth == tooth_type.value


@dataclass
class KnowledgeBase:
    version: str
    rules: tuple
    alpha: float = 1.5
    predictability: dict = field(default_factory=lambda: dict(DEFAULT_PREDICTABILITY))

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        for kind, value in self.predictability.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"predictability[{kind!r}] = {value} outside [0, 1]")
        self.check_total()

    def rules_for(self, component, tooth_type: ToothType):
        found = [
            r for r in self.rules
            if component in r.components and r.applies_to(tooth_type)
        ]
        if not found:
            raise MissingRule(f"no rule covers {component} for {tooth_type.value}")
        return found

    def check_total(self):
        """Every (component, tooth type) pair must be covered by some rule."""
        gaps = []
        for comp in COMPONENTS:
            for ttype in ToothType:
                if not any(comp in r.components and r.applies_to(ttype) for r in self.rules):
                    gaps.append(f"{comp}/{ttype.value}")
        if gaps:
            raise MissingRule("uncovered combinations: " + ", ".join(gaps))

    def stage_limit(self, component, tooth_type: ToothType, lever_arm_mm=None):
        """Most restrictive per-stage limit in the component's native unit.

        For r_y the tabulated mm limit is mapped back to degrees through the
        crown lever arm.
        """
        limit = min(r.limit for r in self.rules_for(component, tooth_type))
        if component == "r_y":
            lever = lever_arm_mm if lever_arm_mm else DEFAULT_LEVER_ARM_MM
            return math.degrees(math.asin(min(1.0, limit / lever)))
        return limit


def default_knowledge_base() -> KnowledgeBase:
    rules = (
        ConstraintRule("bodily", ("t_x", "t_y"), "all", 0.25, "mm", "soft",
                       "bodily translation per stage"),
        ConstraintRule("intrusion", ("t_z-",), "all", 0.25, "mm", "soft",
                       "intrusion per stage"),
        ConstraintRule("extrusion-posterior", ("t_z+",), "posterior", 0.20, "mm", "hard",
                       "posterior extrusion per stage"),
        ConstraintRule("extrusion-anterior", ("t_z+",), "anterior", 0.15, "mm", "hard",
                       "anterior extrusion per stage"),
        ConstraintRule("mesiodistal-tip", ("r_y",), "all", 0.25, "mm", "soft",
                       "tip measured as crown displacement"),
        ConstraintRule("rotation-canine", ("r_z",), "canine", 2.0, "deg", "soft",
                       "axial rotation per stage"),
        ConstraintRule("rotation-premolar", ("r_z",), "premolar", 2.0, "deg", "soft",
                       "axial rotation per stage"),
        ConstraintRule("rotation-molar", ("r_z",), "molar", 1.5, "deg", "hard",
                       "molar rotation resists aligners"),
        ConstraintRule("rotation-incisor", ("r_z",), "incisor", 1.5, "deg", "soft",
                       "axial rotation per stage"),
        ConstraintRule("torque", ("r_x",), "all", 2.0, "deg", "soft",
                       "buccolingual root torque per stage"),
    )
    return KnowledgeBase(version="movement-limits-v1", rules=rules)


@dataclass(frozen=True, eq=False)
class ToothRecord:
    """Geometric facts about one analysed tooth, as far as they are known."""

    label: FdiLabel
    centroid: np.ndarray | None = None
    mesiodistal_semi_axis: float | None = None
    vertical_semi_axis: float | None = None


def records_from_case(case):
    """ToothRecords straight from ground-truth landmarks."""
    records = []
    for ls in case.teeth:
        frame = ls.frame()
        a1, _, a3 = ls.semi_axes()
        records.append(ToothRecord(
            label=ls.tooth,
            centroid=frame.origin,
            mesiodistal_semi_axis=a1,
            vertical_semi_axis=a3,
        ))
    return records


@dataclass(frozen=True)
class ConstraintEval:
    tooth: int
    rule_id: str
    component: str
    observed: float
    limit: float
    sigma: float
    kind: str
    severity: str

    def as_dict(self):
        return {
            "tooth": self.tooth,
            "rule": self.rule_id,
            "component": self.component,
            "observed": self.observed,
            "limit": self.limit,
            "sigma": self.sigma,
            "kind": self.kind,
            "severity": self.severity,
        }


@dataclass
class PlanEvaluation:
    evals: tuple
    predictability: dict

    @property
    def alerts(self):
        return tuple(e for e in self.evals if e.severity != "none")

    @property
    def mean_sigma(self):
        if not self.evals:
            return 1.0
        return float(np.mean([e.sigma for e in self.evals]))


def _severity(kind, sigma):
    if kind == "hard":
        return "critical" if sigma < 1.0 else "none"
    if sigma == 0.0:
        return "critical"
    if sigma < 1.0:
        return "warning"
    return "none"


def component_magnitudes(movement, lever_arm_mm=None):
    """Observed per-stage magnitudes keyed by component, in rule units."""
    t = movement.translation_mm
    r = movement.rotation_deg
    lever = lever_arm_mm if lever_arm_mm else DEFAULT_LEVER_ARM_MM
    return {
        "t_x": abs(float(t[0])),
        "t_y": abs(float(t[1])),
        "t_z+": max(float(t[2]), 0.0),
        "t_z-": max(-float(t[2]), 0.0),
        "r_x": abs(float(r[0])),
        "r_y": abs(math.sin(math.radians(float(r[1])))) * lever,
        "r_z": abs(float(r[2])),
    }


def evaluate_plan(records, plan: MovementPlan, kb: KnowledgeBase,
                  values_are_totals=False) -> PlanEvaluation:
    """Evaluate every applicable rule for every planned tooth.

    ``records`` supply per-tooth geometry (lever arms). Every component of a
    planned movement is scored, including zero components, so the result is a
    complete satisfaction table. Predictability is assigned per moved tooth
    from its dominant (most limit-loading) component.
    """
    by_code = {rec.label.code: rec for rec in records}
    evals = []
    predictability = {}
    for code in sorted(plan.movements):
        movement = plan.movements[code]
        rec = by_code.get(code)
        if rec is None:
            raise UnmatchedTooth(f"plan moves tooth {code} which is not among the records")
        if values_are_totals:
            movement = type(movement)(
                translation_mm=movement.translation_mm / plan.stage_count,
                rotation_deg=movement.rotation_deg / plan.stage_count,
            )
        ttype = rec.label.tooth_type
        observed = component_magnitudes(movement, rec.vertical_semi_axis)
        loads = {}
        for comp in COMPONENTS:
            obs = observed[comp]
            best_load = 0.0
            for rule in kb.rules_for(comp, ttype):
                sigma = satisfaction(obs, rule.limit, kb.alpha)
                evals.append(ConstraintEval(
                    tooth=code,
                    rule_id=rule.rule_id,
                    component=comp,
                    observed=obs,
                    limit=rule.limit,
                    sigma=sigma,
                    kind=rule.kind,
                    severity=_severity(rule.kind, sigma),
                ))
                best_load = max(best_load, obs / rule.limit)
            loads[comp] = best_load
        if any(v > 0.0 for v in loads.values()):
            dominant = max(COMPONENTS, key=lambda c: loads[c])
            predictability[code] = float(kb.predictability[COMPONENT_KIND[dominant]])
    return PlanEvaluation(evals=tuple(evals), predictability=predictability)


def kb_to_json(kb: KnowledgeBase) -> bytes:
    doc = {
        "version": kb.version,
        "alpha": kb.alpha,
        "predictability": dict(sorted(kb.predictability.items())),
        "rules": [
            {
                "rule_id": r.rule_id,
                "components": list(r.components),
                "teeth": r.teeth,
                "limit": r.limit,
                "unit": r.unit,
                "kind": r.kind,
                "note": r.note,
            }
            for r in kb.rules
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def kb_from_json(data) -> KnowledgeBase:
    """Load a knowledge base; accepts the full object or a bare rule list."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    obj = json.loads(data)
    if isinstance(obj, list):
        obj = {"rules": obj}
    if not isinstance(obj, dict) or "rules" not in obj:
        raise ValueError("knowledge base JSON must be a rule list or an object with 'rules'")
    rules = tuple(
        ConstraintRule(
            rule_id=str(entry["rule_id"]),
            components=tuple(entry["components"]),
            teeth=str(entry["teeth"]),
            limit=float(entry["limit"]),
            unit=str(entry["unit"]),
            kind=str(entry["kind"]),
            note=str(entry.get("note", "")),
        )
        for entry in obj["rules"]
    )
    return KnowledgeBase(
        version=str(obj.get("version", "custom")),
        rules=rules,
        alpha=float(obj.get("alpha", 1.5)),
        predictability=dict(obj.get("predictability", DEFAULT_PREDICTABILITY)),
    )
