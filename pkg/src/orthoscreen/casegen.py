"""Synthetic arch cases and movement plans.

Tooth centres are laid out by arc length along a parabolic arch curve in the
z = 0 plane, with per-type crown dimensions. Landmarks are placed from the
local tangent/outward-normal directions, cusps toward +z, then jittered with
Gaussian noise. Plans draw per-stage component magnitudes as fractions of the
applicable rule limits, which makes the severity classes exact by
construction:

    compliant   every component at <= 0.8x its limit (no alerts)
    borderline  compliant, then one soft-limited component per tooth pushed
                into (1.0, 1.5)x its limit with probability 0.3 (warnings)
    violating   at least one component beyond 1.5x its limit (critical)
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cases import ArchCase, FdiLabel, LandmarkSet, MovementPlan, ToothMovement, ToothType
from .constraints import COMPONENTS, KnowledgeBase, default_knowledge_base, records_from_case
from .scoring import attachment_indicated, crowded_contacts

DEFAULT_CROWN_MM = {
    ToothType.INCISOR: (8.5, 7.5, 12.0),
    ToothType.CANINE: (8.0, 9.0, 12.5),
    ToothType.PREMOLAR: (7.0, 10.0, 10.0),
    ToothType.MOLAR: (10.5, 12.0, 9.0),
}

_CUSP_COUNT = {
    ToothType.INCISOR: 1,
    ToothType.CANINE: 1,
    ToothType.PREMOLAR: 2,
    ToothType.MOLAR: 4,
}

SEVERITIES = ("compliant", "borderline", "violating")


@dataclass
class CaseGenConfig:
    tooth_count: int = 14
    arch: str = "upper"
    apex_radius_mm: float = 10.0
    contact_gap_mm: float = 0.0
    landmark_jitter_mm: float = 0.15
    crowding_mm: float = 0.0
    crown_mm: dict = field(default_factory=lambda: dict(DEFAULT_CROWN_MM))

    def __post_init__(self):
        if not 1 <= self.tooth_count <= 16:
            raise ValueError(f"tooth_count must be 1..16, got {self.tooth_count}")
        if self.arch not in ("upper", "lower"):
            raise ValueError(f"arch must be upper or lower, got {self.arch!r}")
        if self.apex_radius_mm <= 0:
            raise ValueError("apex_radius_mm must be positive")
        if self.landmark_jitter_mm < 0:
            raise ValueError("landmark_jitter_mm must be nonnegative")


def _arc_table(radius, x_max=80.0, step=0.01):
    """Cumulative arc length along y = -x^2 / (2R), tabulated for inversion."""
    x = np.arange(0.0, x_max + step, step)
    ds = np.sqrt(1.0 + (x / radius) ** 2)
    s = np.concatenate([[0.0], np.cumsum((ds[1:] + ds[:-1]) * 0.5 * step)])
    return x, s


def _side_codes(arch, side, count):
    if arch == "upper":
        quadrant = 1 if side == "right" else 2
    else:
        quadrant = 4 if side == "right" else 3
    return [quadrant * 10 + pos for pos in range(1, count + 1)]


def generate_case(seed, cfg: CaseGenConfig | None = None, case_id=None) -> ArchCase:
    """Deterministic synthetic arch for a seed. Teeth are ordered across the
    arch from right posterior to left posterior."""
    cfg = cfg or CaseGenConfig()
    rng = np.random.default_rng(seed)
    case_id = case_id or f"synth-{seed:05d}"

    n_right = (cfg.tooth_count + 1) // 2
    n_left = cfg.tooth_count - n_right
    codes = list(reversed(_side_codes(cfg.arch, "right", n_right)))
    codes += _side_codes(cfg.arch, "left", n_left)

    x_tab, s_tab = _arc_table(cfg.apex_radius_mm)
    gap = cfg.contact_gap_mm - cfg.crowding_mm
    teeth = []
    for code in codes:
        label = FdiLabel(code)
        md, bl, height = cfg.crown_mm[label.tooth_type]
        side = 1.0 if code in _side_codes(cfg.arch, "right", 8) else -1.0
        # arc-length centre: widths of the teeth between this one and the midline
        inner = 0.0
        for other in codes:
            lo = FdiLabel(other)
            if (other // 10 == code // 10) and lo.position < label.position:
                inner += cfg.crown_mm[lo.tooth_type][0] + gap
        s_centre = gap / 2.0 + inner + md / 2.0
        x = side * float(np.interp(s_centre, s_tab, x_tab))
        y = -x * x / (2.0 * cfg.apex_radius_mm)
        centre = np.array([x, y, 0.0])

        slope = -x / cfg.apex_radius_mm
        tangent = np.array([1.0, slope, 0.0])
        tangent /= np.linalg.norm(tangent)
        outward = np.array([x / cfg.apex_radius_mm, 1.0, 0.0])
        outward /= np.linalg.norm(outward)
        away = tangent * side

        jitter = rng.normal(0.0, cfg.landmark_jitter_mm, size=(5 + _CUSP_COUNT[label.tooth_type], 3))
        mesial = centre - away * (md / 2.0) + jitter[0]
        distal = centre + away * (md / 2.0) + jitter[1]
        buccal = centre + outward * (bl / 2.0) + jitter[2]
        lingual = centre - outward * (bl / 2.0) + jitter[3]
        facial = centre + outward * (bl / 2.0 + 0.5) + np.array([0, 0, 0.25 * height]) + jitter[4]

        up = np.array([0.0, 0.0, height / 2.0])
        lateral = {
            ToothType.INCISOR: [0.0 * away],
            ToothType.CANINE: [0.0 * away],
            ToothType.PREMOLAR: [outward * 0.22 * bl, -outward * 0.22 * bl],
            ToothType.MOLAR: [
                away * 0.22 * md + outward * 0.22 * bl,
                away * 0.22 * md - outward * 0.22 * bl,
                -away * 0.22 * md + outward * 0.22 * bl,
                -away * 0.22 * md - outward * 0.22 * bl,
            ],
        }[label.tooth_type]
        cusps = tuple(centre + up + off + jitter[5 + i] for i, off in enumerate(lateral))

        teeth.append(LandmarkSet(
            tooth=label, mesial=mesial, distal=distal, buccal=buccal,
            lingual=lingual, facial=facial, cusps=cusps,
        ))
    return ArchCase(case_id=case_id, arch=cfg.arch, teeth=tuple(teeth))


@dataclass
class PlanGenConfig:
    stage_range: tuple = (12, 30)
    move_probability: float = 0.8
    compliant_fraction: tuple = (0.1, 0.8)
    borderline_probability: float = 0.3
    borderline_fraction: tuple = (1.02, 1.48)
    violating_fraction: tuple = (1.6, 2.5)


def _soft_components(kb: KnowledgeBase, ttype: ToothType):
    soft = []
    for comp in COMPONENTS:
        if all(r.kind == "soft" for r in kb.rules_for(comp, ttype)):
            soft.append(comp)
    return soft


def _set_component(movement_t, movement_r, comp, value):
    """Write a native-unit component value into the t/r vectors."""
    if comp == "t_x":
        movement_t[0] = value
    elif comp == "t_y":
        movement_t[1] = value
    elif comp == "t_z+":
        movement_t[2] = value
    elif comp == "t_z-":
        movement_t[2] = -value
    elif comp == "r_x":
        movement_r[0] = value
    elif comp == "r_y":
        movement_r[1] = value
    elif comp == "r_z":
        movement_r[2] = value


def generate_plan(case: ArchCase, seed, severity="compliant",
                  cfg: PlanGenConfig | None = None,
                  kb: KnowledgeBase | None = None) -> MovementPlan:
    """Deterministic plan for a case at a named severity level."""
    if severity not in SEVERITIES:
        raise ValueError(f"severity must be one of {SEVERITIES}, got {severity!r}")
    cfg = cfg or PlanGenConfig()
    kb = kb or default_knowledge_base()
    rng = np.random.default_rng(seed)
    records = records_from_case(case)
    by_code = {rec.label.code: rec for rec in records}

    movements = {}
    for ls in case.teeth:
        code = ls.tooth.code
        ttype = ls.tooth.tooth_type
        lever = by_code[code].vertical_semi_axis
        t = np.zeros(3)
        r = np.zeros(3)
        if rng.random() < cfg.move_probability:
            extrusive = rng.random() < 0.5
            for comp in COMPONENTS:
                if comp == ("t_z-" if extrusive else "t_z+"):
                    rng.random()  # keep the draw count independent of direction
                    continue
                frac = rng.uniform(*cfg.compliant_fraction)
                sign = 1.0 if comp in ("t_z+", "t_z-") else (1.0 if rng.random() < 0.5 else -1.0)
                limit = kb.stage_limit(comp, ttype, lever)
                _set_component(t, r, comp, sign * frac * limit)
            if severity == "borderline" and rng.random() < cfg.borderline_probability:
                soft = _soft_components(kb, ttype)
                comp = soft[rng.integers(len(soft))]
                frac = rng.uniform(*cfg.borderline_fraction)
                _set_component(t, r, comp, frac * kb.stage_limit(comp, ttype, lever))
        movements[code] = ToothMovement(translation_mm=t, rotation_deg=r)

    if severity == "violating":
        moved = [c for c, mv in movements.items() if not mv.is_zero()] or list(movements)
        count = 1 + int(rng.integers(3))
        for _ in range(count):
            code = moved[rng.integers(len(moved))]
            comp = COMPONENTS[rng.integers(len(COMPONENTS))]
            ttype = FdiLabel(code).tooth_type
            lever = by_code[code].vertical_semi_axis
            frac = rng.uniform(*cfg.violating_fraction)
            mv = movements[code]
            _set_component(mv.translation_mm, mv.rotation_deg, comp,
                           frac * kb.stage_limit(comp, ttype, lever))

    indicated = sorted(c for c, mv in movements.items() if attachment_indicated(mv))
    keep = {"compliant": 1.0, "borderline": 0.75, "violating": 0.5}[severity]
    attachments = frozenset(c for c in indicated if rng.random() < keep)

    ipr = {}
    for pair in crowded_contacts(records):
        ipr[pair] = float(np.round(rng.uniform(0.15, 0.35), 3))

    return MovementPlan(
        case_id=case.case_id,
        stage_count=int(rng.integers(cfg.stage_range[0], cfg.stage_range[1] + 1)),
        movements=movements,
        attachments=attachments,
        ipr_mm=ipr,
    )
