"""Case model: FDI tooth labels, landmark sets, arches and movement plans.

All positions are world millimetres. Movement plans carry per-stage values in
the tooth's local frame (e1 mesiodistal, e2 buccolingual, e3 = e1 x e2);
translations in mm, rotations in degrees, with t_z > 0 extrusive by
convention of the plan format.

JSON wire formats:

case  {"case_id", "arch": "upper"|"lower",
       "teeth": [{"fdi", "landmarks": [{"category", "position": [x,y,z]}]}]}
plan  {"case_id", "stage_count",
       "movements": [{"fdi", "t": [3], "r": [3]}],
       "attachments": [fdi], "ipr_mm": [{"contact": [fdi,fdi], "mm"}]}

Serialization is canonical (sorted object keys, movements/attachments/ipr
sorted, fixed float repr), so equal structures produce identical bytes and
``parse(serialize(x))`` round-trips exactly.
"""

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import Frame3, build_tooth_frame


class SchemaError(DomainError):
    """Input JSON does not satisfy the documented schema."""


class InvalidFdi(DomainError):
    """Tooth code outside the two-digit FDI ranges 11-18/21-28/31-38/41-48."""


class DuplicateTooth(DomainError):
    """The same FDI code appears twice in one case or plan."""


CLASS_COUNT = 33
GINGIVA_CLASS = 0


class ToothType(str, enum.Enum):
    INCISOR = "incisor"
    CANINE = "canine"
    PREMOLAR = "premolar"
    MOLAR = "molar"

    @property
    def anterior(self):
        return self in (ToothType.INCISOR, ToothType.CANINE)


_POSITION_TYPE = {
    1: ToothType.INCISOR,
    2: ToothType.INCISOR,
    3: ToothType.CANINE,
    4: ToothType.PREMOLAR,
    5: ToothType.PREMOLAR,
    6: ToothType.MOLAR,
    7: ToothType.MOLAR,
    8: ToothType.MOLAR,
}


@dataclass(frozen=True, order=True)
class FdiLabel:
    """Validated FDI two-digit tooth designation."""

    code: int

    def __post_init__(self):
        if not isinstance(self.code, int) or isinstance(self.code, bool):
            raise InvalidFdi(f"FDI code must be an int, got {self.code!r}")
        q, p = divmod(self.code, 10)
        if q not in (1, 2, 3, 4) or p not in _POSITION_TYPE:
            raise InvalidFdi(f"{self.code} is not a valid FDI tooth code")

    @property
    def quadrant(self):
        return self.code // 10

    @property
    def position(self):
        return self.code % 10

    @property
    def arch(self):
        return "upper" if self.quadrant in (1, 2) else "lower"

    @property
    def tooth_type(self):
        return _POSITION_TYPE[self.position]

    @property
    def class_index(self):
        """Segmentation class in 1..32; class 0 is gingiva/background."""
        return (self.quadrant - 1) * 8 + self.position

    @classmethod
    def from_class_index(cls, index):
        if not 1 <= index <= 32:
            raise InvalidFdi(f"class index {index} outside 1..32")
        q, p = divmod(index - 1, 8)
        return cls((q + 1) * 10 + p + 1)

    def mirrored(self):
        """Contralateral tooth (quadrant 1<->2, 3<->4, same position)."""
        partner = {1: 2, 2: 1, 3: 4, 4: 3}[self.quadrant]
        return FdiLabel(partner * 10 + self.position)


ALL_FDI_CODES = tuple(
    q * 10 + p for q in (1, 2, 3, 4) for p in range(1, 9)
)


def _vec3(value, what):
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise SchemaError(f"{what} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{what} has non-finite coordinates")
    return arr


@dataclass(eq=False)
class LandmarkSet:
    """Crown landmarks for one tooth. facial is informational and optional."""

    tooth: FdiLabel
    mesial: np.ndarray
    distal: np.ndarray
    buccal: np.ndarray
    lingual: np.ndarray
    facial: np.ndarray | None = None
    cusps: tuple[np.ndarray, ...] = ()

    def frame(self) -> Frame3:
        return build_tooth_frame(self.mesial, self.distal, self.buccal, self.lingual)

    def semi_axes(self):
        """(a1, a2, a3) crown semi-extents in mm along the tooth frame axes.

        a3 comes from the farthest cusp along e3; without cusps it falls back
        to 0.8 * max(a1, a2).
        """
        frame = self.frame()
        a1 = float(np.linalg.norm(self.distal - self.mesial)) / 2.0
        a2 = float(np.linalg.norm(self.buccal - self.lingual)) / 2.0
        if self.cusps:
            a3 = max(abs(float(frame.e3 @ (c - frame.origin))) for c in self.cusps)
        else:
            a3 = 0.8 * max(a1, a2)
        return a1, a2, a3


@dataclass(eq=False)
class ArchCase:
    """One dental arch: ordered landmark sets, unique FDI codes."""

    case_id: str
    arch: str
    teeth: tuple[LandmarkSet, ...]
    warnings: tuple[str, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.case_id or not isinstance(self.case_id, str):
            raise SchemaError("case_id must be a non-empty string")
        if self.arch not in ("upper", "lower"):
            raise SchemaError(f"arch must be 'upper' or 'lower', got {self.arch!r}")
        if not 1 <= len(self.teeth) <= 16:
            raise SchemaError(f"a case needs 1..16 teeth, got {len(self.teeth)}")
        seen = set()
        for ls in self.teeth:
            if ls.tooth.code in seen:
                raise DuplicateTooth(f"tooth {ls.tooth.code} appears twice")
            seen.add(ls.tooth.code)
            if ls.tooth.arch != self.arch:
                raise SchemaError(
                    f"tooth {ls.tooth.code} belongs to the {ls.tooth.arch} arch, "
                    f"case is {self.arch}"
                )

    def tooth(self, code: int) -> LandmarkSet:
        for ls in self.teeth:
            if ls.tooth.code == code:
                return ls
        raise KeyError(code)

    def fdi_codes(self):
        return tuple(ls.tooth.code for ls in self.teeth)


@dataclass(eq=False)
class ToothMovement:
    """Per-stage movement in the tooth frame: mm translations, deg rotations."""

    translation_mm: np.ndarray
    rotation_deg: np.ndarray

    def __post_init__(self):
        self.translation_mm = _vec3(self.translation_mm, "translation")
        self.rotation_deg = _vec3(self.rotation_deg, "rotation")

    def is_zero(self):
        return not (np.any(self.translation_mm) or np.any(self.rotation_deg))


@dataclass(eq=False)
class MovementPlan:
    case_id: str
    stage_count: int
    movements: dict[int, ToothMovement]
    attachments: frozenset[int] = frozenset()
    ipr_mm: dict[frozenset, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.case_id or not isinstance(self.case_id, str):
            raise SchemaError("case_id must be a non-empty string")
        if not isinstance(self.stage_count, int) or self.stage_count < 1:
            raise SchemaError(f"stage_count must be a positive int, got {self.stage_count!r}")
        for code in self.movements:
            FdiLabel(code)
        for code in self.attachments:
            FdiLabel(code)
        for pair, mm in self.ipr_mm.items():
            if len(pair) != 2:
                raise SchemaError(f"ipr contact must join two distinct teeth: {sorted(pair)}")
            for code in pair:
                FdiLabel(code)
            if not (math.isfinite(mm) and mm >= 0.0):
                raise SchemaError(f"ipr amount must be finite and nonnegative, got {mm}")


_SINGLE_CATEGORIES = ("mesial", "distal", "buccal", "lingual", "facial")


def _load_json(data, what):
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="strict")
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{what} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be a JSON object")
    return obj


def _require(obj, key, what):
    if key not in obj:
        raise SchemaError(f"{what} is missing required field '{key}'")
    return obj[key]


def parse_case(data) -> ArchCase:
    """Parse case JSON. Unknown landmark categories are skipped and noted in
    ``case.warnings``; missing required landmarks raise SchemaError."""
    obj = _load_json(data, "case file")
    case_id = _require(obj, "case_id", "case")
    arch = _require(obj, "arch", "case")
    raw_teeth = _require(obj, "teeth", "case")
    if not isinstance(raw_teeth, list):
        raise SchemaError("'teeth' must be a list")
    warnings = []
    teeth = []
    for entry in raw_teeth:
        if not isinstance(entry, dict):
            raise SchemaError("each tooth entry must be an object")
        fdi = FdiLabel(_require(entry, "fdi", "tooth entry"))
        raw_marks = _require(entry, "landmarks", f"tooth {fdi.code}")
        singles: dict[str, np.ndarray] = {}
        cusps = []
        for mark in raw_marks:
            if not isinstance(mark, dict):
                raise SchemaError(f"tooth {fdi.code}: landmark entries must be objects")
            cat = _require(mark, "category", f"tooth {fdi.code} landmark")
            pos = _vec3(_require(mark, "position", f"tooth {fdi.code} landmark"),
                        f"tooth {fdi.code} {cat} position")
            if cat == "cusp":
                cusps.append(pos)
            elif cat in _SINGLE_CATEGORIES:
                if cat in singles:
                    raise SchemaError(f"tooth {fdi.code}: duplicate landmark '{cat}'")
                singles[cat] = pos
            else:
                warnings.append(f"tooth {fdi.code}: unknown landmark category '{cat}' ignored")
        for cat in ("mesial", "distal", "buccal", "lingual"):
            if cat not in singles:
                raise SchemaError(f"tooth {fdi.code} is missing landmark '{cat}'")
        teeth.append(LandmarkSet(
            tooth=fdi,
            mesial=singles["mesial"],
            distal=singles["distal"],
            buccal=singles["buccal"],
            lingual=singles["lingual"],
            facial=singles.get("facial"),
            cusps=tuple(cusps),
        ))
    return ArchCase(case_id=case_id, arch=arch, teeth=tuple(teeth), warnings=tuple(warnings))


def _landmark_entries(ls: LandmarkSet):
    for cat in _SINGLE_CATEGORIES:
        pos = getattr(ls, cat)
        if pos is not None:
            yield {"category": cat, "position": [float(v) for v in pos]}
    for cusp in ls.cusps:
        yield {"category": "cusp", "position": [float(v) for v in cusp]}


def serialize_case(case: ArchCase) -> bytes:
    doc = {
        "case_id": case.case_id,
        "arch": case.arch,
        "teeth": [
            {"fdi": ls.tooth.code, "landmarks": list(_landmark_entries(ls))}
            for ls in case.teeth
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def parse_plan(data) -> MovementPlan:
    obj = _load_json(data, "plan file")
    case_id = _require(obj, "case_id", "plan")
    stage_count = _require(obj, "stage_count", "plan")
    if not isinstance(stage_count, int) or isinstance(stage_count, bool):
        raise SchemaError(f"stage_count must be an int, got {stage_count!r}")
    raw_moves = _require(obj, "movements", "plan")
    if not isinstance(raw_moves, list):
        raise SchemaError("'movements' must be a list")
    movements = {}
    for entry in raw_moves:
        if not isinstance(entry, dict):
            raise SchemaError("each movement entry must be an object")
        fdi = FdiLabel(_require(entry, "fdi", "movement entry"))
        if fdi.code in movements:
            raise DuplicateTooth(f"movement for tooth {fdi.code} appears twice")
        movements[fdi.code] = ToothMovement(
            translation_mm=_vec3(_require(entry, "t", f"movement {fdi.code}"), "t"),
            rotation_deg=_vec3(_require(entry, "r", f"movement {fdi.code}"), "r"),
        )
    attachments = frozenset(
        FdiLabel(code).code for code in obj.get("attachments", ())
    )
    ipr = {}
    for entry in obj.get("ipr_mm", ()):
        if not isinstance(entry, dict):
            raise SchemaError("each ipr entry must be an object")
        contact = _require(entry, "contact", "ipr entry")
        if not (isinstance(contact, list) and len(contact) == 2 and contact[0] != contact[1]):
            raise SchemaError(f"ipr contact must list two distinct teeth, got {contact!r}")
        pair = frozenset(FdiLabel(c).code for c in contact)
        if pair in ipr:
            raise SchemaError(f"duplicate ipr contact {sorted(pair)}")
        mm = _require(entry, "mm", "ipr entry")
        ipr[pair] = float(mm)
    return MovementPlan(
        case_id=case_id,
        stage_count=stage_count,
        movements=movements,
        attachments=attachments,
        ipr_mm=ipr,
    )


def serialize_plan(plan: MovementPlan) -> bytes:
    doc = {
        "case_id": plan.case_id,
        "stage_count": plan.stage_count,
        "movements": [
            {
                "fdi": code,
                "t": [float(v) for v in mv.translation_mm],
                "r": [float(v) for v in mv.rotation_deg],
            }
            for code, mv in sorted(plan.movements.items())
        ],
        "attachments": sorted(plan.attachments),
        "ipr_mm": [
            {"contact": sorted(pair), "mm": float(mm)}
            for pair, mm in sorted(plan.ipr_mm.items(), key=lambda kv: sorted(kv[0]))
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
