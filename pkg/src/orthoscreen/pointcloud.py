"""Labeled point-cloud synthesis from landmark cases.

Teeth become noisy ellipsoid shells (semi-axes from the landmark spans, a
fifth of each tooth's budget re-drawn around cusp tips), gingiva becomes
uniform background points kept only beyond a margin from every tooth centre.
The raw cloud is farthest-point subsampled to a fixed size and carries six
per-point features derived from arch-normalized coordinates:

    f0..f2  normalized x, y, z
    f3      normalized distance to the arch centroid
    f4      normalized height (duplicates f2 by design)
    f5      normalized radial distance in the xy plane

Point budgets split across teeth proportionally to ellipsoid surface area
(Thomsen approximation), apportioned by largest remainder so they sum
exactly. The whole construction is a pure function of (case, seed, config).
"""

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .cases import ArchCase, SchemaError
from .errors import DomainError
from .geometry import farthest_point_sample, rotation_about_z


class RejectionStall(DomainError):
    """Gingiva sampling cannot reach its budget at a sane acceptance rate."""


class ZeroScale(DomainError):
    """Cloud has no spatial extent; features are undefined."""


@dataclass
class SynthConfig:
    surface_noise_mm: float = 0.3
    cusp_fraction: float = 0.2
    cusp_variance_mm2: float = 0.1
    gingiva_fraction: float = 0.30
    gingiva_margin_mm: float = 1.5
    aabb_inflation_mm: float = 3.0
    raw_points: int = 3000
    sample_points: int = 1000
    area_exponent: float = 1.6075
    stall_factor: int = 100
    stall_min_yield: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gingiva_fraction < 1.0:
            raise ValueError(f"gingiva_fraction must be in (0, 1), got {self.gingiva_fraction}")
        if self.surface_noise_mm < 0 or self.cusp_variance_mm2 < 0:
            raise ValueError("noise parameters must be nonnegative")
        if not 0.0 <= self.cusp_fraction <= 1.0:
            raise ValueError(f"cusp_fraction must be in [0, 1], got {self.cusp_fraction}")
        if self.gingiva_margin_mm < 0 or self.aabb_inflation_mm < 0:
            raise ValueError("margins must be nonnegative")
        if self.sample_points < 1 or self.raw_points < self.sample_points:
            raise ValueError(
                f"need raw_points >= sample_points >= 1, got "
                f"{self.raw_points}/{self.sample_points}"
            )

    def digest(self):
        doc = json.dumps(self.__dict__, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(doc.encode()).hexdigest()[:12]


@dataclass(eq=False)
class LabeledCloud:
    positions: np.ndarray
    labels: np.ndarray
    features: np.ndarray
    arch_centroid: np.ndarray
    arch_scale: float
    case_id: str
    seed: int
    config_digest: str

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.positions.shape != (n, 3) or self.labels.shape != (n,) \
                or self.features.shape != (n, 6):
            raise ValueError("inconsistent cloud array shapes")


def compute_features(positions, centroid=None, scale=None):
    """Six-feature matrix plus the (centroid, scale) normalization used."""
    pts = np.asarray(positions, dtype=np.float64)
    if centroid is None:
        centroid = pts.mean(axis=0)
    if scale is None:
        scale = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
    if not scale > 0.0:
        raise ZeroScale("all points coincide with the arch centroid")
    norm = (pts - centroid) / scale
    radial = np.sqrt(norm[:, 0] ** 2 + norm[:, 1] ** 2)
    features = np.column_stack([
        norm,
        np.linalg.norm(norm, axis=1),
        norm[:, 2],
        radial,
    ])
    return features, np.asarray(centroid, dtype=np.float64), scale


def ellipsoid_area(a, b, c, p=1.6075):
    """Thomsen's approximation of ellipsoid surface area."""
    return 4.0 * np.pi * (((a * b) ** p + (a * c) ** p + (b * c) ** p) / 3.0) ** (1.0 / p)


def _apportion(total, weights):
    """Integer split of ``total`` proportional to weights (largest remainder)."""
    weights = np.asarray(weights, dtype=np.float64)
    raw = total * weights / weights.sum()
    base = np.floor(raw).astype(int)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def _unit_sphere(rng, n):
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    np.maximum(norms, 1e-300, out=norms)
    return v / norms


def synthesize_cloud(case: ArchCase, seed, cfg: SynthConfig | None = None) -> LabeledCloud:
    """Sample, label and subsample one case into a fixed-size cloud."""
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(seed)

    frames = [ls.frame() for ls in case.teeth]
    semi = [ls.semi_axes() for ls in case.teeth]
    areas = [ellipsoid_area(*axes, p=cfg.area_exponent) for axes in semi]
    centroids = np.stack([f.origin for f in frames])

    gingiva_budget = int(round(cfg.raw_points * cfg.gingiva_fraction))
    tooth_budgets = _apportion(cfg.raw_points - gingiva_budget, areas)

    chunks = []
    label_chunks = []
    for ls, frame, axes, budget in zip(case.teeth, frames, semi, tooth_budgets):
        n_cusp = int(round(cfg.cusp_fraction * budget)) if ls.cusps else 0
        n_surf = budget - n_cusp
        xi = _unit_sphere(rng, n_surf)
        surface = frame.origin + (xi * np.asarray(axes)) @ frame.axes
        surface = surface + rng.normal(0.0, cfg.surface_noise_mm, size=(n_surf, 3))
        parts = [surface]
        if n_cusp:
            tips = np.stack(ls.cusps)
            picks = rng.integers(len(tips), size=n_cusp)
            parts.append(tips[picks] + rng.normal(
                0.0, np.sqrt(cfg.cusp_variance_mm2), size=(n_cusp, 3)))
        chunk = np.concatenate(parts)
        chunks.append(chunk)
        label_chunks.append(np.full(budget, ls.tooth.class_index, dtype=np.int64))

    # inflate the centroid box in the arch plane only; letting candidates float
    # 3 mm above and below the arch plane starves teeth of subsample slots
    inflation = np.array([cfg.aabb_inflation_mm, cfg.aabb_inflation_mm, 0.0])
    lo = centroids.min(axis=0) - inflation
    hi = centroids.max(axis=0) + inflation
    accepted = []
    n_accepted = 0
    n_candidates = 0
    margin_sq = cfg.gingiva_margin_mm ** 2
    while n_accepted < gingiva_budget:
        batch = max(2 * (gingiva_budget - n_accepted), 256)
        cand = rng.uniform(lo, hi, size=(batch, 3))
        d2 = ((cand[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        keep = cand[d2.min(axis=1) > margin_sq]
        n_candidates += batch
        n_accepted += len(keep)
        accepted.append(keep)
        if n_candidates >= cfg.stall_factor * gingiva_budget \
                and n_accepted < cfg.stall_min_yield * gingiva_budget:
            raise RejectionStall(
                f"gingiva sampling accepted {n_accepted}/{gingiva_budget} "
                f"after {n_candidates} candidates"
            )
    gingiva = np.concatenate(accepted)[:gingiva_budget]
    chunks.append(gingiva)
    label_chunks.append(np.zeros(gingiva_budget, dtype=np.int64))

    positions = np.concatenate(chunks)
    labels = np.concatenate(label_chunks)

    picked = farthest_point_sample(positions, cfg.sample_points)
    positions = positions[picked]
    labels = labels[picked]
    features, centroid, scale = compute_features(positions)

    return LabeledCloud(
        positions=positions,
        labels=labels,
        features=features,
        arch_centroid=centroid,
        arch_scale=scale,
        case_id=case.case_id,
        seed=int(seed),
        config_digest=cfg.digest(),
    )


@dataclass
class AugmentConfig:
    rotate: bool = True
    noise_sigma: float = 0.05
    drop_fraction_max: float = 0.20

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0.0 <= self.drop_fraction_max < 1.0:
            raise ValueError("drop_fraction_max must be in [0, 1)")


def augment(cloud: LabeledCloud, seed, cfg: AugmentConfig | None = None) -> LabeledCloud:
    """Random rigid rotation about z, coordinate noise, and point drop with
    re-padding by duplication. Point count and label correspondence are
    preserved; features and normalization are recomputed."""
    cfg = cfg or AugmentConfig()
    rng = np.random.default_rng(seed)
    positions = cloud.positions.copy()
    labels = cloud.labels.copy()

    if cfg.rotate:
        theta = rng.uniform(0.0, 2.0 * np.pi)
        rot = rotation_about_z(theta)
        positions = (positions - cloud.arch_centroid) @ rot.T + cloud.arch_centroid

    # noise is specified on normalized coordinates; equivalent world-space sigma
    positions = positions + rng.normal(0.0, cfg.noise_sigma, size=positions.shape) \
        * cloud.arch_scale

    n = positions.shape[0]
    max_drop = int(np.floor(cfg.drop_fraction_max * n))
    if max_drop > 0:
        drop = int(rng.integers(0, max_drop + 1))
        if drop > 0:
            gone = rng.choice(n, size=drop, replace=False)
            mask = np.ones(n, dtype=bool)
            mask[gone] = False
            positions = positions[mask]
            labels = labels[mask]
            pads = rng.integers(0, n - drop, size=drop)
            positions = np.concatenate([positions, positions[pads]])
            labels = np.concatenate([labels, labels[pads]])

    features, centroid, scale = compute_features(positions)
    return replace(
        cloud,
        positions=positions,
        labels=labels,
        features=features,
        arch_centroid=centroid,
        arch_scale=scale,
    )


_PLY_PROPERTIES = (
    "property double x",
    "property double y",
    "property double z",
    "property uchar label",
    "property double f0",
    "property double f1",
    "property double f2",
    "property double f3",
    "property double f4",
    "property double f5",
)


def cloud_to_ply(cloud: LabeledCloud) -> bytes:
    """ASCII PLY with full float64 precision and metadata comments."""
    if cloud.labels.min() < 0 or cloud.labels.max() > 255:
        raise ValueError("labels must fit in uchar")
    n = cloud.positions.shape[0]
    head = [
        "ply",
        "format ascii 1.0",
        f"comment case_id={cloud.case_id}",
        f"comment seed={cloud.seed}",
        f"comment config={cloud.config_digest}",
        "comment arch_centroid=" + " ".join(repr(float(v)) for v in cloud.arch_centroid),
        f"comment arch_scale={float(cloud.arch_scale)!r}",
        f"element vertex {n}",
        *_PLY_PROPERTIES,
        "end_header",
    ]
    rows = []
    for i in range(n):
        cells = [repr(float(v)) for v in cloud.positions[i]]
        cells.append(str(int(cloud.labels[i])))
        cells.extend(repr(float(v)) for v in cloud.features[i])
        rows.append(" ".join(cells))
    return ("\n".join(head) + "\n" + "\n".join(rows) + "\n").encode()


def ply_to_cloud(data: bytes) -> LabeledCloud:
    text = data.decode("utf-8", errors="strict")
    lines = text.splitlines()
    if not lines or lines[0] != "ply":
        raise SchemaError("not a PLY file")
    meta = {}
    count = None
    props = []
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        if line == "end_header":
            body_at = i + 1
            break
        if line.startswith("comment "):
            payload = line[len("comment "):]
            if "=" in payload:
                key, value = payload.split("=", 1)
                meta[key] = value
        elif line.startswith("element vertex "):
            count = int(line.split()[-1])
        elif line.startswith("property "):
            props.append(line)
        elif line == "format ascii 1.0":
            continue
        else:
            raise SchemaError(f"unexpected header line: {line!r}")
    if body_at is None or count is None:
        raise SchemaError("PLY header is incomplete")
    if tuple(props) != _PLY_PROPERTIES:
        raise SchemaError("PLY property layout does not match the cloud format")
    for key in ("case_id", "seed", "config", "arch_centroid", "arch_scale"):
        if key not in meta:
            raise SchemaError(f"PLY metadata is missing '{key}'")
    body = [ln for ln in lines[body_at:] if ln]
    if len(body) != count:
        raise SchemaError(f"expected {count} vertex rows, found {len(body)}")
    cells = np.array([row.split() for row in body], dtype=object)
    if cells.shape[1] != 10:
        raise SchemaError("vertex rows must have 10 columns")
    positions = cells[:, 0:3].astype(np.float64)
    labels = cells[:, 3].astype(np.int64)
    features = cells[:, 4:10].astype(np.float64)
    return LabeledCloud(
        positions=positions,
        labels=labels,
        features=features,
        arch_centroid=np.array([float(v) for v in meta["arch_centroid"].split()]),
        arch_scale=float(meta["arch_scale"]),
        case_id=meta["case_id"],
        seed=int(meta["seed"]),
        config_digest=meta["config"],
    )


def write_ply(cloud: LabeledCloud, path):
    with open(path, "wb") as fh:
        fh.write(cloud_to_ply(cloud))


def read_ply(path) -> LabeledCloud:
    with open(path, "rb") as fh:
        return ply_to_cloud(fh.read())
