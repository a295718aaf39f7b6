"""Comparison grids over neighborhood size, input features, and loss setup.

Each grid point trains a fresh model on the same cloud split and reports
the pooled validation metrics, so rows are comparable and reproducible
from a seed. Grids are declared as flag strings (``k=3,5,10,20``), never
as code edits.
"""

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .segnet import ModelConfig, SegModel, TrainConfig, train_model

# Input feature columns by variant; order matches compute_features.
FEATURE_SETS = {
    "full": (0, 1, 2, 3, 4, 5),
    "no_centroid_dist": (0, 1, 2, 4, 5),
    "no_height": (0, 1, 2, 3, 5),
    "no_radial": (0, 1, 2, 3, 4),
    "xyz_only": (0, 1, 2),
}

LOSS_VARIANTS = {
    "ce": {"label_smoothing": 0.0, "dice_weight": 0.0, "dice_mode": "batch"},
    "ce_fd": {"label_smoothing": 0.0, "dice_weight": 0.5, "dice_mode": "full"},
    "ce_bd": {"label_smoothing": 0.0, "dice_weight": 0.5, "dice_mode": "batch"},
    "ce_ls_bd": {"label_smoothing": 0.05, "dice_weight": 0.5, "dice_mode": "batch"},
}

_AXES = ("k", "features", "loss")


class BadGrid(DomainError):
    """Grid string does not parse or names an unknown axis or value."""


@dataclass(frozen=True)
class Variant:
    k: int = 3
    features: str = "full"
    loss: str = "ce_ls_bd"

    @property
    def name(self):
        return f"k{self.k}-{self.features}-{self.loss}"


def parse_grid(specs):
    """Axis strings like ``k=3,5,10,20`` into the cross product of variants.

    Each spec names one axis; repeated axes are rejected. The row order is
    the declared value order, outermost axis first.
    """
    axes = {}
    for spec in specs:
        if "=" not in spec:
            raise BadGrid(f"grid axis must look like name=v1,v2: {spec!r}")
        name, _, raw = spec.partition("=")
        name = name.strip()
        if name not in _AXES:
            raise BadGrid(f"unknown grid axis {name!r}, expected one of {_AXES}")
        if name in axes:
            raise BadGrid(f"axis {name!r} given twice")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise BadGrid(f"axis {name!r} has no values")
        if name == "k":
            try:
                values = [int(v) for v in values]
            except ValueError as exc:
                raise BadGrid(f"axis k needs integers: {raw!r}") from exc
            if any(v < 1 for v in values):
                raise BadGrid(f"k must be positive: {values}")
        elif name == "features":
            for v in values:
                if v not in FEATURE_SETS:
                    raise BadGrid(f"unknown feature set {v!r}, expected one of "
                                  f"{sorted(FEATURE_SETS)}")
        else:
            for v in values:
                if v not in LOSS_VARIANTS:
                    raise BadGrid(f"unknown loss variant {v!r}, expected one of "
                                  f"{sorted(LOSS_VARIANTS)}")
        axes[name] = values
    if not axes:
        raise BadGrid("empty grid")
    ordered = [(n, axes[n]) for n in _AXES if n in axes]
    variants = []
    for combo in itertools.product(*(vals for _, vals in ordered)):
        variants.append(Variant(**dict(zip((n for n, _ in ordered), combo))))
    return variants


@dataclass(frozen=True, eq=False)
class FeatureView:
    """Minimal training view of a cloud: selected feature columns + labels."""

    features: np.ndarray
    labels: np.ndarray


def slice_features(cloud, columns) -> FeatureView:
    return FeatureView(
        features=np.ascontiguousarray(cloud.features[:, list(columns)]),
        labels=cloud.labels,
    )


def run_variant(clouds, variant: Variant, base: TrainConfig):
    columns = FEATURE_SETS[variant.features]
    sliced = [slice_features(c, columns) for c in clouds]
    # Feature views carry no positions, so augmentation stays off in grids.
    cfg = replace(base, k=variant.k, augment=False, **LOSS_VARIANTS[variant.loss])
    model = SegModel(ModelConfig(k=variant.k, in_features=len(columns)), seed=base.seed)
    result = train_model(model, sliced, cfg)
    best = result.best_metrics
    return {
        "variant": variant.name,
        "k": variant.k,
        "features": variant.features,
        "loss": variant.loss,
        "miou": best["miou"],
        "tiou": best["tiou"],
        "acc": best["acc"],
        "tir": best["tir"],
        "best_epoch": result.best_epoch,
    }


def run_grid(clouds, variants, base: TrainConfig):
    """One metrics row per variant, in grid order."""
    return [run_variant(clouds, v, base) for v in variants]


def table_lines(rows):
    """Fixed-width text table, one line per grid row."""
    cols = ("variant", "k", "features", "loss", "miou", "tiou", "acc", "tir")
    rendered = [
        {c: (f"{row[c]:.4f}" if isinstance(row[c], float) else str(row[c])) for c in cols}
        for row in rows
    ]
    widths = {c: max(len(c), *(len(r[c]) for r in rendered)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for r in rendered:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in cols))
    return lines
