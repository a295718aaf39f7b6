"""Lift per-point class labels into structured per-tooth estimates.

Each estimate carries the tooth identity, the centroid of its supporting
points, a principal-axes frame with deterministic sign conventions, the
mean class confidence, and crown half-spans measured along the frame.
Classes with too few points are dropped and reported rather than
guessed at.

Sign conventions: the first principal axis is oriented along the local
arch tangent, the second along the outward radial direction, the third
toward global +z. These references make frames reproducible; they also
mean exact frame equivariance holds for rotations about the vertical
axis combined with tilts small enough not to flip any sign choice.
"""

from dataclasses import dataclass

import numpy as np

from .cases import CLASS_COUNT, GINGIVA_CLASS, FdiLabel
from .constraints import ToothRecord
from .geometry import DegenerateCloud, Frame3, principal_axes

MIN_SUPPORT = 10


@dataclass(frozen=True, eq=False)
class ToothEstimate:
    label: FdiLabel
    centroid: np.ndarray
    axes: Frame3
    support: int
    confidence: float
    mesiodistal_semi: float
    vertical_semi: float

    def as_dict(self):
        return {
            "fdi": self.label.code,
            "centroid": [float(v) for v in self.centroid],
            "axes": [[float(v) for v in row] for row in self.axes.axes],
            "support": self.support,
            "confidence": self.confidence,
            "mesiodistal_semi_mm": self.mesiodistal_semi,
            "vertical_semi_mm": self.vertical_semi,
        }


def _tangent_refs(centroid, centre):
    radial = np.array([centroid[0] - centre[0], centroid[1] - centre[1], 0.0])
    norm = np.linalg.norm(radial)
    if norm < 1e-9:
        radial = np.array([0.0, 1.0, 0.0])
    else:
        radial = radial / norm
    up = np.array([0.0, 0.0, 1.0])
    tangent = np.cross(up, radial)
    return tangent, radial, up


def _half_span(points, direction):
    proj = points @ direction
    return 0.5 * float(proj.max() - proj.min())


def lift(positions, labels, probs=None, min_support=MIN_SUPPORT, arch_centre=None):
    """ToothEstimates for every sufficiently supported nonzero class.

    Returns (estimates sorted by class index, dropped) where dropped maps
    class index -> point count for classes under ``min_support``.
    ``probs`` is an optional (N, classes) matrix of class probabilities;
    confidence is their mean over supporting points, 1.0 when absent.
    """
    positions = np.asarray(positions, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if positions.shape[0] != labels.shape[0]:
        raise ValueError("positions and labels disagree on point count")
    if probs is not None:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape[0] != labels.shape[0]:
            raise ValueError("positions and probabilities disagree on point count")

    tooth_mask = labels != GINGIVA_CLASS
    if tooth_mask.any():
        centre = positions[tooth_mask].mean(axis=0)
    else:
        centre = positions.mean(axis=0) if positions.shape[0] else np.zeros(3)
    if arch_centre is not None:
        centre = np.asarray(arch_centre, dtype=np.float64)

    estimates = []
    dropped = {}
    for cls in range(1, CLASS_COUNT):
        mask = labels == cls
        count = int(mask.sum())
        if count == 0:
            continue
        if count < min_support:
            dropped[cls] = count
            continue
        pts = positions[mask]
        centroid = pts.mean(axis=0)
        tangent, radial, up = _tangent_refs(centroid, centre)
        try:
            frame, _ = principal_axes(pts, ref_dirs=(tangent, radial, up))
        except DegenerateCloud:
            dropped[cls] = count
            continue
        axes = frame.axes
        tangent_axis = axes[int(np.abs(axes @ tangent).argmax())]
        vertical_axis = axes[int(np.abs(axes[:, 2]).argmax())]
        confidence = float(probs[mask, cls].mean()) if probs is not None else 1.0
        estimates.append(ToothEstimate(
            label=FdiLabel.from_class_index(cls),
            centroid=centroid,
            axes=frame,
            support=count,
            confidence=confidence,
            mesiodistal_semi=_half_span(pts, tangent_axis),
            vertical_semi=_half_span(pts, vertical_axis),
        ))
    return estimates, dropped


def records_from_estimates(estimates):
    """ToothRecords for constraint evaluation, semi-axes from point spans."""
    return [
        ToothRecord(
            label=est.label,
            centroid=est.centroid,
            mesiodistal_semi_axis=est.mesiodistal_semi,
            vertical_semi_axis=est.vertical_semi,
        )
        for est in estimates
    ]
