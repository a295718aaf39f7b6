"""Segmentation quality and clinical sufficiency metrics.

mIoU averages per-class IoU over all classes, tIoU over tooth classes
only; classes with an empty union are excluded from either mean. The
identification rate asks a weaker question than IoU: did enough of each
ground-truth tooth's points get the right class for the tooth to count
as found at all. Both pooled and per-scan aggregation are supported;
reports say which one was used.
"""

import math
from dataclasses import dataclass

import numpy as np

from .cases import CLASS_COUNT, GINGIVA_CLASS
from .errors import DomainError

TIR_THRESHOLD = 0.10
TIR_MIN_POINTS = 5
CENTROID_TOLERANCE_MM = 2.0
AXIS_TOLERANCE_DEG = 10.0


class LengthMismatch(DomainError):
    pass


class NoTeethInGroundTruth(DomainError):
    pass


@dataclass(frozen=True)
class MetricReport:
    miou: float
    tiou: float
    acc: float
    tir: float | None
    per_class_iou: tuple
    mode: str
    tir_threshold: float = TIR_THRESHOLD
    tir_min_points: int = TIR_MIN_POINTS

    def as_dict(self):
        return {
            "miou": self.miou,
            "tiou": self.tiou,
            "acc": self.acc,
            "tir": self.tir,
            "per_class_iou": list(self.per_class_iou),
            "mode": self.mode,
            "tir_threshold": self.tir_threshold,
            "tir_min_points": self.tir_min_points,
        }


def _as_scan_list(pred, gt):
    pred = [np.asarray(p) for p in pred] if isinstance(pred, (list, tuple)) \
        else [np.asarray(pred)]
    gt = [np.asarray(g) for g in gt] if isinstance(gt, (list, tuple)) \
        else [np.asarray(gt)]
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gt)} ground truths")
    for p, g in zip(pred, gt):
        if p.shape != g.shape:
            raise LengthMismatch(f"scan shapes differ: {p.shape} vs {g.shape}")
    return pred, gt


def _confusion(pred, gt, num_classes):
    idx = gt.astype(np.int64) * num_classes + pred.astype(np.int64)
    return np.bincount(idx, minlength=num_classes * num_classes) \
        .reshape(num_classes, num_classes)


def _iou_from_confusion(conf):
    inter = np.diag(conf).astype(np.float64)
    union = conf.sum(axis=0) + conf.sum(axis=1) - inter
    table = np.full(conf.shape[0], np.nan)
    nonzero = union > 0
    table[nonzero] = inter[nonzero] / union[nonzero]
    return table


def _mean_defined(values):
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else float("nan")


def tooth_identification_rate(pred, gt, threshold=TIR_THRESHOLD, n_min=TIR_MIN_POINTS):
    """Fraction of ground-truth teeth identified, averaged over scans.

    A tooth counts as identified when at least max(n_min, threshold * its
    GT point count) of its points carry the correct predicted class.
    Scans without any ground-truth teeth are excluded; if no scan has
    teeth the rate is undefined.
    """
    pred, gt = _as_scan_list(pred, gt)
    rates = []
    for p, g in zip(pred, gt):
        teeth = np.unique(g[g != GINGIVA_CLASS])
        if teeth.size == 0:
            continue
        found = 0
        for t in teeth:
            own = g == t
            needed = max(float(n_min), threshold * float(own.sum()))
            if float((p[own] == t).sum()) >= needed:
                found += 1
        rates.append(found / teeth.size)
    if not rates:
        raise NoTeethInGroundTruth("no scan contains any ground-truth tooth")
    return float(np.mean(rates))


def segmentation_metrics(pred, gt, mode="pooled", num_classes=CLASS_COUNT,
                         tir_threshold=TIR_THRESHOLD, tir_min_points=TIR_MIN_POINTS):
    """MetricReport over one scan or a list of scans.

    ``pooled`` accumulates one confusion matrix over every scan before
    computing IoU; ``per_scan`` computes per-scan metrics and averages
    the defined ones. TIR is always a per-scan average.
    """
    if mode not in ("pooled", "per_scan"):
        raise ValueError(f"mode must be 'pooled' or 'per_scan', got {mode!r}")
    pred, gt = _as_scan_list(pred, gt)

    if mode == "pooled":
        conf = sum(_confusion(p, g, num_classes) for p, g in zip(pred, gt))
        table = _iou_from_confusion(conf)
        miou = _mean_defined(table)
        tiou = _mean_defined(table[1:])
        acc = float(np.diag(conf).sum() / conf.sum())
        per_class = tuple(None if math.isnan(v) else float(v) for v in table)
    else:
        mious, tious, accs, tables = [], [], [], []
        for p, g in zip(pred, gt):
            conf = _confusion(p, g, num_classes)
            table = _iou_from_confusion(conf)
            mious.append(_mean_defined(table))
            tious.append(_mean_defined(table[1:]))
            accs.append(float(np.diag(conf).sum() / conf.sum()))
            tables.append(table)
        miou = _mean_defined(mious)
        tiou = _mean_defined(tious)
        acc = float(np.mean(accs))
        with np.errstate(invalid="ignore"):
            mean_table = np.nanmean(np.stack(tables), axis=0)
        per_class = tuple(None if math.isnan(v) else float(v) for v in mean_table)

    try:
        tir = tooth_identification_rate(pred, gt, tir_threshold, tir_min_points)
    except NoTeethInGroundTruth:
        tir = None
    return MetricReport(miou=miou, tiou=tiou, acc=acc, tir=tir,
                        per_class_iou=per_class, mode=mode,
                        tir_threshold=tir_threshold, tir_min_points=tir_min_points)


def axis_errors_deg(est_axes, gt_axes):
    """Per-axis angles in degrees between two frames, sign-optimal.

    Each estimated axis is compared against the ground-truth axis of the
    same index; flipping an axis costs nothing because a principal
    direction has no preferred sign.
    """
    est = np.asarray(est_axes, dtype=np.float64)
    gt = np.asarray(gt_axes, dtype=np.float64)
    dots = np.abs(np.einsum("ij,ij->i", est, gt))
    return tuple(float(np.degrees(np.arccos(np.clip(d, 0.0, 1.0)))) for d in dots)


def clinical_sufficiency(est_label, est_centroid, est_axes,
                         gt_label, gt_centroid, gt_axes,
                         centroid_tol_mm=CENTROID_TOLERANCE_MM,
                         axis_tol_deg=AXIS_TOLERANCE_DEG):
    """Whether an estimate supports downstream analysis, plus failed clauses."""
    reasons = []
    if est_label != gt_label:
        reasons.append("label")
    centroid_err = float(np.linalg.norm(
        np.asarray(est_centroid, dtype=np.float64) - np.asarray(gt_centroid, dtype=np.float64)))
    if not centroid_err < centroid_tol_mm:
        reasons.append("centroid")
    angles = axis_errors_deg(est_axes, gt_axes)
    if not max(angles) < axis_tol_deg:
        reasons.append("axes")
    return {
        "sufficient": not reasons,
        "reasons": tuple(reasons),
        "centroid_error_mm": centroid_err,
        "axis_errors_deg": angles,
    }
