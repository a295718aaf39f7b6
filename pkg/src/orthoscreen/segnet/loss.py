"""Composite segmentation objective: smoothed cross-entropy plus soft Dice.

The Dice term is batch-adaptive by default: only classes that actually
appear in the batch contribute, so rare-class terms cannot inject huge
stabilizer-dominated gradients. The ``full`` mode keeps all classes and
exists to reproduce exactly that instability in ablations.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


class EmptyBatch(DomainError):
    pass


class NonFiniteLoss(DomainError):
    pass


@dataclass(frozen=True)
class LossConfig:
    label_smoothing: float = 0.05
    dice_weight: float = 0.5
    dice_delta: float = 1e-6
    dice_mode: str = "batch"
    num_classes: int = 33

    def __post_init__(self):
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")
        if self.dice_weight < 0.0:
            raise ValueError("dice_weight must be nonnegative")
        if self.dice_delta <= 0.0:
            raise ValueError("dice_delta must be positive")
        if self.dice_mode not in ("batch", "full"):
            raise ValueError(f"dice_mode must be 'batch' or 'full', got {self.dice_mode!r}")


@dataclass(frozen=True)
class LossBreakdown:
    ce: float
    dice: float
    total: float
    present_classes: tuple


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _flatten(logits, labels, num_classes):
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    flat = logits.reshape(-1, logits.shape[-1])
    lab = labels.reshape(-1)
    if flat.shape[0] == 0:
        raise EmptyBatch("no points in batch")
    if flat.shape[1] != num_classes:
        raise ValueError(f"logits carry {flat.shape[1]} classes, config says {num_classes}")
    if lab.shape[0] != flat.shape[0]:
        raise ValueError("labels and logits disagree on point count")
    if lab.min() < 0 or lab.max() >= num_classes:
        raise ValueError("labels outside class range")
    return flat, lab


def dice_term(probs, labels, delta, mode, num_classes):
    """Soft Dice loss over pooled batch points plus its gradient in
    probability space (before any softmax coupling).

    Class terms exist only for ``C_B``, the classes present in the batch,
    unless mode is ``full``; absent-class columns of the gradient are then
    exactly zero.
    """
    probs = probs.reshape(-1, num_classes)
    lab = np.asarray(labels).reshape(-1)
    onehot = np.zeros_like(probs)
    onehot[np.arange(lab.shape[0]), lab] = 1.0

    counts = onehot.sum(axis=0)
    if mode == "batch":
        present = np.flatnonzero(counts > 0)
    else:
        present = np.arange(num_classes)
    inter = (probs * onehot).sum(axis=0)
    p_sum = probs.sum(axis=0)
    num = 2.0 * inter + delta
    den = p_sum + counts + delta

    loss = float(np.mean(1.0 - num[present] / den[present]))
    d_probs = np.zeros_like(probs)
    scale = 1.0 / present.size
    # d/dp of -(2*inter+delta)/(den) for class c: -(2*y*den - num)/den^2
    coef_y = -2.0 / den[present] * scale
    coef_p = num[present] / den[present] ** 2 * scale
    d_probs[:, present] = onehot[:, present] * coef_y + coef_p
    return loss, d_probs, tuple(int(c) for c in np.flatnonzero(counts > 0))


def loss_and_grad(logits, labels, cfg: LossConfig | None = None):
    """Composite loss breakdown and its exact gradient w.r.t. the logits."""
    cfg = cfg or LossConfig()
    flat, lab = _flatten(logits, labels, cfg.num_classes)
    m = flat.shape[0]

    probs = softmax(flat)
    eps = cfg.label_smoothing
    targets = np.full_like(probs, eps / cfg.num_classes)
    targets[np.arange(m), lab] += 1.0 - eps

    # stable log-softmax for the CE value
    shifted = flat - flat.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    ce = float(-(targets * log_probs).sum() / m)
    d_logits = (probs - targets) / m

    dice, d_probs, present = dice_term(
        probs, lab, cfg.dice_delta, cfg.dice_mode, cfg.num_classes)
    if cfg.dice_weight != 0.0:
        # chain through softmax: dL/dz = p * (dL/dp - sum_c dL/dp_c * p_c)
        inner = (d_probs * probs).sum(axis=1, keepdims=True)
        d_logits = d_logits + cfg.dice_weight * probs * (d_probs - inner)

    total = ce + cfg.dice_weight * dice
    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss is not finite (ce={ce}, dice={dice})")
    breakdown = LossBreakdown(ce=ce, dice=dice, total=total, present_classes=present)
    return breakdown, d_logits.reshape(np.asarray(logits).shape)


def composite_loss(logits, labels, cfg: LossConfig | None = None):
    breakdown, _ = loss_and_grad(logits, labels, cfg)
    return breakdown
