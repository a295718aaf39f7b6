"""Training loop: decoupled-weight-decay Adam, global-norm clipping,
seeded shuffling, per-epoch validation, best-checkpoint tracking.

Every random draw is keyed off the config seed, so two runs with the
same seed produce byte-identical histories apart from wall timing.
"""

import copy
import hashlib
import json
import time
from dataclasses import dataclass, asdict

import numpy as np

from ..errors import DomainError
from ..metrics import segmentation_metrics
from .loss import LossConfig, loss_and_grad, softmax, NonFiniteLoss
from .model import SegModel


class TooFewClouds(DomainError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    batch_size: int = 4
    epochs: int = 10
    label_smoothing: float = 0.05
    dice_weight: float = 0.5
    dice_delta: float = 1e-6
    dice_mode: str = "batch"
    k: int = 3
    seed: int = 0
    val_fraction: float = 0.2
    augment: bool = False

    def __post_init__(self):
        for name in ("lr", "clip_norm", "batch_size", "epochs", "dice_delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0 or self.dice_weight < 0:
            raise ValueError("weight_decay and dice_weight must be nonnegative")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")

    def loss_config(self, num_classes=33):
        return LossConfig(label_smoothing=self.label_smoothing,
                          dice_weight=self.dice_weight,
                          dice_delta=self.dice_delta,
                          dice_mode=self.dice_mode,
                          num_classes=num_classes)

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_metrics: dict
    best_params: dict
    best_stats: dict
    train_indices: list
    val_indices: list


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}

    def step(self, params, grads):
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            self.m[name] = cfg.beta1 * self.m[name] + (1.0 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1.0 - cfg.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            # decay applies to the parameter directly, never through the moments
            params[name] = p - cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
                                         + cfg.weight_decay * p)


def global_grad_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads, max_norm):
    """Scale every gradient so the global norm is at most ``max_norm``."""
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale
    return norm


def split_dataset(n, val_fraction, seed):
    if n < 2:
        raise TooFewClouds(f"need at least 2 clouds to split, got {n}")
    perm = np.random.default_rng([seed, 17]).permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    return sorted(int(i) for i in perm[n_val:]), sorted(int(i) for i in perm[:n_val])


def _stack_batch(clouds, indices):
    feats = np.stack([clouds[i].features for i in indices])
    labels = np.stack([clouds[i].labels.astype(np.int64) for i in indices])
    return feats, labels


def predict_labels(model, clouds, batch_size=4):
    """Eval-mode predictions: (labels, class probabilities) per cloud."""
    out = []
    for start in range(0, len(clouds), batch_size):
        chunk = clouds[start:start + batch_size]
        feats = np.stack([c.features for c in chunk])
        logits = model.forward(feats, train_mode=False)
        probs = softmax(logits)
        preds = logits.argmax(axis=2)
        for row in range(len(chunk)):
            out.append((preds[row].astype(np.int64), probs[row]))
    return out


def evaluate_clouds(model, clouds, batch_size=4, mode="pooled"):
    predictions = predict_labels(model, clouds, batch_size)
    preds = [p for p, _ in predictions]
    gts = [c.labels.astype(np.int64) for c in clouds]
    return segmentation_metrics(preds, gts, mode=mode)


def train_model(model: SegModel, clouds, cfg: TrainConfig | None = None, log=None):
    """Train in place; returns history plus the best snapshot by TIR.

    Ties on TIR resolve to the higher mIoU, then to the earlier epoch.
    """
    cfg = cfg or TrainConfig()
    train_idx, val_idx = split_dataset(len(clouds), cfg.val_fraction, cfg.seed)
    if len(train_idx) < 5:
        raise TooFewClouds(f"need at least 5 training clouds, got {len(train_idx)}")
    loss_cfg = cfg.loss_config(model.config.num_classes)

    opt = AdamW(model.params, cfg)
    history = []
    best_key = None
    best = None

    work_clouds = list(clouds)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        if cfg.augment:
            from ..pointcloud import augment
            for i in train_idx:
                work_clouds[i] = augment(clouds[i], seed=cfg.seed * 100003 + epoch * 1009 + i)

        order = np.random.default_rng([cfg.seed, 1000 + epoch]).permutation(len(train_idx))
        shuffled = [train_idx[i] for i in order]
        batch_losses = []
        for step, start in enumerate(range(0, len(shuffled), cfg.batch_size)):
            batch_ids = shuffled[start:start + cfg.batch_size]
            feats, labels = _stack_batch(work_clouds, batch_ids)
            dropout_seed = cfg.seed * 1000003 + epoch * 10007 + step
            logits, fwd_cache = model.forward_with_cache(
                feats, train_mode=True, dropout_seed=dropout_seed)
            try:
                breakdown, d_logits = loss_and_grad(logits, labels, loss_cfg)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(
                    f"epoch {epoch} step {step} clouds {batch_ids}: {exc}") from exc
            grads = model.backward(d_logits, fwd_cache)
            clip_gradients(grads, cfg.clip_norm)
            opt.step(model.params, grads)
            model.snap_params()
            batch_losses.append(breakdown.total)

        val_report = evaluate_clouds(model, [work_clouds[i] for i in val_idx],
                                     cfg.batch_size)
        record = {
            "epoch": epoch,
            "loss": float(np.mean(batch_losses)),
            "miou": val_report.miou,
            "tiou": val_report.tiou,
            "acc": val_report.acc,
            "tir": val_report.tir,
            "wall_ms": (time.perf_counter() - t0) * 1000.0,
        }
        history.append(record)
        if log:
            log(record)

        key = (record["tir"] if record["tir"] is not None else -1.0, record["miou"])
        if best_key is None or key > best_key:
            best_key = key
            best = {
                "epoch": epoch,
                "metrics": val_report.as_dict(),
                "params": copy.deepcopy(model.params),
                "stats": copy.deepcopy(model.stats),
            }

    return TrainResult(history=history,
                       best_epoch=best["epoch"],
                       best_metrics=best["metrics"],
                       best_params=best["params"],
                       best_stats=best["stats"],
                       train_indices=train_idx,
                       val_indices=val_idx)


def history_lines(history):
    """Training history as JSON lines, one record per epoch."""
    return "\n".join(json.dumps(rec, sort_keys=True) for rec in history) + "\n"
